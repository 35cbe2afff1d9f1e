#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "irwbc/sim/scenario.hpp"

namespace irwbc::cli {

/// t, q_*, nu_*, nudot_*, u_*, H, f_contact_n, in_contact, impact, qp_status, fallback
std::string csv_header(const RobotModel& model);
std::string csv_row(const StepRecord& record);

/// Streams one row per record as they arrive.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const RobotModel& model);
  void write(const StepRecord& record);

 private:
  std::ostream& out_;
};

struct SvgSeries {
  std::string id;
  std::string color;
  const TrajectoryLog* log = nullptr;
};

/// Stacked line panels: H(q), ||nu||, one per input (with bound lines) and
/// the contact flag. Each series gets one <polyline> per panel.
void write_svg(std::ostream& out, const std::vector<SvgSeries>& runs, const VecX& u_lower,
               const VecX& u_upper);

nlohmann::json metrics_json(const Metrics& m);
Metrics metrics_from_json(const nlohmann::json& j);

struct VariantReport {
  std::string status = "ok";  ///< "ok" or the error message
  Metrics metrics;
  std::vector<double> impact_h;
  std::vector<double> pre_push_errors;
  bool ok() const { return status == "ok"; }
};

struct ComparisonReport {
  VariantReport nominal;
  VariantReport robust;
  std::optional<double> reduction_percent;  ///< 100 (1 - robust / nominal)
  int saturation_delta = 0;                 ///< robust - nominal
  std::vector<std::array<double, 2>> impact_h_pairs;

  static ComparisonReport build(VariantReport nominal, VariantReport robust);
  bool operator==(const ComparisonReport&) const = default;
};

bool operator==(const Metrics& a, const Metrics& b);
inline bool operator==(const VariantReport& a, const VariantReport& b) {
  return a.status == b.status && a.metrics == b.metrics && a.impact_h == b.impact_h &&
         a.pre_push_errors == b.pre_push_errors;
}

nlohmann::json to_json(const ComparisonReport& r);
ComparisonReport report_from_json(const nlohmann::json& j);

}  // namespace irwbc::cli
