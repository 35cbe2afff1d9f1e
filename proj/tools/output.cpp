#include "output.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <fmt/format.h>

namespace irwbc::cli {

using json = nlohmann::json;

namespace {

void append_columns(std::string& s, const char* prefix, Eigen::Index count) {
  for (Eigen::Index i = 0; i < count; ++i) s += fmt::format(",{}_{}", prefix, i);
}

void append_values(std::string& s, const VecX& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) s += fmt::format(",{:.17g}", v(i));
}

constexpr double kWidth = 900.0;
constexpr double kPanelHeight = 120.0;
constexpr double kMargin = 50.0;
constexpr std::size_t kMaxPoints = 2000;

struct Panel {
  std::string name;
  std::function<double(const StepRecord&)> value;
  std::vector<double> guides;
};

std::string polyline(const TrajectoryLog& log, const Panel& panel, double y0, double lo, double hi,
                     double t_end, const std::string& id, const std::string& color) {
  const std::size_t n = log.records.size();
  const std::size_t stride = std::max<std::size_t>(1, n / kMaxPoints);
  std::string pts;
  for (std::size_t k = 0; k < n; k += stride) {
    const auto& r = log.records[k];
    const double x = kMargin + (kWidth - 2 * kMargin) * (t_end > 0 ? r.time / t_end : 0.0);
    const double v = panel.value(r);
    const double y = y0 + kPanelHeight - 10 - (kPanelHeight - 20) * (hi > lo ? (v - lo) / (hi - lo) : 0.5);
    pts += fmt::format("{:.2f},{:.2f} ", x, y);
  }
  return fmt::format(
      "  <polyline id=\"{}-{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1\" points=\"{}\"/>\n", id,
      panel.name, color, pts);
}

}  // namespace

std::string csv_header(const RobotModel& model) {
  std::string s = "t";
  const auto nq = static_cast<Eigen::Index>(model.num_joint_coords() + (model.floating_base() ? 7 : 0));
  append_columns(s, "q", nq);
  append_columns(s, "nu", model.nv());
  append_columns(s, "nudot", model.nv());
  append_columns(s, "u", model.num_inputs());
  s += ",H,f_contact_n,in_contact,impact,qp_status,fallback";
  return s;
}

std::string csv_row(const StepRecord& r) {
  std::string s = fmt::format("{:.17g}", r.time);
  append_values(s, r.q);
  append_values(s, r.nu);
  append_values(s, r.nu_dot);
  append_values(s, r.u);
  s += fmt::format(",{:.17g},{:.17g},{:d},{:d},{},{:d}", r.h, r.contact_force, r.in_contact, r.impact,
                   to_string(r.qp_status), r.fallback_used);
  return s;
}

CsvWriter::CsvWriter(std::ostream& out, const RobotModel& model) : out_(out) {
  out_ << csv_header(model) << '\n';
}

void CsvWriter::write(const StepRecord& record) { out_ << csv_row(record) << '\n'; }

void write_svg(std::ostream& out, const std::vector<SvgSeries>& runs, const VecX& u_lower,
               const VecX& u_upper) {
  std::vector<Panel> panels;
  panels.push_back({"H", [](const StepRecord& r) { return r.h; }, {}});
  panels.push_back({"nu_norm", [](const StepRecord& r) { return r.nu.norm(); }, {}});
  Eigen::Index m = 0;
  for (const auto& run : runs) {
    if (run.log && !run.log->records.empty()) m = std::max(m, run.log->records.front().u.size());
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    Panel p{fmt::format("u_{}", i), [i](const StepRecord& r) { return r.u(i); }, {}};
    if (u_lower.size() == m && std::isfinite(u_lower(i))) p.guides.push_back(u_lower(i));
    if (u_upper.size() == m && std::isfinite(u_upper(i))) p.guides.push_back(u_upper(i));
    panels.push_back(std::move(p));
  }
  panels.push_back({"contact", [](const StepRecord& r) { return r.in_contact ? 1.0 : 0.0; }, {}});

  double t_end = 0.0;
  for (const auto& run : runs) {
    if (run.log && !run.log->records.empty()) t_end = std::max(t_end, run.log->records.back().time);
  }
  const double height = kMargin + panels.size() * (kPanelHeight + 10);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\">\n",
      kWidth, height, kWidth, height);
  out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    const double y0 = 20 + p * (kPanelHeight + 10);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& run : runs) {
      if (!run.log) continue;
      for (const auto& r : run.log->records) {
        lo = std::min(lo, panel.value(r));
        hi = std::max(hi, panel.value(r));
      }
    }
    for (double g : panel.guides) {
      lo = std::min(lo, g);
      hi = std::max(hi, g);
    }
    if (!std::isfinite(lo)) lo = hi = 0.0;
    out << fmt::format(
        "  <rect x=\"{:.0f}\" y=\"{:.0f}\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"none\" "
        "stroke=\"#ccc\"/>\n",
        kMargin, y0, kWidth - 2 * kMargin, kPanelHeight);
    out << fmt::format("  <text x=\"5\" y=\"{:.0f}\" font-size=\"11\">{}</text>\n", y0 + 14, panel.name);
    for (double g : panel.guides) {
      const double y = y0 + kPanelHeight - 10 - (kPanelHeight - 20) * (hi > lo ? (g - lo) / (hi - lo) : 0.5);
      out << fmt::format(
          "  <line class=\"bound\" x1=\"{:.0f}\" y1=\"{:.2f}\" x2=\"{:.0f}\" y2=\"{:.2f}\" "
          "stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n",
          kMargin, y, kWidth - kMargin, y);
    }
    for (const auto& run : runs) {
      if (run.log) out << polyline(*run.log, panel, y0, lo, hi, t_end, run.id, run.color);
    }
  }
  out << "</svg>\n";
}

json metrics_json(const Metrics& m) {
  return json{{"q_total_impact", m.q_total_impact}, {"saturation_steps", m.saturation_steps},
              {"peak_delta_nu", m.peak_delta_nu},   {"h_min", m.h_min},
              {"h_mean", m.h_mean},                 {"impacts", m.impacts},
              {"capped_impacts", m.capped_impacts}};
}

Metrics metrics_from_json(const json& j) {
  Metrics m;
  m.q_total_impact = j.at("q_total_impact").get<double>();
  m.saturation_steps = j.at("saturation_steps").get<int>();
  m.peak_delta_nu = j.at("peak_delta_nu").get<double>();
  m.h_min = j.at("h_min").get<double>();
  m.h_mean = j.at("h_mean").get<double>();
  m.impacts = j.at("impacts").get<int>();
  m.capped_impacts = j.at("capped_impacts").get<int>();
  return m;
}

bool operator==(const Metrics& a, const Metrics& b) {
  return a.q_total_impact == b.q_total_impact && a.saturation_steps == b.saturation_steps &&
         a.peak_delta_nu == b.peak_delta_nu && a.h_min == b.h_min && a.h_mean == b.h_mean &&
         a.impacts == b.impacts && a.capped_impacts == b.capped_impacts;
}

ComparisonReport ComparisonReport::build(VariantReport nominal, VariantReport robust) {
  ComparisonReport r;
  r.nominal = std::move(nominal);
  r.robust = std::move(robust);
  if (r.nominal.ok() && r.robust.ok()) {
    if (r.nominal.metrics.q_total_impact > 0.0) {
      r.reduction_percent = 100.0 * (1.0 - r.robust.metrics.q_total_impact / r.nominal.metrics.q_total_impact);
    }
    r.saturation_delta = r.robust.metrics.saturation_steps - r.nominal.metrics.saturation_steps;
    const std::size_t k = std::min(r.nominal.impact_h.size(), r.robust.impact_h.size());
    for (std::size_t i = 0; i < k; ++i) r.impact_h_pairs.push_back({r.nominal.impact_h[i], r.robust.impact_h[i]});
  }
  return r;
}

namespace {

json variant_json(const VariantReport& v) {
  json j{{"status", v.status}};
  if (v.ok()) {
    j["metrics"] = metrics_json(v.metrics);
    j["impact_h"] = v.impact_h;
    j["pre_push_errors"] = v.pre_push_errors;
  }
  return j;
}

VariantReport variant_from_json(const json& j) {
  VariantReport v;
  v.status = j.at("status").get<std::string>();
  if (v.ok()) {
    v.metrics = metrics_from_json(j.at("metrics"));
    v.impact_h = j.at("impact_h").get<std::vector<double>>();
    v.pre_push_errors = j.at("pre_push_errors").get<std::vector<double>>();
  }
  return v;
}

}  // namespace

json to_json(const ComparisonReport& r) {
  json j;
  j["nominal"] = variant_json(r.nominal);
  j["robust"] = variant_json(r.robust);
  j["reduction_percent"] = r.reduction_percent ? json(*r.reduction_percent) : json(nullptr);
  j["saturation_delta"] = r.saturation_delta;
  j["impact_h_pairs"] = r.impact_h_pairs;
  return j;
}

ComparisonReport report_from_json(const json& j) {
  ComparisonReport r;
  r.nominal = variant_from_json(j.at("nominal"));
  r.robust = variant_from_json(j.at("robust"));
  if (!j.at("reduction_percent").is_null()) r.reduction_percent = j["reduction_percent"].get<double>();
  r.saturation_delta = j.at("saturation_delta").get<int>();
  r.impact_h_pairs = j.at("impact_h_pairs").get<std::vector<std::array<double, 2>>>();
  return r;
}

}  // namespace irwbc::cli
