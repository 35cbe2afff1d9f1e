#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "irwbc/control/controller.hpp"

namespace irwbc {

/// Infinite plane with a Kelvin-Voigt normal contact law.
struct ContactSurface {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  ///< outward, world
  double stiffness = 1e4;
  double damping = 50.0;

  void validate() const;
  /// Signed distance of p above the plane.
  double distance(const Vec3& p) const { return normal.dot(p - point); }
};

/// Which frame touches the surfaces and how touchdown impulses are formed.
struct ContactSettings {
  std::string frame;
  double restitution = 0.0;
  double lambda_cap = std::numeric_limits<double>::infinity();
  double v_min = 1e-4;
  Vec3 metric_normal = Vec3::UnitZ();  ///< direction of the logged H(q)
};

struct ImpactEvent {
  double time = 0.0;
  double lambda = 0.0;
  bool capped = false;
  VecX delta_nu;
  double h_at_impact = 0.0;  ///< H(q-) along the surface normal
  double pre_normal_velocity = 0.0;
  double post_normal_velocity = 0.0;
  double kinetic_before = 0.0;
  double kinetic_after = 0.0;
  VecX q_before;
  VecX q_after;
};

/// One logged sample: the state at `time` and the command applied from it.
struct StepRecord {
  double time = 0.0;
  VecX q;  ///< configuration vector (base pose then joints)
  VecX nu;
  VecX nu_dot;
  VecX u;
  double h = 0.0;
  double contact_force = 0.0;  ///< normal force magnitude, >= 0
  bool in_contact = false;
  bool impact = false;
  bool saturated = false;
  QpStatus qp_status = QpStatus::Optimal;
  bool fallback_used = false;
};

struct TrajectoryLog {
  double dt = 0.0;
  std::vector<StepRecord> records;
  std::vector<ImpactEvent> events;
};

struct Metrics {
  double q_total_impact = 0.0;
  int saturation_steps = 0;
  double peak_delta_nu = 0.0;
  double h_min = 0.0;
  double h_mean = 0.0;
  int impacts = 0;
  int capped_impacts = 0;
};

struct StepResult {
  RobotState state;
  StepRecord record;
  std::optional<ImpactEvent> impact;
  Vec3 contact_force = Vec3::Zero();  ///< sustained force applied during the step
};

/// Sustained spring-damper force on the contact frame, summed over surfaces.
Vec3 contact_force(const RobotModel& model, const RobotState& state,
                   const std::vector<ContactSurface>& surfaces, const std::string& frame);

/// One fixed step at time t: control with f_hat = `previous_force`, forward
/// dynamics with the current sustained force (plus `push`), semi-implicit
/// integration and touchdown impulse.
StepResult step(const RobotModel& model, const RobotState& state, Controller& controller,
                const std::vector<ContactSurface>& surfaces, const ContactSettings& contact,
                double t, double dt, const Vec3& previous_force,
                const std::vector<ExternalWrench>& push = {});

/// Metrics over the impact windows [t_e, t_e + window).
Metrics compute_metrics(const TrajectoryLog& log, double window);

}  // namespace irwbc
