#include "irwbc/sim/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "irwbc/errors.hpp"
#include "detail/log.hpp"

namespace irwbc {

namespace {

constexpr double kBlowup = 1e6;
constexpr double kSaturationTol = 1e-9;

bool at_bound(const VecX& u, const VecX& lo, const VecX& hi) {
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (lo.size() == u.size() && std::abs(u(i) - lo(i)) < kSaturationTol) return true;
    if (hi.size() == u.size() && std::abs(u(i) - hi(i)) < kSaturationTol) return true;
  }
  return false;
}

Vec3 spring_damper(const std::vector<ContactSurface>& surfaces, const Vec3& p, const Vec3& v) {
  Vec3 f = Vec3::Zero();
  for (const auto& s : surfaces) {
    const double depth = -s.distance(p);
    if (depth <= 0.0) continue;
    const double fn = std::max(0.0, s.stiffness * depth - s.damping * s.normal.dot(v));
    f += fn * s.normal;
  }
  return f;
}

}  // namespace

void ContactSurface::validate() const {
  if (!point.allFinite()) throw ValidationError("surface point is not finite");
  if (std::abs(normal.norm() - 1.0) > 1e-9) throw ValidationError("surface normal must be unit length");
  if (!(stiffness > 0.0)) throw ValidationError("surface stiffness must be positive");
  if (!(damping >= 0.0)) throw ValidationError("surface damping must be non-negative");
}

Vec3 contact_force(const RobotModel& model, const RobotState& state,
                   const std::vector<ContactSurface>& surfaces, const std::string& frame) {
  if (surfaces.empty()) return Vec3::Zero();
  const FrameKinematics fk = frame_kinematics(model, state, frame);
  return spring_damper(surfaces, fk.pose.translation(), fk.twist.head<3>());
}

StepResult step(const RobotModel& model, const RobotState& state, Controller& controller,
                const std::vector<ContactSurface>& surfaces, const ContactSettings& contact,
                double t, double dt, const Vec3& previous_force,
                const std::vector<ExternalWrench>& push) {
  if (!(dt > 0.0)) throw NonFiniteInput("time step must be positive");

  const FrameKinematics fk = frame_kinematics(model, state, contact.frame);
  const Vec3 p_before = fk.pose.translation();
  const Vec3 f_now = spring_damper(surfaces, p_before, fk.twist.head<3>());
  bool in_contact = false;
  for (const auto& s : surfaces) in_contact = in_contact || s.distance(p_before) < 0.0;

  std::vector<ExternalWrench> f_hat;
  if (!previous_force.isZero(0.0)) {
    f_hat.push_back({contact.frame, (Vec6() << previous_force, Vec3::Zero()).finished()});
  }
  const ControlOutput out = controller.step(state, f_hat);

  std::vector<ExternalWrench> f_ext = push;
  if (!f_now.isZero(0.0)) {
    f_ext.push_back({contact.frame, (Vec6() << f_now, Vec3::Zero()).finished()});
  }
  const VecX nu_dot = forward_dynamics(model, state, out.u, f_ext);

  StepResult res;
  res.contact_force = f_now;
  res.state = integrate_state(state, nu_dot, dt);

  StepRecord& rec = res.record;
  rec.time = t;
  rec.q = state.configuration_vector();
  rec.nu = state.nu;
  rec.nu_dot = nu_dot;
  rec.u = out.u;
  rec.h = out.h_value ? *out.h_value
                      : impact_metric(model, state, ImpactSpec(contact.frame, contact.metric_normal, 0.0, 0.0));
  rec.contact_force = f_now.norm();
  rec.in_contact = in_contact;
  rec.saturated = at_bound(out.u, controller.config().u_lower, controller.config().u_upper);
  rec.qp_status = out.qp_status;
  rec.fallback_used = out.fallback_used;

  const FrameKinematics fk_after = frame_kinematics(model, res.state, contact.frame);
  const Vec3 p_after = fk_after.pose.translation();
  for (const auto& s : surfaces) {
    if (!(s.distance(p_before) > 0.0 && s.distance(p_after) <= 0.0)) continue;
    const double v_n = s.normal.dot(fk_after.twist.head<3>());
    if (!(v_n < -contact.v_min)) continue;

    const double bound = std::isfinite(contact.lambda_cap) ? contact.lambda_cap : 0.0;
    ImpactSpec spec(contact.frame, s.normal, bound, contact.restitution);
    const double inv_mass = inverse_effective_mass(model, res.state, spec);
    double lambda = -(1.0 + contact.restitution) * v_n / inv_mass;
    ImpactEvent ev;
    if (lambda > contact.lambda_cap) {
      lambda = contact.lambda_cap;
      ev.capped = true;
      log::info("impulse capped at {} (t = {})", lambda, t + dt);
    }
    if (!std::isfinite(contact.lambda_cap)) spec = ImpactSpec(contact.frame, s.normal, lambda, contact.restitution);
    const ImpactJump jump = impact_velocity_jump(model, res.state, spec, lambda);

    ev.time = t + dt;
    ev.lambda = lambda;
    ev.delta_nu = jump.delta_nu;
    ev.h_at_impact = impact_metric(model, res.state, spec);
    ev.pre_normal_velocity = v_n;
    ev.post_normal_velocity =
        s.normal.dot(frame_kinematics(model, jump.after, contact.frame).twist.head<3>());
    ev.kinetic_before = kinetic_energy(model, res.state);
    ev.kinetic_after = kinetic_energy(model, jump.after);
    ev.q_before = res.state.configuration_vector();
    ev.q_after = jump.after.configuration_vector();
    res.state = jump.after;
    res.impact = std::move(ev);
    rec.impact = true;
    break;
  }

  if (!res.state.nu.allFinite() || res.state.nu.norm() > kBlowup) {
    throw NumericalBlowup("velocity norm exceeded 1e6 at t = " + std::to_string(t + dt));
  }
  return res;
}

Metrics compute_metrics(const TrajectoryLog& log, double window) {
  Metrics m;
  if (log.records.empty() || log.events.empty()) return m;
  const double dt = log.dt;
  std::vector<bool> in_window(log.records.size(), false);
  for (const auto& ev : log.events) {
    for (std::size_t k = 0; k < log.records.size(); ++k) {
      const double t = log.records[k].time;
      if (t >= ev.time - 0.5 * dt && t < ev.time + window - 0.5 * dt) in_window[k] = true;
    }
  }
  for (std::size_t k = 0; k < log.records.size(); ++k) {
    if (!in_window[k]) continue;
    m.q_total_impact += log.records[k].nu.norm() * dt;
    if (log.records[k].saturated) ++m.saturation_steps;
  }
  m.impacts = static_cast<int>(log.events.size());
  m.h_min = log.events.front().h_at_impact;
  double h_sum = 0.0;
  for (const auto& ev : log.events) {
    m.peak_delta_nu = std::max(m.peak_delta_nu, ev.delta_nu.norm());
    m.h_min = std::min(m.h_min, ev.h_at_impact);
    h_sum += ev.h_at_impact;
    if (ev.capped) ++m.capped_impacts;
  }
  m.h_mean = h_sum / static_cast<double>(log.events.size());
  return m;
}

}  // namespace irwbc
