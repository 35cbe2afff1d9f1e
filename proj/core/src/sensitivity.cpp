#include "irwbc/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "irwbc/errors.hpp"
#include "detail/log.hpp"

namespace irwbc {

ImpactSpec::ImpactSpec(std::string contact_frame, const Vec3& normal, double lambda_bar,
                       double restitution)
    : frame_(std::move(contact_frame)),
      lambda_bar_(lambda_bar),
      restitution_(restitution) {
  const double norm = normal.norm();
  if (!std::isfinite(norm) || norm < 1e-9) throw ValidationError("impact normal is degenerate");
  normal_ = normal / norm;
  if (!(lambda_bar >= 0.0) || !std::isfinite(lambda_bar)) {
    throw ValidationError("impulse bound lambda_bar must be finite and non-negative");
  }
  if (!(restitution >= 0.0 && restitution <= 1.0)) {
    throw ValidationError("restitution must lie in [0, 1]");
  }
}

WrenchUncertainty::WrenchUncertainty(const Vec6& b) : bounds(b) {
  if (!b.allFinite() || (b.array() < 0.0).any()) {
    throw ValidationError("wrench uncertainty bounds must be finite and non-negative");
  }
}

MatX WrenchUncertainty::kernel(const ContactRows& rows) const {
  VecX diag(static_cast<Eigen::Index>(rows.count()));
  Eigen::Index k = 0;
  for (int r = 0; r < 6; ++r) {
    if (rows.test(r)) diag(k++) = bounds(r) * bounds(r);
  }
  return diag.asDiagonal();
}

DofMask joints_only_mask(const RobotModel& model) {
  DofMask mask(model.nv(), false);
  for (int i = model.joint_offset(); i < model.nv(); ++i) mask[i] = true;
  return mask;
}

MatX contact_jacobian(const RobotModel& model, const RobotState& state,
                      const std::string& contact_frame, const ContactRows& rows) {
  const Mat6X J = frame_kinematics(model, state, contact_frame).jacobian;
  MatX out(static_cast<Eigen::Index>(rows.count()), model.nv());
  Eigen::Index k = 0;
  for (int r = 0; r < 6; ++r) {
    if (rows.test(r)) out.row(k++) = J.row(r);
  }
  return out;
}

MatX sensitivity_matrix(const RobotModel& model, const RobotState& state,
                        const std::string& contact_frame, const ContactRows& rows) {
  const MatX Jc = contact_jacobian(model, state, contact_frame, rows);
  const MassMatrixFactor factor(mass_matrix(model, state));
  return factor.solve(MatX(Jc.transpose()));
}

EllipsoidStats ellipsoid_stats(const MatX& h_gamma) {
  EllipsoidStats stats;
  stats.h_gamma = h_gamma;
  if (h_gamma.size() == 0) return stats;
  Eigen::SelfAdjointEigenSolver<MatX> eig(h_gamma, Eigen::EigenvaluesOnly);
  VecX ev = eig.eigenvalues().reverse();  // descending
  ev = ev.cwiseMax(0.0);
  stats.eigenvalues = ev;
  stats.lambda_max = ev(0);
  stats.frobenius = h_gamma.norm();
  const double tol = std::max(1.0, stats.lambda_max) * 1e-12 * static_cast<double>(ev.size());
  stats.rank = static_cast<int>((ev.array() > tol).count());
  return stats;
}

EllipsoidStats wrench_ellipsoid(const RobotModel& model, const RobotState& state,
                                const std::string& contact_frame, const WrenchUncertainty& unc,
                                const ContactRows& rows) {
  const MatX gamma = sensitivity_matrix(model, state, contact_frame, rows);
  const MatX H = gamma * unc.kernel(rows) * gamma.transpose();
  return ellipsoid_stats(0.5 * (H + H.transpose()));
}

EllipsoidStats directional_ellipsoid(const RobotModel& model, const RobotState& state,
                                     const ImpactSpec& spec) {
  const MatX gamma = sensitivity_matrix(model, state, spec.contact_frame());
  const VecX gn = gamma * spec.normal();
  const double lb2 = spec.lambda_bar() * spec.lambda_bar();
  return ellipsoid_stats(lb2 * gn * gn.transpose());
}

RobustnessReport robustness_metric(const RobotModel& model, const RobotState& state,
                                   const ImpactSpec& spec) {
  RobustnessReport report;
  const MatX Jc = contact_jacobian(model, state, spec.contact_frame());
  const MassMatrixFactor factor(mass_matrix(model, state));
  report.gamma = factor.solve(MatX(Jc.transpose()));
  report.lambda_c = report.gamma.transpose() * report.gamma;
  report.h = spec.normal().dot(report.lambda_c * spec.normal());
  report.worst_case_jump_sq = spec.lambda_bar() * spec.lambda_bar() * report.h;
  return report;
}

double impact_metric(const RobotModel& model, const RobotState& state, const ImpactSpec& spec) {
  const MatX Jc = contact_jacobian(model, state, spec.contact_frame());
  const MassMatrixFactor factor(mass_matrix(model, state));
  return factor.solve(VecX(Jc.transpose() * spec.normal())).squaredNorm();
}

double inverse_effective_mass(const RobotModel& model, const RobotState& state,
                              const ImpactSpec& spec) {
  const MatX Jc = contact_jacobian(model, state, spec.contact_frame());
  const MassMatrixFactor factor(mass_matrix(model, state));
  const VecX jn = Jc.transpose() * spec.normal();
  return jn.dot(factor.solve(jn));
}

double gradient_step(const RobotState& state, int tangent_index) {
  double coord = 1.0;
  if (state.floating()) {
    if (tangent_index < 3) {
      coord = state.base_position(tangent_index);
    } else if (tangent_index >= 6) {
      coord = state.q_joints(tangent_index - 6);
    }
  } else {
    coord = state.q_joints(tangent_index);
  }
  return 1e-6 * std::max(1.0, std::abs(coord));
}

VecX tangent_gradient(const RobotState& state, const DofMask& mask,
                      const std::function<double(const RobotState&)>& f) {
  const auto n = static_cast<Eigen::Index>(state.nu.size());
  if (static_cast<Eigen::Index>(mask.size()) != n) {
    throw DimensionMismatch("gradient mask size does not match the tangent dimension");
  }
  VecX grad = VecX::Zero(n);
  VecX delta = VecX::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double h = gradient_step(state, static_cast<int>(i));
    delta(i) = h;
    const double plus = f(retract(state, delta));
    delta(i) = -h;
    const double minus = f(retract(state, delta));
    delta(i) = 0.0;
    grad(i) = (plus - minus) / (2.0 * h);
  }
  return grad;
}

VecX metric_gradient(const RobotModel& model, const RobotState& state, const ImpactSpec& spec,
                     const DofMask& mask) {
  return tangent_gradient(state, mask,
                          [&](const RobotState& s) { return impact_metric(model, s, spec); });
}

VecX metric_gradient(const RobotModel& model, const RobotState& state, const ImpactSpec& spec) {
  return metric_gradient(model, state, spec, joints_only_mask(model));
}

VecX frobenius_gradient(const RobotModel& model, const RobotState& state,
                        const std::string& contact_frame, const WrenchUncertainty& unc,
                        const DofMask& mask, const ContactRows& rows) {
  const MatX W = unc.kernel(rows);
  return tangent_gradient(state, mask, [&](const RobotState& s) {
    const MatX gamma = sensitivity_matrix(model, s, contact_frame, rows);
    return (gamma * W * gamma.transpose()).norm();
  });
}

ImpactJump impact_velocity_jump(const RobotModel& model, const RobotState& state,
                                const ImpactSpec& spec, double lambda) {
  if (!std::isfinite(lambda)) throw NonFiniteInput("impulse magnitude is not finite");
  ImpactJump jump;
  jump.bound_violated = std::abs(lambda) > spec.lambda_bar();
  if (jump.bound_violated) {
    log::warn("impulse {} exceeds bound lambda_bar = {}", lambda, spec.lambda_bar());
  }
  const MatX gamma = sensitivity_matrix(model, state, spec.contact_frame());
  jump.delta_nu = gamma * spec.normal() * lambda;
  jump.after = state;
  jump.after.nu = state.nu + jump.delta_nu;
  return jump;
}

}  // namespace irwbc
