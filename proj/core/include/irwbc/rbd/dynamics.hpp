#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irwbc/rbd/model.hpp"

namespace irwbc {

/// World-aligned kinematics of a named frame. Twist, Jacobian rows and
/// jdot_nu are ordered [linear; angular] and refer to the frame origin.
struct FrameKinematics {
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  Vec6 twist = Vec6::Zero();
  Mat6X jacobian;
  Vec6 jdot_nu = Vec6::Zero();
};

/// External wrench [force; moment] applied at the origin of a frame,
/// world-aligned.
struct ExternalWrench {
  std::string frame;
  Vec6 wrench = Vec6::Zero();
};

/// Joint-space inertia matrix via the composite-rigid-body algorithm.
MatX mass_matrix(const RobotModel& model, const RobotState& state);

/// Coriolis, centrifugal and gravity terms h(q, nu), via recursive
/// Newton-Euler with zero acceleration.
VecX bias_forces(const RobotModel& model, const RobotState& state);

/// tau = M(q) nu_dot + h(q, nu), recursive Newton-Euler.
VecX inverse_dynamics(const RobotModel& model, const RobotState& state,
                      const Eigen::Ref<const VecX>& nu_dot);

/// nu_dot = M^-1 (G u + sum J^T w - h). Throws SingularMassMatrix when the
/// condition estimate of M exceeds 1e12.
VecX forward_dynamics(const RobotModel& model, const RobotState& state,
                      const Eigen::Ref<const VecX>& u,
                      const std::vector<ExternalWrench>& f_ext = {});

FrameKinematics frame_kinematics(const RobotModel& model, const RobotState& state,
                                 const std::string& frame);

/// Semi-implicit Euler step. Joint and base positions use the updated
/// velocity; the base quaternion is advanced by exp(w dt) and renormalized.
RobotState integrate_state(const RobotState& state, const Eigen::Ref<const VecX>& nu_dot,
                           double dt);

/// Kinetic energy 0.5 nu^T M nu.
double kinetic_energy(const RobotModel& model, const RobotState& state);

/// Gravitational potential energy sum(-m g . c).
double potential_energy(const RobotModel& model, const RobotState& state);

/// Cholesky factor of M with the conditioning guard used by every routine
/// that needs M^-1.
class MassMatrixFactor {
 public:
  explicit MassMatrixFactor(const MatX& mass);
  template <typename Derived>
  typename Derived::PlainObject solve(const Eigen::MatrixBase<Derived>& rhs) const {
    return llt_.solve(rhs);
  }
  const MatX& matrix() const { return mass_; }

  static constexpr double kMaxCondition = 1e12;

 private:
  MatX mass_;
  Eigen::LLT<MatX> llt_;
};

}  // namespace irwbc
