#pragma once

#include <bitset>
#include <optional>
#include <string>
#include <string_view>

#include "irwbc/rbd/dynamics.hpp"
#include "irwbc/sensitivity.hpp"

namespace irwbc {

/// PD gains per task axis. `weight` is used in weighted mode and for cost
/// tasks in hierarchical mode; `priority` (1 highest) only in hierarchical
/// mode.
struct TaskGains {
  VecX kp;
  VecX kd;
  double weight = 1.0;
  int priority = 3;
};

enum class TaskKind { ReducedAttitude, EePose, PostureNominal, PostureImpactRobust, JointSpace };

std::string_view to_string(TaskKind kind);

/// Reference for an end-effector pose task. Twist and acceleration are
/// [linear; angular], world-aligned.
struct PoseTarget {
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  Vec6 twist = Vec6::Zero();
  Vec6 acceleration = Vec6::Zero();
};

/// Joint-space reference; qd and qdd may be left empty (zero).
struct JointTarget {
  VecX q;
  VecX qd;
  VecX qdd;
};

/// Which scalar the impact-robust posture descends: the directional metric
/// H(q) = n^T Lambda_c n, or the Frobenius norm of the wrench ellipsoid.
enum class RobustCriterion { Directional, Frobenius };

struct Task {
  std::string name;
  TaskKind kind = TaskKind::PostureNominal;
  /// ee_pose: controlled frame. reduced_attitude: defaults to the base link.
  std::string frame;
  /// ee_pose rows kept, [x y z rx ry rz].
  std::bitset<6> axes{0b111111};
  PoseTarget pose_target;
  /// reduced_attitude: desired body z-axis in world.
  Vec3 z_desired = Vec3::UnitZ();
  JointTarget joint_target;
  TaskGains gains;
  std::optional<ImpactSpec> impact_spec;  ///< posture_impact_robust only
  VecX k_gradient;                        ///< diagonal of K, one entry per joint
  RobustCriterion criterion = RobustCriterion::Directional;
  std::optional<WrenchUncertainty> wrench_uncertainty;  ///< Frobenius criterion
  bool active = true;

  /// Task-space dimension.
  int dimension(const RobotModel& model) const;
  /// Throws ValidationError if fields required by `kind` are missing or
  /// inconsistent with the model.
  void validate(const RobotModel& model) const;
};

/// Jacobian rows, drift term and desired task acceleration
/// y** = y_des'' + Kp e_p + Kd e_v.
struct TaskReference {
  MatX jacobian;
  VecX jdot_nu;
  VecX desired;
  VecX position_error;
  VecX velocity_error;
};

/// Task reference. For posture_impact_robust, `gradient_on` selects whether
/// the -K grad H term is added (activation gate).
TaskReference task_reference(const Task& task, const RobotModel& model, const RobotState& state,
                             bool gradient_on = true);

/// x,y components of theta * unit(b3 x z_des), theta = atan2(|b3 x z|, b3.z).
/// Throws UndefinedShortestRotation when b3 = -z_des.
Eigen::Vector2d reduced_attitude_error(const Mat3& base_rotation, const Vec3& z_desired);

/// 0.5 [R^T R_ref - R_ref^T R]_vee, expressed in the body frame of R.
Vec3 orientation_error(const Mat3& rotation, const Mat3& reference);

/// Desired joint acceleration of a posture task (length n_j).
/// Nominal: Kp (q_des - q) - Kd qdot. Impact-robust: nominal - K grad H.
VecX posture_reference(const Task& task, const RobotModel& model, const RobotState& state,
                       bool gradient_on = true);

/// Joint part of the robustness gradient used by an impact-robust task.
VecX posture_gradient(const Task& task, const RobotModel& model, const RobotState& state);

/// Weighted, optionally damped, pseudo-inverse resolution
///   nu_dot = J_W^+ rhs + (I - J_W^+ J) nu_dot_null,
///   J_W^+ = W^-1 J^T (J W^-1 J^T + delta^2 I)^-1.
struct Resolution {
  VecX nu_dot;
  MatX pseudo_inverse;
  MatX projector;
  bool damped = false;
};

/// delta = 1e-6 engages when the smallest singular value of J W^-1 J^T is
/// below 1e-8. Throws SingularWeight if W is not positive definite.
Resolution redundancy_resolve(const MatX& jacobian, const VecX& task_rhs, const VecX& nu_dot_null,
                              const MatX& weight);

/// Resolves `primary` (rhs = y** - Jdot nu) against a null-space acceleration.
Resolution redundancy_resolve(const RobotModel& model, const RobotState& state, const Task& primary,
                              const VecX& nu_dot_null, const MatX& weight);

}  // namespace irwbc
