#include "irwbc/control/task.hpp"

#include <cmath>

#include "irwbc/errors.hpp"

namespace irwbc {

namespace {

constexpr double kDampingThreshold = 1e-8;
constexpr double kDamping = 1e-6;

VecX or_zero(const VecX& v, Eigen::Index n) { return v.size() == n ? v : VecX::Zero(n); }

MatX joint_selector(const RobotModel& model) {
  MatX S = MatX::Zero(model.num_joint_coords(), model.nv());
  S.rightCols(model.num_joint_coords()).setIdentity();
  return S;
}

std::string base_frame(const Task& task, const RobotModel& model) {
  if (!task.frame.empty()) return task.frame;
  return model.links()[model.base_link()].name;
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::ReducedAttitude:
      return "reduced_attitude";
    case TaskKind::EePose:
      return "ee_pose";
    case TaskKind::PostureNominal:
      return "posture_nominal";
    case TaskKind::PostureImpactRobust:
      return "posture_impact_robust";
    case TaskKind::JointSpace:
      return "joint_space";
  }
  return "unknown";
}

int Task::dimension(const RobotModel& model) const {
  switch (kind) {
    case TaskKind::ReducedAttitude:
      return 2;
    case TaskKind::EePose:
      return static_cast<int>(axes.count());
    default:
      return model.num_joint_coords();
  }
}

void Task::validate(const RobotModel& model) const {
  const std::string what = "task '" + name + "'";
  const int dim = dimension(model);
  const int gain_dim = kind == TaskKind::EePose ? 6 : dim;
  if (gains.kp.size() != gain_dim || gains.kd.size() != gain_dim) {
    throw ValidationError(what + ": kp and kd need " + std::to_string(gain_dim) + " entries");
  }
  if ((gains.kp.array() < 0.0).any() || (gains.kd.array() < 0.0).any()) {
    throw ValidationError(what + ": gains must be non-negative");
  }
  if (!(gains.weight >= 0.0)) throw ValidationError(what + ": weight must be non-negative");
  if (gains.priority < 1 || gains.priority > 3) {
    throw ValidationError(what + ": priority must be 1, 2 or 3");
  }
  switch (kind) {
    case TaskKind::ReducedAttitude:
      if (!model.floating_base()) {
        throw ValidationError(what + ": reduced_attitude requires a floating-base model");
      }
      if (!frame.empty() && !model.has_frame(frame)) throw UnknownFrame(frame);
      if (z_desired.norm() < 1e-12) throw ValidationError(what + ": desired axis is degenerate");
      break;
    case TaskKind::EePose:
      if (!model.has_frame(frame)) throw UnknownFrame(frame);
      if (axes.none()) throw ValidationError(what + ": no axes selected");
      break;
    case TaskKind::PostureImpactRobust:
      if (!impact_spec) throw ValidationError(what + ": impact-robust posture needs an impact spec");
      if (!model.has_frame(impact_spec->contact_frame())) {
        throw UnknownFrame(impact_spec->contact_frame());
      }
      if (k_gradient.size() != model.num_joint_coords() || (k_gradient.array() < 0.0).any()) {
        throw ValidationError(what + ": k_gradient needs one non-negative entry per joint");
      }
      if (criterion == RobustCriterion::Frobenius && !wrench_uncertainty) {
        throw ValidationError(what + ": Frobenius criterion needs wrench bounds");
      }
      [[fallthrough]];
    case TaskKind::PostureNominal:
    case TaskKind::JointSpace:
      if (joint_target.q.size() != model.num_joint_coords()) {
        throw ValidationError(what + ": joint target needs one entry per joint");
      }
      break;
  }
}

Eigen::Vector2d reduced_attitude_error(const Mat3& base_rotation, const Vec3& z_desired) {
  const Vec3 b3 = base_rotation.col(2);
  const Vec3 zd = z_desired.normalized();
  const Vec3 axis = b3.cross(zd);
  const double s = axis.norm();
  const double c = b3.dot(zd);
  if (s == 0.0) {
    if (c < 0.0) {
      throw UndefinedShortestRotation("body z-axis is antipodal to the desired axis");
    }
    return Eigen::Vector2d::Zero();
  }
  const double theta = std::atan2(s, c);
  return (theta / s * axis).head<2>();
}

Vec3 orientation_error(const Mat3& rotation, const Mat3& reference) {
  return 0.5 * vee(rotation.transpose() * reference - reference.transpose() * rotation);
}

VecX posture_gradient(const Task& task, const RobotModel& model, const RobotState& state) {
  const DofMask mask = joints_only_mask(model);
  VecX grad;
  if (task.criterion == RobustCriterion::Frobenius) {
    grad = frobenius_gradient(model, state, task.impact_spec->contact_frame(),
                              *task.wrench_uncertainty, mask);
  } else {
    grad = metric_gradient(model, state, *task.impact_spec, mask);
  }
  return grad.tail(model.num_joint_coords());
}

VecX posture_reference(const Task& task, const RobotModel& model, const RobotState& state,
                       bool gradient_on) {
  const auto nj = static_cast<Eigen::Index>(model.num_joint_coords());
  const VecX qdot = state.nu.tail(nj);
  VecX ref = task.gains.kp.cwiseProduct(task.joint_target.q - state.q_joints) -
             task.gains.kd.cwiseProduct(qdot);
  if (task.kind == TaskKind::PostureImpactRobust && gradient_on && !task.k_gradient.isZero(0.0)) {
    ref -= task.k_gradient.cwiseProduct(posture_gradient(task, model, state));
  }
  return ref;
}

TaskReference task_reference(const Task& task, const RobotModel& model, const RobotState& state,
                             bool gradient_on) {
  TaskReference ref;
  const auto nj = static_cast<Eigen::Index>(model.num_joint_coords());
  switch (task.kind) {
    case TaskKind::ReducedAttitude: {
      ref.jacobian = MatX::Zero(2, model.nv());
      ref.jacobian(0, 3) = 1.0;
      ref.jacobian(1, 4) = 1.0;
      ref.jdot_nu = VecX::Zero(2);
      const Eigen::Isometry3d pose = frame_kinematics(model, state, base_frame(task, model)).pose;
      ref.position_error = reduced_attitude_error(pose.linear(), task.z_desired);
      ref.velocity_error = -state.nu.segment<2>(3);
      ref.desired = task.gains.kp.cwiseProduct(ref.position_error) +
                    task.gains.kd.cwiseProduct(ref.velocity_error);
      break;
    }
    case TaskKind::EePose: {
      const FrameKinematics fk = frame_kinematics(model, state, task.frame);
      Vec6 pos_err;
      pos_err.head<3>() = task.pose_target.pose.translation() - fk.pose.translation();
      pos_err.tail<3>() =
          fk.pose.linear() * orientation_error(fk.pose.linear(), task.pose_target.pose.linear());
      const Vec6 vel_err = task.pose_target.twist - fk.twist;
      const Vec6 desired = task.pose_target.acceleration + task.gains.kp.cwiseProduct(pos_err) +
                           task.gains.kd.cwiseProduct(vel_err);
      const auto rows = static_cast<Eigen::Index>(task.axes.count());
      ref.jacobian.resize(rows, model.nv());
      ref.jdot_nu.resize(rows);
      ref.desired.resize(rows);
      ref.position_error.resize(rows);
      ref.velocity_error.resize(rows);
      Eigen::Index k = 0;
      for (int r = 0; r < 6; ++r) {
        if (!task.axes.test(r)) continue;
        ref.jacobian.row(k) = fk.jacobian.row(r);
        ref.jdot_nu(k) = fk.jdot_nu(r);
        ref.desired(k) = desired(r);
        ref.position_error(k) = pos_err(r);
        ref.velocity_error(k) = vel_err(r);
        ++k;
      }
      break;
    }
    case TaskKind::PostureNominal:
    case TaskKind::PostureImpactRobust: {
      ref.jacobian = joint_selector(model);
      ref.jdot_nu = VecX::Zero(nj);
      ref.position_error = task.joint_target.q - state.q_joints;
      ref.velocity_error = -state.nu.tail(nj);
      ref.desired = posture_reference(task, model, state, gradient_on);
      break;
    }
    case TaskKind::JointSpace: {
      ref.jacobian = joint_selector(model);
      ref.jdot_nu = VecX::Zero(nj);
      ref.position_error = task.joint_target.q - state.q_joints;
      ref.velocity_error = or_zero(task.joint_target.qd, nj) - state.nu.tail(nj);
      ref.desired = or_zero(task.joint_target.qdd, nj) +
                    task.gains.kp.cwiseProduct(ref.position_error) +
                    task.gains.kd.cwiseProduct(ref.velocity_error);
      break;
    }
  }
  return ref;
}

Resolution redundancy_resolve(const MatX& J, const VecX& task_rhs, const VecX& nu_dot_null,
                              const MatX& weight) {
  const auto n = J.cols();
  if (weight.rows() != n || weight.cols() != n || nu_dot_null.size() != n ||
      task_rhs.size() != J.rows()) {
    throw DimensionMismatch("redundancy_resolve: inconsistent dimensions");
  }
  const Eigen::LLT<MatX> wllt(weight);
  if (wllt.info() != Eigen::Success) throw SingularWeight("weight matrix is not positive definite");

  Resolution res;
  const MatX WinvJt = wllt.solve(MatX(J.transpose()));
  MatX JWJ = J * WinvJt;
  const Eigen::JacobiSVD<MatX> svd(JWJ);
  const double smin = J.rows() > 0 ? svd.singularValues().minCoeff() : 1.0;
  if (smin < kDampingThreshold) {
    res.damped = true;
    JWJ += kDamping * kDamping * MatX::Identity(J.rows(), J.rows());
  }
  res.pseudo_inverse = WinvJt * JWJ.ldlt().solve(MatX::Identity(J.rows(), J.rows()));
  res.projector = MatX::Identity(n, n) - res.pseudo_inverse * J;
  res.nu_dot = res.pseudo_inverse * task_rhs + res.projector * nu_dot_null;
  return res;
}

Resolution redundancy_resolve(const RobotModel& model, const RobotState& state, const Task& primary,
                              const VecX& nu_dot_null, const MatX& weight) {
  const TaskReference ref = task_reference(primary, model, state);
  return redundancy_resolve(ref.jacobian, VecX(ref.desired - ref.jdot_nu), nu_dot_null, weight);
}

}  // namespace irwbc
