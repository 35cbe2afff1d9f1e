#include "irwbc/rbd/dynamics.hpp"

#include <cmath>

#include "irwbc/errors.hpp"

namespace irwbc {

namespace {

// One sweep from the roots outward. Spatial vectors are world-frame,
// origin-referenced, [angular; linear].
struct KinematicPass {
  std::vector<Eigen::Isometry3d> pose;
  std::vector<Vec6> velocity;
  std::vector<Vec6> acceleration;
  Mat6X motion;  // 6 x n, one column per generalized velocity coordinate
};

KinematicPass forward_pass(const RobotModel& model, const RobotState& state,
                           const VecX* nu_dot, const Vec6& root_acceleration) {
  const auto& links = model.links();
  const auto& joints = model.joints();
  const int num_links = static_cast<int>(links.size());

  KinematicPass pass;
  pass.pose.assign(num_links, Eigen::Isometry3d::Identity());
  pass.velocity.assign(num_links, Vec6::Zero());
  pass.acceleration.assign(num_links, root_acceleration);
  pass.motion = Mat6X::Zero(6, model.nv());

  const int offset = model.joint_offset();
  for (int l : model.topological_order()) {
    const int j = links[l].parent_joint;
    if (j < 0) continue;  // welded to world
    const Joint& joint = joints[j];
    const int p = joint.parent_link;
    const Eigen::Isometry3d parent_pose =
        p >= 0 ? pass.pose[p] : Eigen::Isometry3d::Identity();
    const Vec6 parent_vel = p >= 0 ? pass.velocity[p] : Vec6::Zero();
    const Vec6 parent_acc = p >= 0 ? pass.acceleration[p] : root_acceleration;
    const int idx = joint.velocity_index;

    if (joint.kind == JointKind::FreeBase) {
      Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
      pose.linear() = state.base_orientation.toRotationMatrix();
      pose.translation() = state.base_position;
      pass.pose[l] = pose;
      Eigen::Matrix<double, 6, 6> S = Eigen::Matrix<double, 6, 6>::Zero();
      S.topRightCorner<3, 3>() = Mat3::Identity();
      S.bottomLeftCorner<3, 3>() = Mat3::Identity();
      S.bottomRightCorner<3, 3>() = skew(state.base_position);
      pass.motion.middleCols<6>(idx) = S;
      const Vec3 v = state.nu.head<3>();
      const Vec3 w = state.nu.segment<3>(3);
      pass.velocity[l] = S * state.nu.head<6>();
      Vec6 bias = Vec6::Zero();
      bias.tail<3>() = v.cross(w);
      Vec6 acc = parent_acc + bias;
      if (nu_dot) acc += S * nu_dot->head<6>();
      pass.acceleration[l] = acc;
      continue;
    }

    const Eigen::Isometry3d joint_frame = parent_pose * joint.parent_transform;
    const double q = state.q_joints(idx - offset);
    const double qd = state.nu(idx);
    const Vec3 axis = joint_frame.linear() * joint.axis;
    Vec6 s;
    Eigen::Isometry3d motion = Eigen::Isometry3d::Identity();
    if (joint.kind == JointKind::Revolute) {
      motion.linear() = Eigen::AngleAxisd(q, joint.axis).toRotationMatrix();
      s.head<3>() = axis;
      s.tail<3>() = joint_frame.translation().cross(axis);
    } else {
      motion.translation() = joint.axis * q;
      s.head<3>().setZero();
      s.tail<3>() = axis;
    }
    pass.pose[l] = joint_frame * motion;
    pass.motion.col(idx) = s;
    pass.velocity[l] = parent_vel + s * qd;
    Vec6 acc = parent_acc + spatial::cross_motion(parent_vel, s * qd);
    if (nu_dot) acc += s * (*nu_dot)(idx);
    pass.acceleration[l] = acc;
  }
  return pass;
}

Vec6 gravity_root_acceleration(const RobotModel& model) {
  Vec6 a = Vec6::Zero();
  a.tail<3>() = -model.gravity();
  return a;
}

Mat6 link_inertia_world(const SpatialInertia& in, const Eigen::Isometry3d& pose) {
  const Mat3 R = pose.linear();
  return spatial::inertia_at_origin(in.mass, pose * in.com, R * in.inertia_about_com() * R.transpose());
}

VecX rnea(const RobotModel& model, const RobotState& state, const VecX* nu_dot) {
  const auto& links = model.links();
  const auto& joints = model.joints();
  const auto pass = forward_pass(model, state, nu_dot, gravity_root_acceleration(model));

  std::vector<Vec6> force(links.size(), Vec6::Zero());
  for (int l : model.topological_order()) {
    const Mat6 I = link_inertia_world(links[l].inertia, pass.pose[l]);
    force[l] = I * pass.acceleration[l] + spatial::cross_force(pass.velocity[l], I * pass.velocity[l]);
  }

  VecX tau = VecX::Zero(model.nv());
  const auto& order = model.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int l = *it;
    const int j = links[l].parent_joint;
    if (j < 0) continue;
    const Joint& joint = joints[j];
    const int dof = joint.dof();
    tau.segment(joint.velocity_index, dof) =
        pass.motion.middleCols(joint.velocity_index, dof).transpose() * force[l];
    if (joint.parent_link >= 0) force[joint.parent_link] += force[l];
  }
  return tau;
}

void require_finite(const Eigen::Ref<const VecX>& v, const char* what) {
  if (!v.allFinite()) throw NonFiniteInput(std::string(what) + " contains non-finite values");
}

}  // namespace

MatX mass_matrix(const RobotModel& model, const RobotState& state) {
  check_state(model, state);
  const auto& links = model.links();
  const auto& joints = model.joints();
  const auto pass = forward_pass(model, state, nullptr, Vec6::Zero());

  std::vector<Mat6> composite(links.size());
  for (std::size_t l = 0; l < links.size(); ++l) {
    composite[l] = link_inertia_world(links[l].inertia, pass.pose[l]);
  }
  const auto& order = model.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int j = links[*it].parent_joint;
    if (j >= 0 && joints[j].parent_link >= 0) composite[joints[j].parent_link] += composite[*it];
  }

  MatX M = MatX::Zero(model.nv(), model.nv());
  for (int l : order) {
    const int j = links[l].parent_joint;
    if (j < 0) continue;
    const Joint& joint = joints[j];
    const int dof = joint.dof();
    const int idx = joint.velocity_index;
    const Mat6X F = composite[l] * pass.motion.middleCols(idx, dof);
    for (int k : model.support(l)) {
      const Joint& anc = joints[k];
      const MatX block = pass.motion.middleCols(anc.velocity_index, anc.dof()).transpose() * F;
      M.block(anc.velocity_index, idx, anc.dof(), dof) = block;
      if (k != j) M.block(idx, anc.velocity_index, dof, anc.dof()) = block.transpose();
    }
  }
  return M;
}

VecX bias_forces(const RobotModel& model, const RobotState& state) {
  check_state(model, state);
  return rnea(model, state, nullptr);
}

VecX inverse_dynamics(const RobotModel& model, const RobotState& state,
                      const Eigen::Ref<const VecX>& nu_dot) {
  check_state(model, state);
  if (nu_dot.size() != model.nv()) throw DimensionMismatch("inverse_dynamics: nu_dot has wrong size");
  const VecX acc = nu_dot;
  return rnea(model, state, &acc);
}

MassMatrixFactor::MassMatrixFactor(const MatX& mass) : mass_(mass) {
  if (!mass_.allFinite()) throw SingularMassMatrix("mass matrix has non-finite entries");
  Eigen::SelfAdjointEigenSolver<MatX> eig(mass_, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    throw SingularMassMatrix("mass matrix is singular or ill-conditioned (eigenvalues " +
                             std::to_string(lo) + " .. " + std::to_string(hi) + ")");
  }
  llt_.compute(mass_);
  if (llt_.info() != Eigen::Success) throw SingularMassMatrix("mass matrix Cholesky failed");
}

VecX forward_dynamics(const RobotModel& model, const RobotState& state,
                      const Eigen::Ref<const VecX>& u, const std::vector<ExternalWrench>& f_ext) {
  check_state(model, state);
  if (u.size() != model.num_inputs()) throw DimensionMismatch("forward_dynamics: u has wrong size");
  require_finite(u, "input u");
  VecX rhs = model.actuation() * u - bias_forces(model, state);
  for (const auto& w : f_ext) {
    require_finite(w.wrench, "external wrench");
    rhs += frame_kinematics(model, state, w.frame).jacobian.transpose() * w.wrench;
  }
  const MassMatrixFactor factor(mass_matrix(model, state));
  return factor.solve(rhs);
}

FrameKinematics frame_kinematics(const RobotModel& model, const RobotState& state,
                                 const std::string& frame_name) {
  check_state(model, state);
  const Frame frame = model.frame(frame_name);
  const auto pass = forward_pass(model, state, nullptr, Vec6::Zero());
  const int l = frame.link;

  FrameKinematics out;
  out.pose = pass.pose[l] * frame.offset;
  const Vec3 p = out.pose.translation();
  out.jacobian = Mat6X::Zero(6, model.nv());
  for (int k : model.support(l)) {
    const Joint& joint = model.joints()[k];
    for (int c = 0; c < joint.dof(); ++c) {
      const int col = joint.velocity_index + c;
      const Vec6 s = pass.motion.col(col);
      out.jacobian.block<3, 1>(0, col) = s.tail<3>() + s.head<3>().cross(p);
      out.jacobian.block<3, 1>(3, col) = s.head<3>();
    }
  }
  out.twist = out.jacobian * state.nu;

  const Vec3 w = pass.velocity[l].head<3>();
  const Vec3 p_dot = out.twist.head<3>();
  const Vec3 alpha = pass.acceleration[l].head<3>();
  const Vec3 a_origin = pass.acceleration[l].tail<3>();
  out.jdot_nu.head<3>() = a_origin + alpha.cross(p) + w.cross(p_dot);
  out.jdot_nu.tail<3>() = alpha;
  return out;
}

RobotState integrate_state(const RobotState& state, const Eigen::Ref<const VecX>& nu_dot,
                           double dt) {
  if (!std::isfinite(dt) || !(dt > 0.0)) throw NonFiniteInput("integration step must be positive and finite");
  if (nu_dot.size() != state.nu.size()) throw DimensionMismatch("integrate_state: nu_dot has wrong size");
  require_finite(nu_dot, "nu_dot");
  require_finite(state.nu, "nu");
  require_finite(state.q_joints, "q_joints");

  RobotState out = state;
  out.nu = state.nu + nu_dot * dt;
  if (state.floating()) {
    out.base_position = state.base_position + out.nu.head<3>() * dt;
    out.base_orientation = (quat_exp(out.nu.segment<3>(3) * dt) * state.base_orientation).normalized();
    out.q_joints = state.q_joints + out.nu.tail(state.q_joints.size()) * dt;
  } else {
    out.q_joints = state.q_joints + out.nu * dt;
  }
  return out;
}

double kinetic_energy(const RobotModel& model, const RobotState& state) {
  return 0.5 * state.nu.dot(mass_matrix(model, state) * state.nu);
}

double potential_energy(const RobotModel& model, const RobotState& state) {
  check_state(model, state);
  const auto pass = forward_pass(model, state, nullptr, Vec6::Zero());
  double V = 0.0;
  for (std::size_t l = 0; l < model.links().size(); ++l) {
    const auto& in = model.links()[l].inertia;
    V -= in.mass * model.gravity().dot(pass.pose[l] * in.com);
  }
  return V;
}

}  // namespace irwbc
