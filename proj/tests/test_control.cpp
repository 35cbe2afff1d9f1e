#include <cstring>

#include <doctest.h>

#include "irwbc/errors.hpp"
#include "support.hpp"

using namespace irwbc;
using namespace testing;

namespace {

Task ee_task(const RobotModel& model, const RobotState& s, std::bitset<6> axes, int priority = 1) {
  Task t;
  t.name = "ee";
  t.kind = TaskKind::EePose;
  t.frame = "ee";
  t.axes = axes;
  t.pose_target.pose = frame_kinematics(model, s, "ee").pose;
  t.gains.kp = VecX::Constant(6, 400.0);
  t.gains.kd = VecX::Constant(6, 40.0);
  t.gains.priority = priority;
  return t;
}

Task posture(const RobotModel& model, const VecX& q_des, double weight = 1.0) {
  Task t;
  t.name = "posture";
  t.kind = TaskKind::PostureNominal;
  t.joint_target.q = q_des;
  const auto nj = model.num_joint_coords();
  t.gains.kp = VecX::Constant(nj, 20.0);
  t.gains.kd = VecX::Constant(nj, 10.0);
  t.gains.weight = weight;
  t.gains.priority = 3;
  return t;
}

Task robust(const RobotModel& model, const VecX& q_des, const ImpactSpec& spec, double k) {
  Task t = posture(model, q_des);
  t.kind = TaskKind::PostureImpactRobust;
  t.impact_spec = spec;
  t.k_gradient = VecX::Constant(model.num_joint_coords(), k);
  return t;
}

Task tilt_task(int priority = 1) {
  Task t;
  t.name = "tilt";
  t.kind = TaskKind::ReducedAttitude;
  t.gains.kp = Eigen::Vector2d(30.0, 30.0);
  t.gains.kd = Eigen::Vector2d(8.0, 8.0);
  t.gains.priority = priority;
  return t;
}

const ImpactSpec kWall("ee", Vec3(1.0, 0.0, 1.0).normalized(), 0.5, 0.0);

bool same_bytes(const VecX& a, const VecX& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

double dynamics_residual(const RobotModel& model, const RobotState& s, const ControlOutput& out,
                         const std::vector<ExternalWrench>& f_hat) {
  VecX r = mass_matrix(model, s) * out.nu_dot + bias_forces(model, s) - model.actuation() * out.u;
  for (const auto& w : f_hat) r -= frame_kinematics(model, s, w.frame).jacobian.transpose() * w.wrench;
  return r.cwiseAbs().maxCoeff();
}

Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }

}  // namespace

TEST_CASE("converged ee task has zero desired acceleration") {
  const RobotModel arm = planar_arm();
  RobotState s = RobotState::neutral(arm);
  s.q_joints << 0.3, -0.7, 0.4;
  const Task t = ee_task(arm, s, 0b111111);
  const TaskReference ref = task_reference(t, arm, s);
  CHECK(ref.desired.norm() < 1e-12);
  CHECK(ref.position_error.norm() < 1e-12);
}

TEST_CASE("reduced attitude error") {
  CHECK(reduced_attitude_error(Mat3::Identity(), Vec3::UnitZ()).norm() == 0.0);

  // Rolled by 30 degrees about x; the shortest rotation back is -30 degrees
  // about x.
  const Eigen::Vector2d e = reduced_attitude_error(rot_x(M_PI / 6), Vec3::UnitZ());
  const Eigen::AngleAxisd back(rot_x(-M_PI / 6));
  const Vec3 expect = back.angle() * back.axis();
  CHECK(e.norm() == doctest::Approx(M_PI / 6).epsilon(1e-14));
  CHECK((e - expect.head<2>()).norm() < 1e-14);

  CHECK_THROWS_AS(reduced_attitude_error(Vec3(1, -1, -1).asDiagonal(), Vec3::UnitZ()), UndefinedShortestRotation);

  const RobotModel fl = floating_arm();
  RobotState s = RobotState::neutral(fl);
  s.nu.segment<3>(3) = Vec3(0.4, -0.2, 0.9);
  const Task t = tilt_task();
  const TaskReference ref = task_reference(t, fl, s);
  CHECK(ref.position_error.norm() == 0.0);
  CHECK((ref.desired - Eigen::Vector2d(-8.0 * 0.4, 8.0 * 0.2)).norm() < 1e-15);
}

TEST_CASE("orientation error of a small roll") {
  const double a = 0.2;
  const Vec3 e = orientation_error(Mat3::Identity(), rot_x(a));
  CHECK((e - Vec3(std::sin(a), 0, 0)).norm() < 1e-15);
  CHECK(orientation_error(rot_x(a), rot_x(a)).norm() < 1e-15);
}

TEST_CASE("redundancy resolution examples") {
  MatX J(1, 2);
  J << 1, 0;
  const Resolution r = redundancy_resolve(J, VecX::Constant(1, 1.0), Eigen::Vector2d(0, 7), MatX::Identity(2, 2));
  CHECK((r.nu_dot - Eigen::Vector2d(1, 7)).norm() < 1e-15);
  CHECK_FALSE(r.damped);

  const Resolution pure = redundancy_resolve(J, VecX::Constant(1, 3.0), VecX::Zero(2), MatX::Identity(2, 2));
  CHECK((pure.nu_dot - pure.pseudo_inverse * VecX::Constant(1, 3.0)).norm() == 0.0);

  CHECK_THROWS_AS(redundancy_resolve(J, VecX::Constant(1, 1.0), VecX::Zero(2), -MatX::Identity(2, 2)),
                  SingularWeight);

  MatX rank1(2, 2);
  rank1 << 1, 0, 1, 0;
  CHECK(redundancy_resolve(rank1, VecX::Ones(2), VecX::Zero(2), MatX::Identity(2, 2)).damped);
}

TEST_CASE("projector identities on random Jacobians") {
  std::mt19937 rng(4);
  const MatX W = Eigen::Vector4d(1, 2, 3, 4).asDiagonal();
  for (int trial = 0; trial < 500; ++trial) {
    MatX J(2, 4);
    J.row(0) = random_vector(4, rng).transpose();
    J.row(1) = random_vector(4, rng).transpose();
    const VecX rhs = random_vector(2, rng);
    const Resolution r = redundancy_resolve(J, rhs, random_vector(4, rng), W);
    REQUIRE_FALSE(r.damped);
    const double scale = std::max(1.0, r.projector.norm());
    CHECK((r.projector * r.projector - r.projector).cwiseAbs().maxCoeff() < 1e-10 * scale);
    CHECK((J * r.projector).cwiseAbs().maxCoeff() < 1e-10 * scale);
    CHECK((J * r.nu_dot - rhs).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, r.nu_dot.norm()));
  }
}

TEST_CASE("posture references") {
  const RobotModel arm = planar_arm();
  RobotState s = RobotState::neutral(arm);
  s.q_joints << 0.6, -1.1, -0.4;
  CHECK(posture_reference(posture(arm, s.q_joints), arm, s).norm() == 0.0);

  s.nu << 0.3, -0.2, 0.1;
  const VecX q_des = Eigen::Vector3d(0.5, -1.0, -0.6);
  const VecX nominal = posture_reference(posture(arm, q_des), arm, s);
  CHECK(same_bytes(posture_reference(robust(arm, q_des, kWall, 0.0), arm, s), nominal));

  const VecX two = posture_reference(robust(arm, q_des, kWall, 2.0), arm, s);
  const VecX grad = metric_gradient(arm, s, kWall);
  CHECK((two - (nominal - 2.0 * grad)).norm() < 1e-12 * std::max(1.0, two.norm()));
  CHECK(same_bytes(posture_reference(robust(arm, q_des, kWall, 2.0), arm, s, false), nominal));

  Task frob = robust(arm, q_des, kWall, 1.5);
  frob.criterion = RobustCriterion::Frobenius;
  frob.wrench_uncertainty = WrenchUncertainty((Vec6() << 1, 1, 2, 0, 0, 0).finished());
  const VecX fg = frobenius_gradient(arm, s, "ee", *frob.wrench_uncertainty, joints_only_mask(arm));
  CHECK((posture_reference(frob, arm, s) - (nominal - 1.5 * fg)).norm() < 1e-12 * std::max(1.0, fg.norm()));
}

TEST_CASE("controller configuration validation") {
  const RobotModel fl = floating_arm();
  ControllerConfig cfg;
  cfg.tasks = {tilt_task(1), tilt_task(2)};
  CHECK_THROWS_AS(cfg.validate(fl), ValidationError);

  const RobotState s = RobotState::neutral(fl);
  cfg.tasks = {tilt_task(1), ee_task(fl, s, 0b000111, 1)};
  CHECK_THROWS_AS(cfg.validate(fl), ValidationError);
  cfg.mode = ControlMode::Weighted;
  CHECK_NOTHROW(cfg.validate(fl));

  cfg.u_lower = VecX::Zero(2);
  CHECK_THROWS_AS(cfg.validate(fl), ValidationError);

  Task broken = posture(fl, VecX::Zero(2));
  cfg = {};
  cfg.tasks = {broken};
  CHECK_THROWS_AS(cfg.validate(fl), ValidationError);

  const RobotModel arm = planar_arm();
  cfg = {};
  cfg.tasks = {tilt_task()};
  CHECK_THROWS_AS(cfg.validate(arm), ValidationError);
}

TEST_CASE("weighted joint-space task on a pendulum") {
  const RobotModel p = pendulum();
  RobotState s = RobotState::neutral(p);
  s.q_joints(0) = 0.4;
  s.nu(0) = -0.3;
  Task t;
  t.name = "joint";
  t.kind = TaskKind::JointSpace;
  t.joint_target.q = s.q_joints;
  t.joint_target.qdd = VecX::Constant(1, 2.0);
  t.gains.kp = VecX::Zero(1);
  t.gains.kd = VecX::Zero(1);
  ControllerConfig cfg;
  cfg.mode = ControlMode::Weighted;
  cfg.tasks = {t};
  const ControlOutput out = controller_step(cfg, p, s, {});
  CHECK(out.qp_status == QpStatus::Optimal);
  CHECK(out.nu_dot(0) == doctest::Approx(2.0).epsilon(1e-8));
  const double u = mass_matrix(p, s)(0, 0) * 2.0 + bias_forces(p, s)(0);
  CHECK(std::abs(out.u(0) - u) < 1e-8);
  CHECK(out.task_residuals[0] < 1e-8);
  CHECK_FALSE(out.h_value);
}

TEST_CASE("no tasks gives the minimum-norm dynamics solution") {
  const RobotModel arm = planar_arm();
  std::mt19937 rng(6);
  const RobotState s = random_state(arm, rng);
  ControllerConfig cfg;
  cfg.mode = ControlMode::Weighted;
  const ControlOutput out = controller_step(cfg, arm, s, {});
  MatX A(3, 6);
  A.leftCols(3) = mass_matrix(arm, s);
  A.rightCols(3) = -arm.actuation();
  const VecX z = A.completeOrthogonalDecomposition().solve(VecX(-bias_forces(arm, s)));
  VecX got(6);
  got << out.nu_dot, out.u;
  CHECK((got - z).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, z.norm()));
}

TEST_CASE("hierarchical solve matches the closed-form resolution") {
  const RobotModel arm = planar_arm();
  std::mt19937 rng(12);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const RobotState s = random_state(arm, rng);
    Task ee = ee_task(arm, s, 0b000101);
    ee.pose_target.pose.translation() += Vec3(random_vector(3, rng, 0.05));
    ee.pose_target.twist = random_vector(6, rng, 0.2);
    const Task post = posture(arm, random_vector(3, rng), 0.7);
    ControllerConfig cfg;
    cfg.tasks = {ee, post};
    const ControlOutput out = controller_step(cfg, arm, s, {});
    REQUIRE(out.qp_status == QpStatus::Optimal);
    const VecX null = posture_reference(post, arm, s);
    const Resolution closed = redundancy_resolve(arm, s, ee, null, MatX::Identity(3, 3));
    REQUIRE_FALSE(closed.damped);
    const double err = (out.nu_dot - closed.nu_dot).cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
    CHECK(err < 1e-8);
  }
  MESSAGE("worst closed-form deviation " << worst);
}

TEST_CASE("tilt and ee equalities on the floating arm") {
  const RobotModel fl = floating_arm();
  std::mt19937 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    RobotState s = random_state(fl, rng, 0.3);
    s.base_orientation = Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Vec3(random_vector(3, rng)).normalized()));
    Task ee = ee_task(fl, s, 0b100111, 2);
    ee.pose_target.pose.translation() += Vec3(random_vector(3, rng, 0.02));
    ControllerConfig cfg;
    cfg.tasks = {tilt_task(1), ee, robust(fl, s.q_joints, kWall, 0.1)};
    const std::vector<ExternalWrench> f_hat{{"ee", (Vec6() << 0, 0, 3.0, 0, 0, 0).finished()}};
    const ControlOutput out = controller_step(cfg, fl, s, f_hat);
    REQUIRE(out.qp_status == QpStatus::Optimal);
    CHECK_FALSE(out.fallback_used);
    CHECK(out.task_residuals[0] < 1e-8);
    CHECK(dynamics_residual(fl, s, out, f_hat) < 1e-8);
    // With the tilt met, the projected ee rows reduce to the plain task.
    CHECK(out.task_residuals[1] < 1e-7);
    REQUIRE(out.h_value);
    CHECK(*out.h_value == doctest::Approx(impact_metric(fl, s, kWall)));
  }
}

TEST_CASE("equilibrium keeps the arm still") {
  const RobotModel arm = planar_arm();
  RobotState s = RobotState::neutral(arm);
  s.q_joints << 0.5, -1.2, 0.3;
  ControllerConfig cfg;
  cfg.tasks = {ee_task(arm, s, 0b000101), posture(arm, s.q_joints)};
  const ControlOutput out = controller_step(cfg, arm, s, {});
  CHECK(out.nu_dot.cwiseAbs().maxCoeff() < 1e-8);
  CHECK((out.u - bias_forces(arm, s)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("input bounds are enforced inside the QP") {
  const RobotModel p = pendulum();
  RobotState s = RobotState::neutral(p);
  s.q_joints(0) = M_PI / 2;
  Task t;
  t.name = "joint";
  t.kind = TaskKind::JointSpace;
  t.joint_target.q = s.q_joints;
  t.joint_target.qdd = VecX::Constant(1, 2.0);
  t.gains.kp = VecX::Zero(1);
  t.gains.kd = VecX::Zero(1);
  ControllerConfig cfg;
  cfg.mode = ControlMode::Weighted;
  cfg.tasks = {t};
  cfg.u_lower = VecX::Constant(1, -5.0);
  cfg.u_upper = VecX::Constant(1, 5.0);

  const QpProblem qp = assemble_tsid(cfg, p, s, {});
  const QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.z(1) == 5.0);
  CHECK(sol.bound_multipliers(1) > 0.0);
  CHECK(kkt_residuals(qp, sol).complementarity < 1e-8);

  const ControlOutput out = controller_step(cfg, p, s, {});
  CHECK(out.u(0) == 5.0);
  CHECK(out.nu_dot(0) == doctest::Approx(5.0 - 9.81).epsilon(1e-10));
}

TEST_CASE("infeasible hierarchy falls back, then gives up") {
  const RobotModel arm = planar_arm();
  RobotState s = RobotState::neutral(arm);
  s.q_joints << 0.5, -1.2, 0.3;
  Task ee = ee_task(arm, s, 0b000101);
  ee.pose_target.pose.translation() += Vec3(0.2, 0, 0.1);
  ControllerConfig cfg;
  cfg.tasks = {ee, posture(arm, s.q_joints)};
  cfg.nudot_lower = VecX::Constant(3, -0.1);
  cfg.nudot_upper = VecX::Constant(3, 0.1);
  Controller c(cfg, arm);
  const ControlOutput out = c.step(s, {});
  CHECK(out.fallback_used);
  CHECK(out.qp_status == QpStatus::Optimal);
  CHECK(out.task_residuals[0] > 1.0);
  CHECK(dynamics_residual(arm, s, out, {}) < 1e-8);

  c.config().u_lower = VecX::Zero(3);
  c.config().u_upper = VecX::Zero(3);
  CHECK_THROWS_AS(c.step(s, {}), ControllerInfeasible);
}

TEST_CASE("gate closed or zero gain makes the robust controller nominal") {
  const RobotModel arm = planar_arm();
  std::mt19937 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    RobotState s = random_state(arm, rng, 0.5);
    const Task ee = ee_task(arm, s, 0b000101);
    const VecX q_des = random_vector(3, rng);

    ControllerConfig nominal;
    nominal.tasks = {ee, posture(arm, q_des)};
    ControllerConfig gated = nominal;
    gated.tasks[1] = robust(arm, q_des, kWall, 1.0);
    gated.activation.kind = Activation::Kind::DistanceTrigger;
    gated.activation.frame = "ee";
    gated.activation.plane_normal = Vec3::UnitZ();
    gated.activation.d_act = 0.15;
    const double height = frame_kinematics(arm, s, "ee").pose.translation().z();
    gated.activation.plane_point = Vec3(0, 0, height - 0.5);
    REQUIRE_FALSE(gate_open(gated, arm, s));

    const ControlOutput a = controller_step(nominal, arm, s, {});
    const ControlOutput b = controller_step(gated, arm, s, {});
    CHECK(same_bytes(a.u, b.u));
    CHECK(same_bytes(a.nu_dot, b.nu_dot));
    CHECK_FALSE(b.gate_active);

    ControllerConfig zero = nominal;
    zero.tasks[1] = robust(arm, q_des, kWall, 0.0);
    const ControlOutput c = controller_step(zero, arm, s, {});
    CHECK(same_bytes(a.u, c.u));
    CHECK(same_bytes(a.nu_dot, c.nu_dot));

    gated.activation.plane_point = Vec3(0, 0, height - 0.1);
    CHECK(gate_open(gated, arm, s));
    const ControlOutput d = controller_step(gated, arm, s, {});
    CHECK(d.gate_active);
    CHECK((d.nu_dot - a.nu_dot).norm() > 0.0);
  }
}

TEST_CASE("scaling all weights leaves the weighted optimum unchanged") {
  const RobotModel arm = planar_arm();
  std::mt19937 rng(23);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const RobotState s = random_state(arm, rng);
    Task ee = ee_task(arm, s, 0b000101);
    ee.pose_target.pose.translation() += Vec3(random_vector(3, rng, 0.05));
    ee.gains.weight = 10.0;
    ControllerConfig cfg;
    cfg.mode = ControlMode::Weighted;
    cfg.tasks = {ee, robust(arm, random_vector(3, rng), kWall, 0.3)};
    cfg.u_lower = VecX::Constant(3, -8.0);
    cfg.u_upper = VecX::Constant(3, 8.0);
    const ControlOutput base = controller_step(cfg, arm, s, {});
    for (double c : {0.01, 7.3, 1e3}) {
      ControllerConfig scaled = cfg;
      for (auto& t : scaled.tasks) t.gains.weight *= c;
      const ControlOutput out = controller_step(scaled, arm, s, {});
      const double err = std::max((out.nu_dot - base.nu_dot).cwiseAbs().maxCoeff(),
                                  (out.u - base.u).cwiseAbs().maxCoeff());
      worst = std::max(worst, err);
      CHECK(err < 1e-9);
    }
  }
  MESSAGE("worst weight-scaling deviation " << worst);
}

TEST_CASE("every output satisfies the dynamics equality") {
  std::mt19937 rng(27);
  for (const RobotModel& model : {planar_arm(), floating_arm()}) {
    for (int trial = 0; trial < 30; ++trial) {
      const RobotState s = random_state(model, rng, 0.5);
      ControllerConfig cfg;
      cfg.mode = trial % 2 ? ControlMode::Weighted : ControlMode::Hierarchical;
      cfg.tasks = {ee_task(model, s, 0b000111, 2), robust(model, random_vector(3, rng), kWall, 0.2)};
      const std::vector<ExternalWrench> f_hat{{"ee", Vec6(random_vector(6, rng))}};
      const ControlOutput out = controller_step(cfg, model, s, f_hat);
      CHECK(dynamics_residual(model, s, out, f_hat) < 1e-8);
    }
  }
}

TEST_CASE("an impulse changes the PD reference only through the damping term") {
  const RobotModel arm = planar_arm();
  std::mt19937 rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    const RobotState before = random_state(arm, rng);
    const double lambda = 0.3;
    const RobotState after = impact_velocity_jump(arm, before, kWall, lambda).after;
    const VecX dnu = after.nu - before.nu;
    Task ee = ee_task(arm, before, 0b111111);
    ee.pose_target.pose.translation() += Vec3(0.01, 0, 0.02);

    for (const Task& t : {ee, posture(arm, random_vector(3, rng))}) {
      const TaskReference a = task_reference(t, arm, before);
      const TaskReference b = task_reference(t, arm, after);
      const VecX& kd = t.gains.kd;
      CHECK((b.position_error - a.position_error).norm() == 0.0);
      const VecX dv = b.velocity_error - a.velocity_error;
      CHECK((dv + a.jacobian * dnu).norm() < 1e-12 * std::max(1.0, dnu.norm()));
      CHECK((b.desired - a.desired - kd.head(dv.size()).cwiseProduct(dv)).norm() <
            1e-12 * std::max(1.0, b.desired.norm()));
    }
  }
}
