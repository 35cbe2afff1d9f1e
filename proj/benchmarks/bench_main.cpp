#include <random>

#include <benchmark/benchmark.h>

#include "irwbc/control/controller.hpp"
#include "irwbc/qp.hpp"
#include "irwbc/rbd/dynamics.hpp"
#include "irwbc/sensitivity.hpp"
#include "irwbc/sim/scenario.hpp"
#ifdef IRWBC_BENCH_SCENARIOS
#include "scenario_io.hpp"
#endif

using namespace irwbc;

namespace {

std::string data(const std::string& rel) { return std::string(IRWBC_BENCH_DATA_DIR) + "/" + rel; }

const RobotModel& model(int which) {
  static const RobotModel arm = load_model(data("models/planar_arm.json"));
  static const RobotModel floating = load_model(data("models/floating_arm.json"));
  return which == 0 ? arm : floating;
}

RobotState some_state(const RobotModel& m) {
  std::mt19937 rng(7);
  std::normal_distribution<double> n(0.0, 0.5);
  RobotState s = RobotState::neutral(m);
  for (Eigen::Index i = 0; i < s.q_joints.size(); ++i) s.q_joints(i) = n(rng);
  for (Eigen::Index i = 0; i < s.nu.size(); ++i) s.nu(i) = n(rng);
  return s;
}

void BM_MassMatrix(benchmark::State& st) {
  const RobotModel& m = model(static_cast<int>(st.range(0)));
  const RobotState s = some_state(m);
  for (auto _ : st) benchmark::DoNotOptimize(mass_matrix(m, s));
}
BENCHMARK(BM_MassMatrix)->Arg(0)->Arg(1);

void BM_BiasForces(benchmark::State& st) {
  const RobotModel& m = model(static_cast<int>(st.range(0)));
  const RobotState s = some_state(m);
  for (auto _ : st) benchmark::DoNotOptimize(bias_forces(m, s));
}
BENCHMARK(BM_BiasForces)->Arg(0)->Arg(1);

void BM_ImpactMetric(benchmark::State& st) {
  const RobotModel& m = model(0);
  const RobotState s = some_state(m);
  const ImpactSpec spec("ee", Vec3::UnitZ(), 1.0, 0.0);
  for (auto _ : st) benchmark::DoNotOptimize(impact_metric(m, s, spec));
}
BENCHMARK(BM_ImpactMetric);

void BM_MetricGradient(benchmark::State& st) {
  const RobotModel& m = model(static_cast<int>(st.range(0)));
  const RobotState s = some_state(m);
  const ImpactSpec spec("ee", Vec3::UnitZ(), 1.0, 0.0);
  for (auto _ : st) benchmark::DoNotOptimize(metric_gradient(m, s, spec));
}
BENCHMARK(BM_MetricGradient)->Arg(0)->Arg(1);

void BM_QpSolve(benchmark::State& st) {
  const int d = static_cast<int>(st.range(0));
  std::mt19937 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  MatX l(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) l(i, j) = n(rng);
  QpProblem p = QpProblem::unconstrained(l * l.transpose() + MatX::Identity(d, d), VecX::Zero(d));
  for (int i = 0; i < d; ++i) p.gradient(i) = 3.0 * n(rng);
  p.eq_matrix = MatX(d / 3, d);
  for (int i = 0; i < p.eq_matrix.rows(); ++i)
    for (int j = 0; j < d; ++j) p.eq_matrix(i, j) = n(rng);
  p.eq_rhs = VecX::Zero(p.eq_matrix.rows());
  p.lower = VecX::Constant(d, -0.5);
  p.upper = VecX::Constant(d, 0.5);
  QpSolver solver;
  for (auto _ : st) benchmark::DoNotOptimize(solver.solve(p));
}
BENCHMARK(BM_QpSolve)->Arg(6)->Arg(12)->Arg(24)->Arg(40);

void BM_ControllerStep(benchmark::State& st) {
  const RobotModel& m = model(0);
  const RobotState s = some_state(m);
  Task ee;
  ee.name = "ee";
  ee.kind = TaskKind::EePose;
  ee.frame = "ee";
  ee.axes = 0b000101;
  ee.pose_target.pose = frame_kinematics(m, s, "ee").pose;
  ee.gains.kp = VecX::Constant(6, 400.0);
  ee.gains.kd = VecX::Constant(6, 40.0);
  ee.gains.priority = 1;
  Task post;
  post.name = "posture";
  post.kind = st.range(0) ? TaskKind::PostureImpactRobust : TaskKind::PostureNominal;
  post.joint_target.q = s.q_joints;
  post.gains.kp = VecX::Constant(3, 20.0);
  post.gains.kd = VecX::Constant(3, 10.0);
  post.gains.priority = 3;
  post.impact_spec = ImpactSpec("ee", Vec3::UnitZ(), 0.5, 0.0);
  post.k_gradient = VecX::Constant(3, 0.1);
  ControllerConfig cfg;
  cfg.tasks = {ee, post};
  cfg.u_lower = VecX::Constant(3, -25.0);
  cfg.u_upper = VecX::Constant(3, 25.0);
  Controller ctrl(cfg, m);
  for (auto _ : st) benchmark::DoNotOptimize(ctrl.step(s, {}));
}
BENCHMARK(BM_ControllerStep)->Arg(0)->Arg(1);

#ifdef IRWBC_BENCH_SCENARIOS
void BM_ScenarioSecond(benchmark::State& st) {
  static const char* names[] = {"vertical", "floating"};
  Scenario sc = cli::load_scenario(data(std::string("scenarios/") + names[st.range(0)] + ".json")).scenario;
  sc.sim.duration = 1.0;
  for (auto _ : st) benchmark::DoNotOptimize(run_scenario(sc, Variant::ImpactRobust));
  st.SetLabel(names[st.range(0)]);
}
BENCHMARK(BM_ScenarioSecond)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
#endif

}  // namespace

BENCHMARK_MAIN();
