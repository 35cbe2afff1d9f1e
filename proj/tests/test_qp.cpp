#include <cstring>

#include <doctest.h>

#include "irwbc/errors.hpp"
#include "irwbc/qp.hpp"
#include "support.hpp"

using namespace irwbc;
using namespace testing;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool same_bytes(const VecX& a, const VecX& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("unconstrained projection") {
  const QpProblem p = QpProblem::unconstrained(2.0 * MatX::Identity(2, 2), -2.0 * Eigen::Vector2d(1, -2));
  const QpSolution s = solve_qp(p);
  CHECK(s.status == QpStatus::Optimal);
  CHECK((s.z - Eigen::Vector2d(1, -2)).norm() < 1e-14);
}

TEST_CASE("active upper bound carries multiplier 2") {
  QpProblem p = QpProblem::unconstrained(MatX::Constant(1, 1, 2.0), VecX::Constant(1, -2.0));
  p.upper(0) = 0.0;
  const QpSolution s = solve_qp(p);
  CHECK(s.status == QpStatus::Optimal);
  CHECK(s.z(0) == doctest::Approx(0.0));
  CHECK(s.bound_multipliers(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(kkt_residuals(p, s).max() < 1e-12);
}

TEST_CASE("minimum norm on a line matches the 2x2 KKT solve") {
  QpProblem p = QpProblem::unconstrained(2.0 * MatX::Identity(2, 2), VecX::Zero(2));
  p.eq_matrix = MatX::Ones(1, 2);
  p.eq_rhs = VecX::Constant(1, 2.0);
  const QpSolution s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Optimal);

  MatX kkt = MatX::Zero(3, 3);
  kkt.topLeftCorner(2, 2) = p.hessian;
  kkt.topRightCorner(2, 1) = p.eq_matrix.transpose();
  kkt.bottomLeftCorner(1, 2) = p.eq_matrix;
  VecX rhs(3);
  rhs << -p.gradient, p.eq_rhs;
  const VecX sol = kkt.fullPivLu().solve(rhs);
  CHECK((s.z - sol.head(2)).norm() < 1e-14);
  CHECK(s.eq_multipliers(0) == doctest::Approx(sol(2)));
  CHECK(s.eq_multipliers(0) == doctest::Approx(-2.0));
  CHECK(s.z(0) == doctest::Approx(1.0));
  CHECK(s.z(1) == doctest::Approx(1.0));
}

TEST_CASE("input validation") {
  QpProblem p = QpProblem::unconstrained(MatX::Identity(2, 2), VecX::Zero(2));
  QpProblem bad = p;
  bad.hessian = MatX::Identity(3, 3);
  CHECK_THROWS_AS(solve_qp(bad), DimensionMismatch);
  bad = p;
  bad.eq_matrix = MatX::Ones(1, 3);
  bad.eq_rhs = VecX::Ones(1);
  CHECK_THROWS_AS(solve_qp(bad), DimensionMismatch);
  bad = p;
  bad.gradient(1) = NAN;
  CHECK_THROWS_AS(solve_qp(bad), NonFiniteData);
  bad = p;
  bad.lower(0) = kInf;
  CHECK_THROWS_AS(solve_qp(bad), NonFiniteData);
}

TEST_CASE("infeasible problems come with a reason") {
  QpProblem p = QpProblem::unconstrained(MatX::Identity(2, 2), VecX::Zero(2));
  p.eq_matrix = MatX::Ones(1, 2);
  p.eq_rhs = VecX::Constant(1, 2.0);
  p.lower = VecX::Zero(2);
  p.upper = VecX::Constant(2, 0.5);
  const QpSolution s = solve_qp(p);
  CHECK(s.status == QpStatus::Infeasible);
  CHECK_FALSE(s.reason.empty());

  QpProblem box = QpProblem::unconstrained(MatX::Identity(1, 1), VecX::Zero(1));
  box.lower(0) = 1.0;
  box.upper(0) = 0.0;
  CHECK(solve_qp(box).status == QpStatus::Infeasible);

  QpProblem rows = QpProblem::unconstrained(MatX::Identity(2, 2), VecX::Zero(2));
  rows.eq_matrix = MatX::Ones(2, 2);
  rows.eq_rhs = Eigen::Vector2d(1.0, 2.0);
  const QpSolution r = solve_qp(rows);
  CHECK(r.status == QpStatus::Infeasible);
  CHECK(r.reason.find("inconsistent") != std::string::npos);

  rows.eq_rhs = Eigen::Vector2d(1.0, 1.0);
  CHECK(solve_qp(rows).status == QpStatus::Optimal);
}

TEST_CASE("fixed variables behave as equalities") {
  QpProblem p = QpProblem::unconstrained(MatX::Identity(2, 2), Eigen::Vector2d(-3, -4));
  p.lower(0) = p.upper(0) = 0.5;
  const QpSolution s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Optimal);
  CHECK(s.z(0) == 0.5);
  CHECK(s.z(1) == doctest::Approx(4.0));
  CHECK(kkt_residuals(p, s).max() < 1e-12);
}

TEST_CASE("fuzzed instances satisfy the KKT bundle") {
  std::mt19937 rng(2024);
  QpSolver solver;
  int optimal = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const QpProblem p = random_feasible(rng);
    const QpSolution s = solver.solve(p);
    REQUIRE_MESSAGE(s.status == QpStatus::Optimal, "trial ", trial, ": ", s.reason);
    ++optimal;
    const KktResiduals r = kkt_residuals(p, s);
    worst = std::max(worst, r.max());
    CHECK(r.stationarity < 1e-8);
    CHECK(r.equality < 1e-8);
    CHECK(r.complementarity < 1e-8);
    CHECK(((s.z - p.lower).array() >= -1e-10).all());
    CHECK(((p.upper - s.z).array() >= -1e-10).all());
    const auto& trace = solver.objective_trace();
    for (std::size_t i = 1; i < trace.size(); ++i) {
      CHECK(trace[i] >= trace[i - 1] - 1e-9 * (1.0 + std::abs(trace[i])));
    }
  }
  CHECK(optimal == 1000);
  MESSAGE("worst KKT residual " << worst);
}

TEST_CASE("planted active set is recovered") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int d = std::uniform_int_distribution<int>(2, 30)(rng);
    const int k = std::uniform_int_distribution<int>(0, d / 2)(rng);
    QpProblem p;
    p.hessian = random_psd(d, rng, false);
    p.hessian.diagonal().array() += 0.1;
    p.eq_matrix = MatX(k, d);
    for (int i = 0; i < k; ++i) p.eq_matrix.row(i) = random_vector(d, rng).transpose();
    const VecX z_star = random_vector(d, rng);
    const VecX mu = random_vector(k, rng);
    VecX rho = VecX::Zero(d);
    p.lower = VecX::Constant(d, -kInf);
    p.upper = VecX::Constant(d, kInf);
    for (int i = 0; i < d; ++i) {
      const double u = unit(rng);
      const double mag = 0.1 + unit(rng);
      if (u < 0.25) {
        p.upper(i) = z_star(i);
        p.lower(i) = z_star(i) - 1.0;
        rho(i) = mag;
      } else if (u < 0.5) {
        p.lower(i) = z_star(i);
        rho(i) = -mag;
      } else {
        p.lower(i) = z_star(i) - 0.5 - unit(rng);
        p.upper(i) = z_star(i) + 0.5 + unit(rng);
      }
    }
    p.eq_rhs = p.eq_matrix * z_star;
    p.gradient = -p.hessian * z_star - p.eq_matrix.transpose() * mu - rho;
    const QpSolution s = solve_qp(p);
    REQUIRE(s.status == QpStatus::Optimal);
    CHECK((s.z - z_star).cwiseAbs().maxCoeff() < 1e-7);
    // Multipliers are unique only when the active rows are independent.
    const int active = k + static_cast<int>((rho.array() != 0.0).count());
    if (active <= d) CHECK((s.bound_multipliers - rho).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(kkt_residuals(p, s).max() < 1e-8);
  }
}

TEST_CASE("identical inputs give identical bytes") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const QpProblem p = random_feasible(rng);
    const QpSolution a = solve_qp(p);
    QpSolver solver;
    solver.solve(random_feasible(rng));
    const QpSolution b = solver.solve(p);
    CHECK(same_bytes(a.z, b.z));
    CHECK(same_bytes(a.eq_multipliers, b.eq_multipliers));
    CHECK(same_bytes(a.bound_multipliers, b.bound_multipliers));
    CHECK(a.iterations == b.iterations);
  }
}

TEST_CASE("ties enter the lowest index first") {
  // Symmetric problem: both coordinates violate their upper bound equally.
  QpProblem p = QpProblem::unconstrained(MatX::Identity(2, 2), Eigen::Vector2d(-1, -1));
  p.upper = VecX::Constant(2, 0.0);
  QpSolver solver;
  const QpSolution s = solver.solve(p);
  CHECK(s.status == QpStatus::Optimal);
  CHECK(s.z.norm() < 1e-14);
  CHECK(s.bound_multipliers(0) == doctest::Approx(1.0));
  CHECK(s.bound_multipliers(1) == doctest::Approx(1.0));
}
