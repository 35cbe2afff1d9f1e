// Shared fixtures and independent reference computations for the test suites.
#pragma once

#include <cmath>
#include <random>
#include <string>

#include <fmt/format.h>

#include "irwbc/control/controller.hpp"
#include "irwbc/qp.hpp"
#include "irwbc/rbd/dynamics.hpp"
#include "irwbc/sensitivity.hpp"

namespace testing {

using namespace irwbc;

inline std::string data_path(const std::string& rel) { return std::string(IRWBC_TEST_DATA_DIR) + "/" + rel; }

/// Point mass m at distance l below a y-axis hinge; frame "tip" at the mass.
inline RobotModel pendulum(double m = 1.0, double l = 1.0, double g = 9.81) {
  return build_model(fmt::format(R"({{
    "links": [{{"name": "bob", "mass": {0}, "com": [0, 0, {2}],
                "inertia": [{3}, {3}, 0, 0, 0, 0]}}],
    "joints": [{{"name": "hinge", "kind": "revolute", "parent": "world", "child": "bob",
                 "axis": [0, 1, 0]}}],
    "frames": [{{"name": "tip", "parent": "bob", "origin": {{"xyz": [0, 0, {2}]}}}}],
    "gravity": [0, 0, {1}]}})",
                                 m, -g, -l, m * l * l));
}

/// Two point masses at the link tips, both hinges about y, hanging along -z.
inline RobotModel double_pendulum(double m1, double m2, double l1, double l2, double g = 9.81) {
  return build_model(fmt::format(R"({{
    "links": [
      {{"name": "a", "mass": {0}, "com": [0, 0, {2}], "inertia": [{4}, {4}, 0, 0, 0, 0]}},
      {{"name": "b", "mass": {1}, "com": [0, 0, {3}], "inertia": [{5}, {5}, 0, 0, 0, 0]}}],
    "joints": [
      {{"name": "j1", "kind": "revolute", "parent": "world", "child": "a", "axis": [0, 1, 0]}},
      {{"name": "j2", "kind": "revolute", "parent": "a", "child": "b", "axis": [0, 1, 0],
        "origin": {{"xyz": [0, 0, {2}]}}}}],
    "frames": [{{"name": "tip", "parent": "b", "origin": {{"xyz": [0, 0, {3}]}}}}],
    "gravity": [0, 0, {6}]}})",
                                 m1, m2, -l1, -l2, m1 * l1 * l1, m2 * l2 * l2, -g));
}

/// Block of mass m sliding along world z, no gravity; frame "body" at its origin.
inline RobotModel slider(double m = 1.0) {
  return build_model(fmt::format(R"({{
    "links": [{{"name": "block", "mass": {0}, "inertia": [0.01, 0.01, 0.01, 0, 0, 0]}}],
    "joints": [{{"name": "rail", "kind": "prismatic", "parent": "world", "child": "block",
                 "axis": [0, 0, 1]}}],
    "frames": [{{"name": "body", "parent": "block"}}],
    "gravity": [0, 0, 0]}})",
                                 m));
}

inline RobotModel planar_arm() { return load_model(data_path("models/planar_arm.json")); }
inline RobotModel floating_arm() { return load_model(data_path("models/floating_arm.json")); }

// Closed-form double pendulum dynamics (angles from the downward vertical).
inline Eigen::Matrix2d double_pendulum_mass(double m1, double m2, double l1, double l2, double q2) {
  const double c = std::cos(q2);
  Eigen::Matrix2d M;
  M(0, 0) = m1 * l1 * l1 + m2 * (l1 * l1 + 2 * l1 * l2 * c + l2 * l2);
  M(0, 1) = M(1, 0) = m2 * (l1 * l2 * c + l2 * l2);
  M(1, 1) = m2 * l2 * l2;
  return M;
}

inline Eigen::Vector2d double_pendulum_bias(double m1, double m2, double l1, double l2, double g,
                                            const Eigen::Vector2d& q, const Eigen::Vector2d& qd) {
  const double s2 = std::sin(q(1));
  const double g1 = (m1 + m2) * g * l1 * std::sin(q(0)) + m2 * g * l2 * std::sin(q(0) + q(1));
  const double g2 = m2 * g * l2 * std::sin(q(0) + q(1));
  return {-m2 * l1 * l2 * s2 * (2 * qd(0) * qd(1) + qd(1) * qd(1)) + g1,
          m2 * l1 * l2 * s2 * qd(0) * qd(0) + g2};
}

// Planar arm (links along +x at q = 0, hinges about y). The lengths, masses
// and inertias mirror data/models/planar_arm.json.
struct PlanarArmOracle {
  double l[3] = {0.4, 0.35, 0.25};
  double m[3] = {1.5, 1.0, 0.5};

  double iyy_com(int i) const { return m[i] * l[i] * l[i] / 12.0 + 1e-3 * m[i]; }

  Eigen::Vector2d ee(const Eigen::Vector3d& q) const {
    double th = 0, x = 0, z = 0;
    for (int i = 0; i < 3; ++i) {
      th += q(i);
      x += l[i] * std::cos(th);
      z -= l[i] * std::sin(th);
    }
    return {x, z};
  }

  /// Rows (x, z) of the Jacobian of the point at `frac` along link k.
  Eigen::Matrix<double, 2, 3> point_jacobian(const Eigen::Vector3d& q, int k, double frac) const {
    Eigen::Matrix<double, 2, 3> J = Eigen::Matrix<double, 2, 3>::Zero();
    double th[3];
    double acc = 0;
    for (int i = 0; i < 3; ++i) th[i] = (acc += q(i));
    for (int j = 0; j <= k; ++j) {
      for (int i = j; i <= k; ++i) {
        const double len = i == k ? frac * l[i] : l[i];
        J(0, j) -= len * std::sin(th[i]);
        J(1, j) -= len * std::cos(th[i]);
      }
    }
    return J;
  }

  Eigen::Matrix3d mass(const Eigen::Vector3d& q) const {
    Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
    for (int k = 0; k < 3; ++k) {
      const auto Jc = point_jacobian(q, k, 0.5);
      Eigen::RowVector3d Jw = Eigen::RowVector3d::Zero();
      Jw.head(k + 1).setOnes();
      M += m[k] * Jc.transpose() * Jc + iyy_com(k) * Jw.transpose() * Jw;
    }
    return M;
  }

  /// H(q) = ||M^-1 J^T n||^2 for a unit normal n = (nx, nz) in the arm plane.
  double metric(const Eigen::Vector3d& q, const Eigen::Vector2d& n) const {
    const Eigen::Vector3d jn = point_jacobian(q, 2, 1.0).transpose() * n;
    return mass(q).ldlt().solve(jn).squaredNorm();
  }
};

/// One-sided second-order differences of the oracle metric at half the
/// library step: (-3 f(q) + 4 f(q + h) - f(q + 2h)) / 2h.
inline Eigen::Vector3d one_sided_metric_gradient(const PlanarArmOracle& oracle, const Eigen::Vector3d& q,
                                                 const Eigen::Vector2d& n) {
  Eigen::Vector3d g;
  const double f0 = oracle.metric(q, n);
  for (int i = 0; i < 3; ++i) {
    const double h = 0.5e-6 * std::max(1.0, std::abs(q(i)));
    Eigen::Vector3d q1 = q, q2 = q;
    q1(i) += h;
    q2(i) += 2 * h;
    g(i) = (-3 * f0 + 4 * oracle.metric(q1, n) - oracle.metric(q2, n)) / (2 * h);
  }
  return g;
}

inline RobotState random_state(const RobotModel& model, std::mt19937& rng, double vel_scale = 1.0) {
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  std::normal_distribution<double> normal(0.0, vel_scale);
  RobotState s = RobotState::neutral(model);
  for (Eigen::Index i = 0; i < s.q_joints.size(); ++i) s.q_joints(i) = angle(rng);
  for (Eigen::Index i = 0; i < s.nu.size(); ++i) s.nu(i) = normal(rng);
  if (s.floating()) {
    s.base_position = Vec3(normal(rng), normal(rng), normal(rng));
    s.base_orientation = Eigen::Quaterniond(normal(rng), normal(rng), normal(rng), normal(rng)).normalized();
  }
  return s;
}

inline VecX random_vector(Eigen::Index n, std::mt19937& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  VecX v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline double rel_err(const MatX& a, const MatX& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

/// Random PSD matrix of random rank, optionally with the controller-style
/// diagonal regularization.
inline MatX random_psd(int d, std::mt19937& rng, bool regularize, int* rank = nullptr) {
  std::uniform_int_distribution<int> rank_dist(1, d);
  const int r = rank_dist(rng);
  if (rank) *rank = r;
  MatX l(d, r);
  for (int j = 0; j < r; ++j) l.col(j) = random_vector(d, rng);
  MatX h = l * l.transpose();
  if (regularize) h.diagonal().array() += 1e-8 * (1.0 + h.trace() / d);
  return h;
}

inline QpProblem random_feasible(std::mt19937& rng) {
  std::uniform_int_distribution<int> dim(1, 40);
  const int d = dim(rng);
  const int k = std::uniform_int_distribution<int>(0, std::min(20, d))(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  QpProblem p;
  int rank = 0;
  p.hessian = random_psd(d, rng, true, &rank);
  // Unbounded directions only when the Hessian has full rank, otherwise the
  // optimum can sit at |z| ~ 1/eps.
  const double open_ends = rank == d ? 0.15 : 0.0;
  p.gradient = random_vector(d, rng, 3.0);
  p.eq_matrix = MatX(k, d);
  for (int i = 0; i < k; ++i) p.eq_matrix.row(i) = random_vector(d, rng).transpose();
  p.lower = VecX(d);
  p.upper = VecX(d);
  const VecX anchor = random_vector(d, rng);
  for (int i = 0; i < d; ++i) {
    const double u = unit(rng);
    const double width = 0.05 + unit(rng);
    p.lower(i) = u < open_ends ? -std::numeric_limits<double>::infinity() : anchor(i) - width * unit(rng);
    p.upper(i) = u > 1.0 - open_ends ? std::numeric_limits<double>::infinity() : anchor(i) + width * unit(rng);
  }
  p.eq_rhs = p.eq_matrix * anchor;
  return p;
}

}  // namespace testing
