#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace irwbc {

/// minimize 0.5 z^T H z + g^T z  subject to  A z = b,  lower <= z <= upper.
struct QpProblem {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::VectorXd lower;  ///< -inf allowed
  Eigen::VectorXd upper;  ///< +inf allowed

  int num_variables() const { return static_cast<int>(gradient.size()); }
  int num_equalities() const { return static_cast<int>(eq_rhs.size()); }

  /// Unconstrained problem of dimension d with infinite bounds.
  static QpProblem unconstrained(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& gradient);
};

enum class QpStatus { Optimal, Infeasible, MaxIterations };

std::string_view to_string(QpStatus status);

/// Multipliers follow  H z + g + A^T mu + rho = 0, with rho_i >= 0 when z_i
/// rests on its upper bound and rho_i <= 0 on its lower bound.
struct QpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd bound_multipliers;
  QpStatus status = QpStatus::Infeasible;
  int iterations = 0;
  double kkt_residual = 0.0;
  std::string reason;  ///< certificate description when infeasible
};

struct KktResiduals {
  double stationarity = 0.0;
  double equality = 0.0;
  double bound_violation = 0.0;
  double complementarity = 0.0;

  double max() const;
};

KktResiduals kkt_residuals(const QpProblem& problem, const QpSolution& solution);

/// Dense strictly convex QP solver. Requires a positive definite Hessian.
///
/// The active set is found with the Goldfarb-Idnani dual method (starting
/// from the unconstrained minimizer and adding the most violated bound,
/// lowest index first on ties). The final iterate is then recomputed from the
/// equality-constrained KKT system of that active set, which removes the
/// error amplification of the range-space updates on badly scaled Hessians.
///
/// One solve at a time per instance.
class QpSolver {
 public:
  QpSolution solve(const QpProblem& problem);

  /// Dual objective values seen across iterations (non-decreasing).
  const std::vector<double>& objective_trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

QpSolution solve_qp(const QpProblem& problem);

}  // namespace irwbc
