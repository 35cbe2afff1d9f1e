#include "irwbc/qp.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>

#include "detail/log.hpp"
#include "irwbc/errors.hpp"

namespace irwbc {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-12;

// Constraint n^T z >= b (inequality) or n^T z = b (equality). Bound
// constraints carry a unit normal +-e_var.
struct Constraint {
  enum class Kind { Equality, Lower, Upper, Fixed };
  Kind kind;
  int index;  // row of A, or variable index
  double rhs;

  bool is_equality() const { return kind == Kind::Equality || kind == Kind::Fixed; }
};

std::string describe(const Constraint& c) {
  std::ostringstream os;
  switch (c.kind) {
    case Constraint::Kind::Equality:
      os << "equality row " << c.index;
      break;
    case Constraint::Kind::Lower:
      os << "lower bound on z[" << c.index << "]";
      break;
    case Constraint::Kind::Upper:
      os << "upper bound on z[" << c.index << "]";
      break;
    case Constraint::Kind::Fixed:
      os << "fixed value of z[" << c.index << "]";
      break;
  }
  return os.str();
}

class ActiveSetWorkspace {
 public:
  ActiveSetWorkspace(const QpProblem& p, const Eigen::LLT<MatrixXd>& llt)
      : problem_(p), llt_(llt), d_(p.num_variables()) {}

  VectorXd normal(const Constraint& c) const {
    VectorXd n = VectorXd::Zero(d_);
    switch (c.kind) {
      case Constraint::Kind::Equality:
        n = problem_.eq_matrix.row(c.index).transpose();
        break;
      case Constraint::Kind::Lower:
      case Constraint::Kind::Fixed:
        n(c.index) = 1.0;
        break;
      case Constraint::Kind::Upper:
        n(c.index) = -1.0;
        break;
    }
    return n;
  }

  double slack(const Constraint& c, const VectorXd& x) const {
    switch (c.kind) {
      case Constraint::Kind::Equality:
        return problem_.eq_matrix.row(c.index).dot(x) - c.rhs;
      case Constraint::Kind::Lower:
      case Constraint::Kind::Fixed:
        return x(c.index) - c.rhs;
      case Constraint::Kind::Upper:
        return -x(c.index) - c.rhs;
    }
    return 0.0;
  }

  // Primal step direction z and multiplier change r for adding normal np
  // to the active set with normals N.
  void directions(const MatrixXd& N, const VectorXd& np, VectorXd& z, VectorXd& r,
                  double& z_norm_ratio) const {
    const VectorXd y = llt_.matrixL().solve(np);
    const auto q = N.cols();
    if (q == 0) {
      z = llt_.matrixU().solve(y);
      r.resize(0);
      z_norm_ratio = 1.0;
      return;
    }
    const MatrixXd B = llt_.matrixL().solve(N);
    Eigen::HouseholderQR<MatrixXd> qr(B);
    const MatrixXd Q = qr.householderQ();
    const VectorXd qy = Q.transpose() * y;
    VectorXd y2 = VectorXd::Zero(d_);
    y2.tail(d_ - q) = qy.tail(d_ - q);
    z = llt_.matrixU().solve(Q * y2);
    const MatrixXd R = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
    r = R.triangularView<Eigen::Upper>().solve(qy.head(q));
    const double yn = y.norm();
    z_norm_ratio = yn > 0.0 ? qy.tail(d_ - q).norm() / yn : 0.0;
  }

 private:
  const QpProblem& problem_;
  const Eigen::LLT<MatrixXd>& llt_;
  int d_;
};

void validate(const QpProblem& p) {
  const auto d = p.gradient.size();
  if (p.hessian.rows() != d || p.hessian.cols() != d) {
    throw DimensionMismatch("QP hessian must be d x d with d = gradient size");
  }
  if (p.eq_matrix.cols() != d && p.eq_matrix.size() != 0) {
    throw DimensionMismatch("QP equality matrix must have d columns");
  }
  if (p.eq_matrix.rows() != p.eq_rhs.size()) {
    throw DimensionMismatch("QP equality matrix rows must match rhs size");
  }
  if (p.eq_rhs.size() > d) throw DimensionMismatch("QP has more equality rows than variables");
  if (p.lower.size() != d || p.upper.size() != d) {
    throw DimensionMismatch("QP bounds must have d entries");
  }
  if (!p.hessian.allFinite() || !p.gradient.allFinite() || !p.eq_matrix.allFinite() ||
      !p.eq_rhs.allFinite()) {
    throw NonFiniteData("QP data contains NaN or infinite entries");
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    if (std::isnan(p.lower(i)) || std::isnan(p.upper(i)) || p.lower(i) == kInf ||
        p.upper(i) == -kInf) {
      throw NonFiniteData("QP bounds contain NaN or a bound at the wrong infinity");
    }
  }
}

// Variable status in the working set of the primal refinement.
enum Bound : int { kFree = 0, kAtUpper = 1, kAtLower = -1, kFixedVar = 2 };

struct DualResult {
  QpStatus status = QpStatus::Optimal;
  std::string reason;
  VectorXd x;
  std::vector<Constraint> active;
  std::vector<double> duals;
  int iterations = 0;
};

// Goldfarb-Idnani dual active-set iterations.
DualResult dual_phase(const QpProblem& p, const Eigen::LLT<MatrixXd>& llt, std::vector<double>* trace) {
  const int d = p.num_variables();
  ActiveSetWorkspace ws(p, llt);
  DualResult res;

  std::vector<Constraint> candidates;  // inequality candidates in index order
  std::vector<Constraint> equalities;
  for (int e = 0; e < p.num_equalities(); ++e) {
    equalities.push_back({Constraint::Kind::Equality, e, p.eq_rhs(e)});
  }
  for (int i = 0; i < d; ++i) {
    if (p.lower(i) == p.upper(i)) {
      equalities.push_back({Constraint::Kind::Fixed, i, p.lower(i)});
      continue;
    }
    if (std::isfinite(p.lower(i))) candidates.push_back({Constraint::Kind::Lower, i, p.lower(i)});
    if (std::isfinite(p.upper(i))) candidates.push_back({Constraint::Kind::Upper, i, -p.upper(i)});
  }

  VectorXd& x = res.x;
  x = -llt.solve(p.gradient);
  double objective = 0.5 * p.gradient.dot(x);
  if (trace) trace->push_back(objective);

  auto& active = res.active;
  auto& duals = res.duals;
  MatrixXd N(d, 0);
  auto push_active = [&](const Constraint& c, double dual) {
    active.push_back(c);
    duals.push_back(dual);
    N.conservativeResize(d, N.cols() + 1);
    N.col(N.cols() - 1) = ws.normal(c);
  };
  auto drop_active = [&](std::size_t k) {
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(k));
    duals.erase(duals.begin() + static_cast<std::ptrdiff_t>(k));
    MatrixXd M(d, N.cols() - 1);
    for (Eigen::Index c = 0, o = 0; c < N.cols(); ++c) {
      if (c != static_cast<Eigen::Index>(k)) M.col(o++) = N.col(c);
    }
    N = M;
  };

  VectorXd z, r;
  double ratio = 0.0;
  const double scale_x = 1.0 + (d > 0 ? x.cwiseAbs().maxCoeff() : 0.0);

  for (const auto& c : equalities) {
    const VectorXd np = ws.normal(c);
    ws.directions(N, np, z, r, ratio);
    const double s = ws.slack(c, x);
    if (ratio < 1e-12) {
      if (std::abs(s) <= 1e-9 * (1.0 + std::abs(c.rhs))) continue;  // redundant row
      res.status = QpStatus::Infeasible;
      res.reason = "inconsistent equalities: " + describe(c) +
                   " is a linear combination of earlier equalities with a different right-hand side";
      return res;
    }
    const double t = -s / z.dot(np);
    x += t * z;
    for (std::size_t k = 0; k < duals.size(); ++k) duals[k] -= t * r(static_cast<Eigen::Index>(k));
    push_active(c, t);
    ++res.iterations;
  }

  const int max_iterations = 50 * std::max(1, d);
  for (;;) {
    // Most violated inactive inequality; lowest index wins ties.
    int best = -1;
    double best_slack = 0.0;
    for (int ci = 0; ci < static_cast<int>(candidates.size()); ++ci) {
      const auto& c = candidates[ci];
      bool is_active = false;
      for (const auto& a : active) {
        if (a.kind == c.kind && a.index == c.index) is_active = true;
      }
      if (is_active) continue;
      const double s = ws.slack(c, x);
      const double tol = kFeasTol * (1.0 + std::abs(c.rhs)) * scale_x;
      if (s < -tol && (best < 0 || s < best_slack)) {
        best = ci;
        best_slack = s;
      }
    }
    if (best < 0) return res;

    const Constraint cp = candidates[best];
    const VectorXd np = ws.normal(cp);
    double dual_p = 0.0;
    for (;;) {
      if (++res.iterations > max_iterations) {
        res.status = QpStatus::MaxIterations;
        res.reason = "iteration cap reached";
        return res;
      }
      ws.directions(N, np, z, r, ratio);
      // Partial (dual) step limit: first active inequality whose multiplier
      // reaches zero.
      double t1 = kInf;
      int drop = -1;
      for (std::size_t k = 0; k < active.size(); ++k) {
        if (active[k].is_equality()) continue;
        const double rk = r(static_cast<Eigen::Index>(k));
        if (rk > 0.0) {
          const double tk = duals[k] / rk;
          if (tk < t1) {
            t1 = tk;
            drop = static_cast<int>(k);
          }
        }
      }
      const bool primal_step = ratio >= 1e-12;
      const double s = ws.slack(cp, x);
      const double t2 = primal_step ? -s / z.dot(np) : kInf;
      if (!std::isfinite(t1) && !std::isfinite(t2)) {
        std::ostringstream os;
        os << "infeasible: " << describe(cp)
           << " is a non-positive combination of active constraints {";
        for (std::size_t k = 0; k < active.size(); ++k) {
          os << (k ? ", " : "") << describe(active[k]) << " (" << r(static_cast<Eigen::Index>(k))
             << ")";
        }
        os << "}, so no point satisfies them all";
        res.status = QpStatus::Infeasible;
        res.reason = os.str();
        return res;
      }
      const double t = std::min(t1, t2);
      if (primal_step) {
        x += t * z;
        objective += t * z.dot(np) * (0.5 * t + dual_p);
        if (trace) {
          assert(objective >= trace->back() - 1e-9 * (1.0 + std::abs(objective)));
          trace->push_back(objective);
        }
      }
      for (std::size_t k = 0; k < duals.size(); ++k) duals[k] -= t * r(static_cast<Eigen::Index>(k));
      dual_p += t;
      if (primal_step && t == t2) {
        push_active(cp, dual_p);
        break;
      }
      drop_active(static_cast<std::size_t>(drop));
    }
  }
}

// Primal active-set refinement from a feasible start. Steps live in the null
// space of the equality rows restricted to the free variables (rank-revealing,
// so degenerate vertices are fine); blocking bounds enter through a ratio test
// and bounds with wrong-signed multipliers leave. Returns false if no
// stationary, dual-feasible point is reached within the iteration limit.
bool primal_refine(const QpProblem& p, VectorXd z, std::vector<int> status, QpSolution& sol) {
  const int d = p.num_variables();
  const int ne = p.num_equalities();
  const double scale = 1.0 + p.gradient.cwiseAbs().maxCoeff() + p.hessian.cwiseAbs().maxCoeff();
  const double dual_tol = 1e-9 * scale;
  const int max_iterations = 10 * d + 10;
  int unblocked = 0;
  for (int it = 0; it < max_iterations; ++it) {
    for (int i = 0; i < d; ++i) {
      if (status[i] == kAtUpper) z(i) = p.upper(i);
      if (status[i] == kAtLower || status[i] == kFixedVar) z(i) = p.lower(i);
    }
    std::vector<int> free;
    for (int i = 0; i < d; ++i) {
      if (status[i] == kFree) free.push_back(i);
    }
    const int nf = static_cast<int>(free.size());
    MatrixXd Af(ne, nf);
    MatrixXd Hff(nf, nf);
    for (int a = 0; a < nf; ++a) {
      Af.col(a) = p.eq_matrix.col(free[a]);
      for (int b = 0; b < nf; ++b) Hff(a, b) = p.hessian(free[a], free[b]);
    }
    const bool coupled = ne > 0 && nf > 0;
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod_a;
    if (coupled) {
      cod_a.compute(Af);
      // Keep A z = b exact up to rounding after bounds were snapped.
      const VectorXd r_eq = p.eq_rhs - p.eq_matrix * z;
      const VectorXd dz = cod_a.solve(r_eq);
      for (int a = 0; a < nf; ++a) z(free[a]) += dz(a);
    }
    const VectorXd gz = p.hessian * z + p.gradient;
    VectorXd gf(nf);
    for (int a = 0; a < nf; ++a) gf(a) = gz(free[a]);

    const int rank = coupled ? static_cast<int>(cod_a.rank()) : 0;
    MatrixXd Z;
    if (nf > rank) {
      if (coupled) {
        const Eigen::FullPivHouseholderQR<MatrixXd> qr(Af.transpose());
        const MatrixXd Q = qr.matrixQ();
        Z = Q.rightCols(nf - rank);
      } else {
        Z = MatrixXd::Identity(nf, nf);
      }
    }
    const VectorXd reduced = Z.size() > 0 ? VectorXd(Z.transpose() * gf) : VectorXd();
    const double stat_tol = 1e-14 * scale * (1.0 + z.cwiseAbs().maxCoeff());
    if (reduced.size() > 0 && reduced.cwiseAbs().maxCoeff() > stat_tol && unblocked < 3) {
      const MatrixXd Hr = Z.transpose() * Hff * Z;
      const VectorXd pf = Z * Hr.ldlt().solve(-reduced);
      double alpha = 1.0;
      int block = -1;
      for (int a = 0; a < nf; ++a) {
        const int i = free[a];
        double t = kInf;
        if (pf(a) < 0.0 && std::isfinite(p.lower(i))) t = (p.lower(i) - z(i)) / pf(a);
        if (pf(a) > 0.0 && std::isfinite(p.upper(i))) t = (p.upper(i) - z(i)) / pf(a);
        t = std::max(t, 0.0);
        if (t < alpha) {
          alpha = t;
          block = a;
        }
      }
      for (int a = 0; a < nf; ++a) z(free[a]) += alpha * pf(a);
      if (block >= 0) {
        status[free[block]] = pf(block) < 0.0 ? kAtLower : kAtUpper;
        unblocked = 0;
        log::debug("qp refine: step {} blocked by z[{}]", it, free[block]);
      } else {
        ++unblocked;
      }
      continue;
    }

    // Stationary on the working set: minimum-norm equality multipliers,
    // bound multipliers from the remaining rows.
    VectorXd mu = VectorXd::Zero(ne);
    if (coupled) {
      const MatrixXd At = Af.transpose();
      mu = At.completeOrthogonalDecomposition().solve(VectorXd(-gf));
    }
    VectorXd rho = -gz;
    if (ne > 0) rho -= p.eq_matrix.transpose() * mu;
    for (int a = 0; a < nf; ++a) rho(free[a]) = 0.0;

    int release = -1;
    double worst = dual_tol;
    for (int i = 0; i < d; ++i) {
      const double wrong = status[i] == kAtUpper ? -rho(i) : status[i] == kAtLower ? rho(i) : 0.0;
      if (wrong > worst) {
        worst = wrong;
        release = i;
      }
    }
    if (release < 0) {
      sol.z = z;
      sol.eq_multipliers = mu;
      sol.bound_multipliers = rho;
      return true;
    }
    log::debug("qp refine: step {} releases z[{}] (multiplier {})", it, release, rho(release));
    status[release] = kFree;
    unblocked = 0;
  }
  log::debug("qp refine: iteration limit reached");
  return false;
}

// Projects the dual iterate onto the feasible set and refines from there,
// seeding the working set with the bounds the dual phase left active.
bool polish(const QpProblem& p, const DualResult& dual, QpSolution& sol) {
  const int d = p.num_variables();
  QpProblem proj = p;
  proj.hessian = MatrixXd::Identity(d, d);
  proj.gradient = -dual.x;
  const Eigen::LLT<MatrixXd> eye(proj.hessian);
  const DualResult start = dual_phase(proj, eye, nullptr);
  if (start.status != QpStatus::Optimal) {
    log::debug("qp polish: projection failed ({})", start.reason);
    return false;
  }
  const VectorXd z0 = start.x.cwiseMax(p.lower).cwiseMin(p.upper);
  std::vector<int> status(d, kFree);
  for (int i = 0; i < d; ++i) {
    if (p.lower(i) == p.upper(i)) status[i] = kFixedVar;
  }
  for (const auto& c : dual.active) {
    const double tight = 1e-12 * (1.0 + std::abs(c.rhs));
    if (c.kind == Constraint::Kind::Lower && std::abs(z0(c.index) - p.lower(c.index)) <= tight) {
      status[c.index] = kAtLower;
    } else if (c.kind == Constraint::Kind::Upper && std::abs(z0(c.index) - p.upper(c.index)) <= tight) {
      status[c.index] = kAtUpper;
    }
  }
  return primal_refine(p, z0, status, sol);
}

}  // namespace

QpProblem QpProblem::unconstrained(const MatrixXd& hessian, const VectorXd& gradient) {
  QpProblem p;
  const auto d = gradient.size();
  p.hessian = hessian;
  p.gradient = gradient;
  p.eq_matrix = MatrixXd::Zero(0, d);
  p.eq_rhs = VectorXd::Zero(0);
  p.lower = VectorXd::Constant(d, -kInf);
  p.upper = VectorXd::Constant(d, kInf);
  return p;
}

std::string_view to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal:
      return "optimal";
    case QpStatus::Infeasible:
      return "infeasible";
    case QpStatus::MaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

double KktResiduals::max() const {
  return std::max({stationarity, equality, bound_violation, complementarity});
}

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& s) {
  KktResiduals r;
  const auto d = p.gradient.size();
  if (s.z.size() != d) return {kInf, kInf, kInf, kInf};
  VectorXd stat = p.hessian * s.z + p.gradient + s.bound_multipliers;
  if (p.num_equalities() > 0) {
    stat += p.eq_matrix.transpose() * s.eq_multipliers;
    r.equality = (p.eq_matrix * s.z - p.eq_rhs).cwiseAbs().maxCoeff();
  }
  r.stationarity = d > 0 ? stat.cwiseAbs().maxCoeff() : 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    r.bound_violation = std::max({r.bound_violation, p.lower(i) - s.z(i), s.z(i) - p.upper(i)});
    const double rho = s.bound_multipliers(i);
    double dist = 0.0;
    if (rho > 0.0) {
      dist = p.upper(i) - s.z(i);
    } else if (rho < 0.0) {
      dist = s.z(i) - p.lower(i);
    }
    if (rho != 0.0) r.complementarity = std::max(r.complementarity, std::abs(rho * dist));
  }
  return r;
}

QpSolution QpSolver::solve(const QpProblem& p) {
  validate(p);
  trace_.clear();
  const int d = p.num_variables();
  QpSolution sol;
  sol.z = VectorXd::Zero(d);
  sol.eq_multipliers = VectorXd::Zero(p.num_equalities());
  sol.bound_multipliers = VectorXd::Zero(d);

  for (int i = 0; i < d; ++i) {
    if (p.lower(i) > p.upper(i)) {
      sol.status = QpStatus::Infeasible;
      sol.reason = "empty box: lower bound exceeds upper bound on z[" + std::to_string(i) + "]";
      return sol;
    }
  }

  const Eigen::LLT<MatrixXd> llt(0.5 * (p.hessian + p.hessian.transpose()));
  if (llt.info() != Eigen::Success) {
    throw ValidationError("QP hessian is not positive definite; regularize before solving");
  }
  const DualResult dual = dual_phase(p, llt, &trace_);
  sol.iterations = dual.iterations;
  if (dual.status != QpStatus::Optimal) {
    sol.status = dual.status;
    sol.reason = dual.reason;
    sol.z = dual.x;
    if (dual.status == QpStatus::MaxIterations) sol.kkt_residual = kInf;
    return sol;
  }

  // Range-space iterate and its multipliers.
  sol.z = dual.x;
  for (std::size_t k = 0; k < dual.active.size(); ++k) {
    const auto& c = dual.active[k];
    switch (c.kind) {
      case Constraint::Kind::Equality:
        sol.eq_multipliers(c.index) = -dual.duals[k];
        break;
      case Constraint::Kind::Lower:
      case Constraint::Kind::Fixed:
        sol.bound_multipliers(c.index) = -dual.duals[k];
        sol.z(c.index) = p.lower(c.index);
        break;
      case Constraint::Kind::Upper:
        sol.bound_multipliers(c.index) = dual.duals[k];
        sol.z(c.index) = p.upper(c.index);
        break;
    }
  }
  sol.z = sol.z.cwiseMax(p.lower).cwiseMin(p.upper);
  const double scale = 1.0 + p.gradient.cwiseAbs().maxCoeff() + p.hessian.cwiseAbs().maxCoeff();
  QpSolution polished = sol;
  if (kkt_residuals(p, sol).max() > 1e-12 * scale && polish(p, dual, polished)) {
    polished.z = polished.z.cwiseMax(p.lower).cwiseMin(p.upper);
    sol = polished;
  }
  sol.status = QpStatus::Optimal;
  sol.kkt_residual = kkt_residuals(p, sol).max();
  return sol;
}

QpSolution solve_qp(const QpProblem& problem) {
  QpSolver solver;
  return solver.solve(problem);
}

}  // namespace irwbc
