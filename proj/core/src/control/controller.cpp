#include "irwbc/control/controller.hpp"

#include <set>

#include "irwbc/errors.hpp"
#include "detail/log.hpp"

namespace irwbc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_posture(TaskKind k) {
  return k == TaskKind::PostureNominal || k == TaskKind::PostureImpactRobust;
}

// Accumulates w ||J x + c||^2 into 0.5 x^T H x + g^T x over the nu_dot block.
void add_least_squares(MatX& H, VecX& g, const MatX& J, const VecX& c, double w) {
  const auto n = J.cols();
  H.topLeftCorner(n, n).noalias() += 2.0 * w * J.transpose() * J;
  g.head(n).noalias() += 2.0 * w * J.transpose() * c;
}

VecX resize_bound(const VecX& v, Eigen::Index n, double fill) {
  return v.size() == n ? v : VecX::Constant(n, fill);
}

}  // namespace

double Activation::distance(const RobotModel& model, const RobotState& state) const {
  const Vec3 p = frame_kinematics(model, state, frame).pose.translation();
  return plane_normal.normalized().dot(p - plane_point);
}

bool Activation::triggered(const RobotModel& model, const RobotState& state) const {
  if (kind == Kind::Always) return true;
  return distance(model, state) <= d_act;
}

void ControllerConfig::validate(const RobotModel& model) const {
  int attitude_tasks = 0;
  std::set<int> priorities;
  for (const auto& task : tasks) {
    task.validate(model);
    if (task.kind == TaskKind::ReducedAttitude) ++attitude_tasks;
    if (mode == ControlMode::Hierarchical && task.active) {
      if (!priorities.insert(task.gains.priority).second) {
        throw ValidationError("hierarchical mode requires distinct priority levels (task '" +
                              task.name + "')");
      }
    }
  }
  if (attitude_tasks > 1) throw ValidationError("at most one reduced_attitude task is allowed");
  const auto m = model.num_inputs();
  const auto n = model.nv();
  auto check = [](const VecX& lo, const VecX& hi, Eigen::Index size, const char* what) {
    if ((lo.size() != 0 && lo.size() != size) || (hi.size() != 0 && hi.size() != size)) {
      throw ValidationError(std::string(what) + " bounds have the wrong size");
    }
    if (lo.size() == size && hi.size() == size && (lo.array() > hi.array()).any()) {
      throw ValidationError(std::string(what) + " lower bound exceeds upper bound");
    }
  };
  check(u_lower, u_upper, m, "input");
  check(nudot_lower, nudot_upper, n, "acceleration");
  if (activation.kind == Activation::Kind::DistanceTrigger) {
    if (!model.has_frame(activation.frame)) throw UnknownFrame(activation.frame);
    if (activation.plane_normal.norm() < 1e-12) {
      throw ValidationError("activation plane normal is degenerate");
    }
  }
}

bool gate_open(const ControllerConfig& config, const RobotModel& model, const RobotState& state) {
  return config.activation.triggered(model, state);
}

QpProblem assemble_tsid(const ControllerConfig& config, const RobotModel& model,
                        const RobotState& state, const std::vector<ExternalWrench>& f_hat,
                        const AssemblyOptions& options, double* regularization) {
  const auto n = static_cast<Eigen::Index>(model.nv());
  const auto m = static_cast<Eigen::Index>(model.num_inputs());
  const auto d = n + m;
  const bool gate = gate_open(config, model, state);

  MatX H = MatX::Zero(d, d);
  VecX g = VecX::Zero(d);

  // Dynamics: M nu_dot - G u = -h + sum J^T f_hat.
  const MatX M = mass_matrix(model, state);
  VecX dyn_rhs = -bias_forces(model, state);
  for (const auto& w : f_hat) {
    dyn_rhs += frame_kinematics(model, state, w.frame).jacobian.transpose() * w.wrench;
  }
  std::vector<MatX> eq_blocks;
  std::vector<VecX> eq_rhs;
  {
    MatX A(n, d);
    A.leftCols(n) = M;
    A.rightCols(m) = -model.actuation();
    eq_blocks.push_back(std::move(A));
    eq_rhs.push_back(std::move(dyn_rhs));
  }

  if (config.mode == ControlMode::Weighted) {
    for (const auto& task : config.tasks) {
      if (!task.active) continue;
      const TaskReference ref = task_reference(task, model, state, gate);
      add_least_squares(H, g, ref.jacobian, VecX(ref.jdot_nu - ref.desired), task.gains.weight);
    }
  } else {
    // Tilt first; it defines N_tilt for the remaining hard tasks.
    std::optional<TaskReference> tilt;
    for (const auto& task : config.tasks) {
      if (task.active && task.kind == TaskKind::ReducedAttitude) {
        tilt = task_reference(task, model, state, gate);
      }
    }
    MatX N_tilt = MatX::Identity(n, n);
    MatX J_tilt_pinv = MatX::Zero(n, 0);
    VecX tilt_acc = VecX::Zero(0);
    if (tilt) {
      const Eigen::CompleteOrthogonalDecomposition<MatX> cod(tilt->jacobian);
      if (cod.rank() != tilt->jacobian.rows()) throw RankDeficientTilt("tilt selector rows are dependent");
      J_tilt_pinv = cod.pseudoInverse();
      N_tilt -= J_tilt_pinv * tilt->jacobian;
      tilt_acc = tilt->desired - tilt->jdot_nu;
      if (options.demote_equalities) {
        add_least_squares(H, g, tilt->jacobian, VecX(-tilt_acc), options.demoted_weight);
      } else {
        MatX A = MatX::Zero(tilt->jacobian.rows(), d);
        A.leftCols(n) = tilt->jacobian;
        eq_blocks.push_back(std::move(A));
        eq_rhs.push_back(tilt_acc);
      }
    }
    for (const auto& task : config.tasks) {
      if (!task.active || task.kind == TaskKind::ReducedAttitude) continue;
      const TaskReference ref = task_reference(task, model, state, gate);
      const bool hard = task.gains.priority < 3 && !is_posture(task.kind);
      if (!hard) {
        add_least_squares(H, g, ref.jacobian, VecX(ref.jdot_nu - ref.desired), task.gains.weight);
        continue;
      }
      // J N_tilt nu_dot + J J_tilt^+ w_xy* + Jdot nu = y**
      VecX rhs = ref.desired - ref.jdot_nu;
      if (tilt) rhs -= ref.jacobian * (J_tilt_pinv * tilt_acc);
      const MatX J_proj = ref.jacobian * N_tilt;
      if (options.demote_equalities) {
        add_least_squares(H, g, J_proj, VecX(-rhs), options.demoted_weight);
      } else {
        MatX A = MatX::Zero(J_proj.rows(), d);
        A.leftCols(n) = J_proj;
        eq_blocks.push_back(std::move(A));
        eq_rhs.push_back(std::move(rhs));
      }
    }
  }

  const double eps = 1e-8 * (1.0 + H.trace() / static_cast<double>(d));
  H.diagonal().array() += eps;
  if (regularization) *regularization = eps;

  QpProblem qp;
  qp.hessian = std::move(H);
  qp.gradient = std::move(g);
  Eigen::Index rows = 0;
  for (const auto& b : eq_blocks) rows += b.rows();
  qp.eq_matrix.resize(rows, d);
  qp.eq_rhs.resize(rows);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < eq_blocks.size(); ++i) {
    qp.eq_matrix.middleRows(r, eq_blocks[i].rows()) = eq_blocks[i];
    qp.eq_rhs.segment(r, eq_rhs[i].size()) = eq_rhs[i];
    r += eq_blocks[i].rows();
  }
  qp.lower.resize(d);
  qp.upper.resize(d);
  qp.lower.head(n) = resize_bound(config.nudot_lower, n, -kInf);
  qp.upper.head(n) = resize_bound(config.nudot_upper, n, kInf);
  qp.lower.tail(m) = resize_bound(config.u_lower, m, -kInf);
  qp.upper.tail(m) = resize_bound(config.u_upper, m, kInf);
  return qp;
}

Controller::Controller(ControllerConfig config, const RobotModel& model)
    : config_(std::move(config)), model_(model) {
  config_.validate(model_);
}

ControlOutput Controller::finish(const RobotState& state, const QpSolution& sol, bool gate,
                                 bool fallback) const {
  const auto n = static_cast<Eigen::Index>(model_.nv());
  ControlOutput out;
  out.nu_dot = sol.z.head(n);
  out.u = sol.z.tail(model_.num_inputs());
  out.qp_status = sol.status;
  out.fallback_used = fallback;
  out.gate_active = gate;
  for (const auto& task : config_.tasks) {
    if (!task.active) {
      out.task_residuals.push_back(0.0);
      continue;
    }
    const TaskReference ref = task_reference(task, model_, state, gate);
    out.task_residuals.push_back((ref.jacobian * out.nu_dot + ref.jdot_nu - ref.desired).norm());
    if (task.kind == TaskKind::PostureImpactRobust && !out.h_value) {
      out.h_value = impact_metric(model_, state, *task.impact_spec);
    }
  }
  if (!out.u.allFinite() || !out.nu_dot.allFinite()) {
    throw NumericalBlowup("controller produced non-finite commands");
  }
  return out;
}

QpSolution Controller::solve(const QpProblem& qp, double eps) {
  QpSolution sol = solver_.solve(qp);
  QpProblem prox = qp;
  for (int pass = 0; pass < kProximalPasses && sol.status == QpStatus::Optimal; ++pass) {
    prox.gradient = qp.gradient - eps * sol.z;
    QpSolution next = solver_.solve(prox);
    if (next.status != QpStatus::Optimal) break;
    sol = std::move(next);
  }
  return sol;
}

ControlOutput Controller::step(const RobotState& state, const std::vector<ExternalWrench>& f_hat) {
  const bool gate = gate_open(config_, model_, state);
  double eps = 0.0;
  const QpProblem qp = assemble_tsid(config_, model_, state, f_hat, {}, &eps);
  QpSolution sol = solve(qp, eps);
  if (sol.status == QpStatus::Optimal) return finish(state, sol, gate, false);

  if (config_.mode == ControlMode::Hierarchical) {
    log::debug("hierarchical QP {}: {}; demoting task equalities", to_string(sol.status), sol.reason);
    AssemblyOptions demote;
    demote.demote_equalities = true;
    sol = solve(assemble_tsid(config_, model_, state, f_hat, demote, &eps), eps);
    if (sol.status == QpStatus::Optimal) return finish(state, sol, gate, true);
  }
  throw ControllerInfeasible("TSID QP " + std::string(to_string(sol.status)) + ": " + sol.reason);
}

ControlOutput controller_step(const ControllerConfig& config, const RobotModel& model,
                              const RobotState& state, const std::vector<ExternalWrench>& f_hat) {
  Controller controller(config, model);
  return controller.step(state, f_hat);
}

}  // namespace irwbc
