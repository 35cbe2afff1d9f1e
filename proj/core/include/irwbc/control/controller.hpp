#pragma once

#include <optional>
#include <vector>

#include "irwbc/control/task.hpp"
#include "irwbc/qp.hpp"

namespace irwbc {

enum class ControlMode { Weighted, Hierarchical };

/// Gate for the impact-robust gradient term: always on, or on once the
/// trigger frame is within `d_act` of the contact plane.
struct Activation {
  enum class Kind { Always, DistanceTrigger };
  Kind kind = Kind::Always;
  std::string frame;
  Vec3 plane_point = Vec3::Zero();
  Vec3 plane_normal = Vec3::UnitZ();
  double d_act = 0.15;

  /// Signed distance of the trigger frame from the plane.
  double distance(const RobotModel& model, const RobotState& state) const;
  bool triggered(const RobotModel& model, const RobotState& state) const;
};

struct ControllerConfig {
  ControlMode mode = ControlMode::Hierarchical;
  std::vector<Task> tasks;
  VecX u_lower, u_upper;
  VecX nudot_lower, nudot_upper;
  Activation activation;

  void validate(const RobotModel& model) const;
};

struct ControlOutput {
  VecX u;
  VecX nu_dot;
  std::vector<double> task_residuals;  ///< ||J nu_dot + Jdot nu - y**||, config order
  std::optional<double> h_value;        ///< H(q) when an impact-robust task is present
  QpStatus qp_status = QpStatus::Optimal;
  bool fallback_used = false;
  bool gate_active = false;
};

struct AssemblyOptions {
  /// Replace hard task equalities by cost terms of this weight (fallback).
  bool demote_equalities = false;
  double demoted_weight = 1e6;
};

/// Builds the TSID QP over z = [nu_dot; u] (d = n + m).
///
/// Weighted mode: cost sum w_i ||J_i nu_dot + Jdot_i nu - y**_i||^2.
/// Hierarchical mode: the tilt task and priority-1/2 tasks become equality
/// rows (the latter projected through N_tilt); priority-3 tasks stay in the
/// cost. Both modes add the dynamics equality
/// M nu_dot + h = G u + sum J^T f_hat and the box bounds, plus
/// eps = 1e-8 (1 + tr(H)/d) on the Hessian diagonal, reported through
/// `regularization` when non-null.
QpProblem assemble_tsid(const ControllerConfig& config, const RobotModel& model,
                        const RobotState& state, const std::vector<ExternalWrench>& f_hat,
                        const AssemblyOptions& options = {}, double* regularization = nullptr);

/// Whether the activation gate is open for the given state.
bool gate_open(const ControllerConfig& config, const RobotModel& model, const RobotState& state);

/// Assembles and solves one control tick. Owns its solver workspace.
///
/// The eps I term is re-centered on the previous iterate for
/// `kProximalPasses` extra solves (g <- g - eps z), which removes its bias
/// on the optimizer without touching the Hessian.
class Controller {
 public:
  Controller(ControllerConfig config, const RobotModel& model);

  /// Throws ControllerInfeasible if the hierarchical fallback also fails.
  ControlOutput step(const RobotState& state, const std::vector<ExternalWrench>& f_hat);

  const ControllerConfig& config() const { return config_; }
  ControllerConfig& config() { return config_; }
  const RobotModel& model() const { return model_; }

  static constexpr int kProximalPasses = 2;

 private:
  QpSolution solve(const QpProblem& qp, double eps);
  ControlOutput finish(const RobotState& state, const QpSolution& sol, bool gate,
                       bool fallback) const;

  ControllerConfig config_;
  const RobotModel& model_;
  QpSolver solver_;
};

ControlOutput controller_step(const ControllerConfig& config, const RobotModel& model,
                              const RobotState& state, const std::vector<ExternalWrench>& f_hat);

}  // namespace irwbc
