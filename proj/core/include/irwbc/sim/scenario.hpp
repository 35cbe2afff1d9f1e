#pragma once

#include <functional>
#include <memory>

#include "irwbc/sim/simulator.hpp"

namespace irwbc {

/// Make/break cycle for the end-effector reference. The reference holds
/// `approach` for `settle` seconds, then repeats `contacts` times:
/// min-jerk transition to `push`, hold `push_dwell`, transition back, hold
/// `approach_dwell`.
struct ContactSchedule {
  int contacts = 0;
  std::string task;  ///< ee_pose task driven by the schedule; empty = first one
  Eigen::Isometry3d approach = Eigen::Isometry3d::Identity();
  Eigen::Isometry3d push = Eigen::Isometry3d::Identity();
  double settle = 1.0;
  double transition = 0.3;
  double push_dwell = 0.5;
  double approach_dwell = 0.7;

  /// Reference at time t.
  PoseTarget reference(double t) const;
  /// Times at which each approach-to-push transition starts.
  std::vector<double> push_starts() const;
};

/// Constant external wrench applied for [start, start + duration), unknown
/// to the controller.
struct ExternalPush {
  std::string frame;
  Vec6 wrench = Vec6::Zero();
  double start = 0.0;
  double duration = 0.0;
};

struct SimSettings {
  double dt = 1e-3;
  double duration = 1.0;
  double impact_window = 0.2;
  double error_threshold = 0.05;  ///< m, unreachable-reference detector
  double error_timeout = 1.0;     ///< s
};

enum class Variant { Nominal, ImpactRobust };

std::string_view to_string(Variant v);

struct Scenario {
  std::shared_ptr<const RobotModel> model;
  RobotState initial;
  std::vector<ContactSurface> surfaces;
  ControllerConfig controller;
  ImpactSpec impact;  ///< contact frame, normal used for H, lambda_bar, e
  ContactSchedule schedule;
  std::vector<ExternalPush> pushes;
  SimSettings sim;

  void validate() const;
  /// Controller configuration for a variant: nominal turns every
  /// impact-robust posture task into a nominal one.
  ControllerConfig controller_for(Variant v) const;
};

struct RunResult {
  TrajectoryLog log;
  Metrics metrics;
  std::vector<double> pre_push_errors;  ///< EE position error when each push starts
};

using RecordSink = std::function<void(const StepRecord&)>;

/// Runs floor(duration / dt) + 1 samples. Deterministic for a fixed scenario.
/// Throws ScenarioError when the EE error stays above the threshold for
/// longer than the timeout, NumericalBlowup when ||nu|| > 1e6.
RunResult run_scenario(const Scenario& scenario, Variant variant, const RecordSink& sink = {});

}  // namespace irwbc
