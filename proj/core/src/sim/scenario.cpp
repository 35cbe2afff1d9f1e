#include "irwbc/sim/scenario.hpp"

#include <cmath>

#include "irwbc/errors.hpp"
#include "detail/log.hpp"

namespace irwbc {

namespace {

struct MinJerk {
  double s, sd, sdd;
};

MinJerk min_jerk(double tau, double T) {
  const double x = std::clamp(tau / T, 0.0, 1.0);
  const double x2 = x * x, x3 = x2 * x;
  return {10 * x3 - 15 * x3 * x + 6 * x3 * x2, (30 * x2 - 60 * x3 + 30 * x3 * x) / T,
          (60 * x - 180 * x2 + 120 * x3) / (T * T)};
}

PoseTarget hold(const Eigen::Isometry3d& pose) {
  PoseTarget ref;
  ref.pose = pose;
  return ref;
}

PoseTarget interpolate(const Eigen::Isometry3d& a, const Eigen::Isometry3d& b, double tau, double T) {
  const MinJerk mj = min_jerk(tau, T);
  const Vec3 dp = b.translation() - a.translation();
  const Eigen::AngleAxisd rel(a.linear().transpose() * b.linear());
  const Vec3 axis_world = a.linear() * rel.axis();

  PoseTarget ref;
  ref.pose.translation() = a.translation() + mj.s * dp;
  ref.pose.linear() = a.linear() * Eigen::AngleAxisd(mj.s * rel.angle(), rel.axis()).toRotationMatrix();
  ref.twist << mj.sd * dp, mj.sd * rel.angle() * axis_world;
  ref.acceleration << mj.sdd * dp, mj.sdd * rel.angle() * axis_world;
  return ref;
}

int find_schedule_task(const ControllerConfig& config, const std::string& name) {
  for (std::size_t i = 0; i < config.tasks.size(); ++i) {
    const Task& task = config.tasks[i];
    if (task.kind != TaskKind::EePose) continue;
    if (name.empty() || task.name == name) return static_cast<int>(i);
  }
  return -1;
}

Vec3 rotate_about_x(const Vec3& v, double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitX()) * v;
}

}  // namespace

PoseTarget ContactSchedule::reference(double t) const {
  if (t < settle || contacts <= 0) return hold(approach);
  const double cycle = 2.0 * transition + push_dwell + approach_dwell;
  const double local = t - settle;
  const auto i = static_cast<int>(std::floor(local / cycle));
  if (i >= contacts) return hold(approach);
  const double tau = local - i * cycle;
  if (tau < transition) return interpolate(approach, push, tau, transition);
  if (tau < transition + push_dwell) return hold(push);
  if (tau < 2.0 * transition + push_dwell) {
    return interpolate(push, approach, tau - transition - push_dwell, transition);
  }
  return hold(approach);
}

std::vector<double> ContactSchedule::push_starts() const {
  std::vector<double> out;
  const double cycle = 2.0 * transition + push_dwell + approach_dwell;
  for (int i = 0; i < contacts; ++i) out.push_back(settle + i * cycle);
  return out;
}

std::string_view to_string(Variant v) {
  return v == Variant::Nominal ? "nominal" : "robust";
}

void Scenario::validate() const {
  if (!model) throw ValidationError("scenario has no model");
  check_state(*model, initial);
  for (const auto& s : surfaces) s.validate();
  controller.validate(*model);
  if (!model->has_frame(impact.contact_frame())) throw UnknownFrame(impact.contact_frame());
  if (!(sim.dt > 0.0) || !std::isfinite(sim.dt)) throw ValidationError("sim.dt must be positive");
  if (!(sim.duration > 0.0) || !std::isfinite(sim.duration)) {
    throw ValidationError("sim.duration must be positive");
  }
  if (!(sim.impact_window >= 0.0)) throw ValidationError("sim.impact_window must be non-negative");
  if (schedule.contacts < 0) throw ValidationError("schedule.contacts must be non-negative");
  if (schedule.settle < 0.0 || schedule.push_dwell < 0.0 || schedule.approach_dwell < 0.0) {
    throw ValidationError("schedule times must be non-negative");
  }
  if (schedule.contacts > 0) {
    if (!(schedule.transition > 0.0)) throw ValidationError("schedule.transition must be positive");
    if (find_schedule_task(controller, schedule.task) < 0) {
      throw ValidationError("schedule needs an ee_pose task" +
                            (schedule.task.empty() ? std::string() : " named '" + schedule.task + "'"));
    }
  }
  for (const auto& p : pushes) {
    if (!model->has_frame(p.frame)) throw UnknownFrame(p.frame);
    if (!(p.duration >= 0.0) || !p.wrench.allFinite()) throw ValidationError("invalid external push");
  }
}

ControllerConfig Scenario::controller_for(Variant v) const {
  ControllerConfig config = controller;
  if (v == Variant::Nominal) {
    for (auto& task : config.tasks) {
      if (task.kind == TaskKind::PostureImpactRobust) task.kind = TaskKind::PostureNominal;
    }
  }
  return config;
}

RunResult run_scenario(const Scenario& scenario, Variant variant, const RecordSink& sink) {
  scenario.validate();
  const RobotModel& model = *scenario.model;
  Controller controller(scenario.controller_for(variant), model);

  const int ee = find_schedule_task(controller.config(), scenario.schedule.task);
  ContactSettings contact;
  contact.frame = scenario.impact.contact_frame();
  contact.restitution = scenario.impact.restitution();
  contact.lambda_cap = scenario.impact.lambda_bar();
  contact.metric_normal = scenario.impact.normal();

  const double dt = scenario.sim.dt;
  const auto steps = static_cast<long>(std::floor(scenario.sim.duration / dt + 1e-9));
  std::vector<long> push_steps;
  for (double t : scenario.schedule.push_starts()) push_steps.push_back(std::lround(t / dt));

  RunResult result;
  result.log.dt = dt;
  result.log.records.reserve(static_cast<std::size_t>(steps + 1));
  RobotState state = scenario.initial;
  Vec3 previous_force = Vec3::Zero();
  double error_time = 0.0;
  std::size_t next_push = 0;

  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (ee >= 0) {
      Task& task = controller.config().tasks[static_cast<std::size_t>(ee)];
      task.pose_target = scenario.schedule.reference(t);
      Vec3 err = task.pose_target.pose.translation() -
                 frame_kinematics(model, state, task.frame).pose.translation();
      for (int r = 0; r < 3; ++r) {
        if (!task.axes.test(r)) err(r) = 0.0;
      }
      const double e = err.norm();
      if (next_push < push_steps.size() && k == push_steps[next_push]) {
        result.pre_push_errors.push_back(e);
        ++next_push;
      }
      error_time = e > scenario.sim.error_threshold ? error_time + dt : 0.0;
      if (error_time > scenario.sim.error_timeout) {
        throw ScenarioError("end-effector reference unreachable: error " + std::to_string(e) +
                            " m for more than " + std::to_string(scenario.sim.error_timeout) + " s");
      }
    }

    std::vector<ExternalWrench> push;
    for (const auto& p : scenario.pushes) {
      if (t >= p.start && t < p.start + p.duration) push.push_back({p.frame, p.wrench});
    }

    StepResult res;
    try {
      res = step(model, state, controller, scenario.surfaces, contact, t, dt, previous_force, push);
    } catch (const UndefinedShortestRotation&) {
      log::warn("antipodal tilt reference at t = {}; perturbing desired axis by 1e-6 rad", t);
      for (auto& task : controller.config().tasks) {
        if (task.kind == TaskKind::ReducedAttitude) task.z_desired = rotate_about_x(task.z_desired, 1e-6);
      }
      res = step(model, state, controller, scenario.surfaces, contact, t, dt, previous_force, push);
    }

    if (sink) sink(res.record);
    result.log.records.push_back(std::move(res.record));
    if (res.impact) result.log.events.push_back(std::move(*res.impact));
    previous_force = res.contact_force;
    state = std::move(res.state);
  }

  result.metrics = compute_metrics(result.log, scenario.sim.impact_window);
  return result;
}

}  // namespace irwbc
