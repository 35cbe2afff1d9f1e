#include "scenario_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "irwbc/errors.hpp"
#include "irwbc/rbd/spatial.hpp"

namespace irwbc::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

VecX read_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + ": expected an array of numbers");
  VecX v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(what + ": expected an array of numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

// A scalar is broadcast to `size` entries.
VecX read_gain(const json& j, Eigen::Index size, const std::string& what) {
  if (j.is_number()) return VecX::Constant(size, j.get<double>());
  return read_vector(j, what);
}

Vec3 read_vec3(const json& j, const std::string& what) {
  const VecX v = read_vector(j, what);
  if (v.size() != 3) throw ParseError(what + ": expected 3 numbers");
  return v;
}

double read_number(const json& j, const char* key, double fallback, const std::string& what) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ParseError(what + "." + key + ": expected a number");
  return j[key].get<double>();
}

const json& require(const json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(what + ": missing '" + key + "'");
  return j[key];
}

Eigen::Isometry3d read_pose(const json& j, const std::string& what) {
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  if (j.contains("xyz")) T.translation() = read_vec3(j["xyz"], what + ".xyz");
  if (j.contains("rpy")) T.linear() = rpy_to_matrix(read_vec3(j["rpy"], what + ".rpy"));
  return T;
}

std::bitset<6> read_axes(const json& j, const std::string& what) {
  static const char* names[6] = {"x", "y", "z", "rx", "ry", "rz"};
  std::bitset<6> axes;
  if (!j.is_array()) throw ParseError(what + ": expected a list of axis names");
  for (const auto& a : j) {
    const std::string s = a.is_string() ? a.get<std::string>() : "";
    bool found = false;
    for (int r = 0; r < 6; ++r) {
      if (s == names[r]) {
        axes.set(r);
        found = true;
      }
    }
    if (!found) throw ParseError(what + ": unknown axis '" + s + "'");
  }
  return axes;
}

TaskKind read_kind(const std::string& s, const std::string& what) {
  if (s == "reduced_attitude") return TaskKind::ReducedAttitude;
  if (s == "ee_pose") return TaskKind::EePose;
  if (s == "posture_nominal") return TaskKind::PostureNominal;
  if (s == "posture_impact_robust") return TaskKind::PostureImpactRobust;
  if (s == "joint_space") return TaskKind::JointSpace;
  throw ParseError(what + ": unknown task kind '" + s + "'");
}

Task read_task(const json& j, const RobotModel& model, const ImpactSpec& impact,
               const std::string& what) {
  Task task;
  task.name = j.value("name", what);
  task.kind = read_kind(require(j, "kind", what).get<std::string>(), what);
  task.frame = j.value("frame", std::string());
  if (j.contains("axes")) task.axes = read_axes(j["axes"], what + ".axes");
  if (j.contains("z_desired")) task.z_desired = read_vec3(j["z_desired"], what + ".z_desired");
  if (j.contains("target")) task.pose_target.pose = read_pose(j["target"], what + ".target");

  const auto nj = static_cast<Eigen::Index>(model.num_joint_coords());
  if (j.contains("q_des")) task.joint_target.q = read_vector(j["q_des"], what + ".q_des");
  if (j.contains("qd_des")) task.joint_target.qd = read_vector(j["qd_des"], what + ".qd_des");
  if (j.contains("qdd_des")) task.joint_target.qdd = read_vector(j["qdd_des"], what + ".qdd_des");

  const Eigen::Index gain_dim = task.kind == TaskKind::EePose ? 6 : task.dimension(model);
  task.gains.kp = read_gain(require(j, "kp", what), gain_dim, what + ".kp");
  task.gains.kd = read_gain(require(j, "kd", what), gain_dim, what + ".kd");
  task.gains.weight = read_number(j, "weight", 1.0, what);
  task.gains.priority = j.value("priority", 3);
  task.active = j.value("active", true);

  if (task.kind == TaskKind::PostureImpactRobust) {
    task.impact_spec = impact;
    task.k_gradient = j.contains("k_gradient")
                          ? read_gain(j["k_gradient"], nj, what + ".k_gradient")
                          : VecX::Zero(nj);
    const std::string crit = j.value("criterion", std::string("directional"));
    if (crit == "frobenius") {
      task.criterion = RobustCriterion::Frobenius;
    } else if (crit != "directional") {
      throw ParseError(what + ": unknown criterion '" + crit + "'");
    }
  }
  if (j.contains("wrench_bounds")) {
    const VecX b = read_vector(j["wrench_bounds"], what + ".wrench_bounds");
    if (b.size() != 6) throw ParseError(what + ".wrench_bounds: expected 6 numbers");
    task.wrench_uncertainty = WrenchUncertainty(b);
  }
  return task;
}

void read_bounds(const json& j, Eigen::Index size, VecX& lo, VecX& hi, const std::string& what) {
  if (j.is_number()) {
    hi = VecX::Constant(size, j.get<double>());
    lo = -hi;
    return;
  }
  if (j.contains("lower")) lo = read_gain(j["lower"], size, what + ".lower");
  if (j.contains("upper")) hi = read_gain(j["upper"], size, what + ".upper");
}

ControllerConfig read_controller(const json& j, const RobotModel& model, const ImpactSpec& impact) {
  ControllerConfig config;
  const std::string mode = j.value("mode", std::string("hierarchical"));
  if (mode == "weighted") {
    config.mode = ControlMode::Weighted;
  } else if (mode != "hierarchical") {
    throw ParseError("controller.mode: expected 'weighted' or 'hierarchical'");
  }
  if (j.contains("u_bounds")) {
    read_bounds(j["u_bounds"], model.num_inputs(), config.u_lower, config.u_upper, "controller.u_bounds");
  }
  if (j.contains("nudot_bounds")) {
    read_bounds(j["nudot_bounds"], model.nv(), config.nudot_lower, config.nudot_upper,
                "controller.nudot_bounds");
  }
  if (j.contains("activation")) {
    const json& a = j["activation"];
    const std::string kind = a.is_string() ? a.get<std::string>() : a.value("kind", std::string("always"));
    if (kind == "distance") {
      config.activation.kind = Activation::Kind::DistanceTrigger;
      config.activation.frame = a.value("frame", impact.contact_frame());
      if (a.contains("plane_point")) config.activation.plane_point = read_vec3(a["plane_point"], "activation.plane_point");
      if (a.contains("plane_normal")) config.activation.plane_normal = read_vec3(a["plane_normal"], "activation.plane_normal");
      config.activation.d_act = read_number(a, "d_act", config.activation.d_act, "activation");
    } else if (kind != "always") {
      throw ParseError("controller.activation: expected 'always' or 'distance'");
    }
  }
  const json& tasks = require(j, "tasks", "controller");
  if (!tasks.is_array()) throw ParseError("controller.tasks: expected an array");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    config.tasks.push_back(read_task(tasks[i], model, impact, "controller.tasks[" + std::to_string(i) + "]"));
  }
  return config;
}

RobotState read_state(const json& j, const RobotModel& model) {
  RobotState s = RobotState::neutral(model);
  if (j.contains("q")) s.q_joints = read_vector(j["q"], "initial_state.q");
  if (j.contains("nu")) s.nu = read_vector(j["nu"], "initial_state.nu");
  if (j.contains("base_position")) s.base_position = read_vec3(j["base_position"], "initial_state.base_position");
  if (j.contains("base_orientation")) {
    const VecX q = read_vector(j["base_orientation"], "initial_state.base_orientation");
    if (q.size() != 4) throw ParseError("initial_state.base_orientation: expected [w, x, y, z]");
    s.base_orientation = Eigen::Quaterniond(q(0), q(1), q(2), q(3));
  }
  return s;
}

fs::path resolve(const std::string& p, const fs::path& base_dir) {
  const fs::path path(p);
  if (path.is_absolute() || fs::exists(path)) return path;
  return base_dir / path;
}

}  // namespace

LoadedScenario parse_scenario(const std::string& text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  try {
    LoadedScenario out;
    Scenario& sc = out.scenario;
    out.model_path = resolve(require(doc, "model", "scenario").get<std::string>(), base_dir);
    sc.model = std::make_shared<const RobotModel>(load_model(out.model_path.string()));
    const RobotModel& model = *sc.model;

    const json& ji = require(doc, "impact", "scenario");
    sc.impact = ImpactSpec(require(ji, "frame", "impact").get<std::string>(),
                           read_vec3(require(ji, "normal", "impact"), "impact.normal"),
                           read_number(ji, "lambda_bar", 0.0, "impact"),
                           read_number(ji, "restitution", 0.0, "impact"));

    sc.initial = doc.contains("initial_state") ? read_state(doc["initial_state"], model)
                                               : RobotState::neutral(model);
    if (doc.contains("surfaces")) {
      for (const auto& js : doc["surfaces"]) {
        ContactSurface s;
        s.point = read_vec3(require(js, "point", "surface"), "surface.point");
        s.normal = read_vec3(require(js, "normal", "surface"), "surface.normal");
        s.stiffness = read_number(js, "stiffness", s.stiffness, "surface");
        s.damping = read_number(js, "damping", s.damping, "surface");
        sc.surfaces.push_back(s);
      }
    }
    sc.controller = read_controller(require(doc, "controller", "scenario"), model, sc.impact);

    if (doc.contains("schedule")) {
      const json& js = doc["schedule"];
      ContactSchedule& sch = sc.schedule;
      sch.contacts = js.value("contacts", 0);
      sch.task = js.value("task", std::string());
      if (js.contains("approach")) sch.approach = read_pose(js["approach"], "schedule.approach");
      if (js.contains("push")) sch.push = read_pose(js["push"], "schedule.push");
      sch.settle = read_number(js, "settle", sch.settle, "schedule");
      sch.transition = read_number(js, "transition", sch.transition, "schedule");
      sch.push_dwell = read_number(js, "push_dwell", sch.push_dwell, "schedule");
      sch.approach_dwell = read_number(js, "approach_dwell", sch.approach_dwell, "schedule");
    }
    if (doc.contains("pushes")) {
      for (const auto& jp : doc["pushes"]) {
        ExternalPush p;
        p.frame = require(jp, "frame", "push").get<std::string>();
        const VecX w = read_vector(require(jp, "wrench", "push"), "push.wrench");
        if (w.size() != 6) throw ParseError("push.wrench: expected 6 numbers");
        p.wrench = w;
        p.start = read_number(jp, "start", 0.0, "push");
        p.duration = read_number(jp, "duration", 0.0, "push");
        sc.pushes.push_back(p);
      }
    }
    if (doc.contains("sim")) {
      const json& js = doc["sim"];
      sc.sim.dt = read_number(js, "dt", sc.sim.dt, "sim");
      sc.sim.duration = read_number(js, "duration", sc.sim.duration, "sim");
      sc.sim.impact_window = read_number(js, "impact_window", sc.sim.impact_window, "sim");
      sc.sim.error_threshold = read_number(js, "error_threshold", sc.sim.error_threshold, "sim");
      sc.sim.error_timeout = read_number(js, "error_timeout", sc.sim.error_timeout, "sim");
    }
    if (doc.contains("outputs")) {
      out.outputs.csv = doc["outputs"].value("csv", std::string());
      out.outputs.svg = doc["outputs"].value("svg", std::string());
    }
    sc.validate();
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
}

LoadedScenario load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.parent_path());
}

}  // namespace irwbc::cli
