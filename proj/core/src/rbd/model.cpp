#include "irwbc/rbd/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "irwbc/errors.hpp"

namespace irwbc {

namespace {

constexpr double kAxisTolerance = 1e-10;
constexpr double kQuaternionTolerance = 1e-9;

using nlohmann::json;

}  // namespace

Mat3 SpatialInertia::inertia_about_com() const {
  // Parallel-axis theorem, shifted from the link origin to the com.
  return rot_inertia - mass * (com.squaredNorm() * Mat3::Identity() - com * com.transpose());
}

std::string_view to_string(JointKind kind) {
  switch (kind) {
    case JointKind::Revolute:
      return "revolute";
    case JointKind::Prismatic:
      return "prismatic";
    case JointKind::FreeBase:
      return "free_base";
  }
  return "unknown";
}

RobotModel::RobotModel(std::vector<Link> links, std::vector<Joint> joints,
                       std::vector<Frame> frames, std::optional<MatX> actuation,
                       Vec3 gravity)
    : links_(std::move(links)),
      joints_(std::move(joints)),
      frames_(std::move(frames)),
      gravity_(std::move(gravity)) {
  validate_and_index();
  if (actuation) {
    actuation_ = std::move(*actuation);
    if (actuation_.rows() != nv_) {
      throw ValidationError("actuation matrix has " + std::to_string(actuation_.rows()) +
                            " rows, expected n = " + std::to_string(nv_));
    }
    if (actuation_.cols() == 0 || !actuation_.allFinite()) {
      throw ValidationError("actuation matrix must be finite with at least one column");
    }
    Eigen::ColPivHouseholderQR<MatX> qr(actuation_);
    if (qr.rank() != actuation_.cols()) {
      throw ValidationError("actuation matrix does not have full column rank");
    }
  } else {
    actuation_ = MatX::Identity(nv_, nv_);
  }
}

void RobotModel::validate_and_index() {
  const int num_links = static_cast<int>(links_.size());
  if (num_links == 0) throw ValidationError("model has no links");

  for (const auto& link : links_) {
    const auto& in = link.inertia;
    if (!(in.mass > 0.0) || !std::isfinite(in.mass)) {
      throw ValidationError("link '" + link.name + "': mass must be positive");
    }
    if (!in.com.allFinite() || !in.rot_inertia.allFinite()) {
      throw ValidationError("link '" + link.name + "': non-finite inertial data");
    }
    if ((in.rot_inertia - in.rot_inertia.transpose()).norm() >= 1e-12) {
      throw ValidationError("link '" + link.name + "': rotational inertia not symmetric");
    }
    const double scale = std::max(1.0, in.rot_inertia.norm());
    const double tol = 1e-12 * scale;
    Eigen::SelfAdjointEigenSolver<Mat3> origin_eig(in.rot_inertia);
    if (origin_eig.eigenvalues().minCoeff() < -tol) {
      throw ValidationError("link '" + link.name + "': rotational inertia not positive semi-definite");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> com_eig(in.inertia_about_com());
    const Vec3 p = com_eig.eigenvalues();
    if (p.minCoeff() < -tol) {
      throw ValidationError("link '" + link.name + "': inertia about com not positive semi-definite");
    }
    if (p(0) + p(1) < p(2) - tol || p(0) + p(2) < p(1) - tol || p(1) + p(2) < p(0) - tol) {
      throw ValidationError("link '" + link.name + "': principal moments violate triangle inequality");
    }
  }

  int free_base_count = 0;
  for (auto& link : links_) link.parent_joint = -1;
  for (int j = 0; j < static_cast<int>(joints_.size()); ++j) {
    auto& joint = joints_[j];
    if (joint.child_link < 0 || joint.child_link >= num_links) {
      throw ValidationError("joint '" + joint.name + "': child link does not exist");
    }
    if (joint.parent_link < -1 || joint.parent_link >= num_links) {
      throw ValidationError("joint '" + joint.name + "': parent link does not exist");
    }
    if (joint.parent_link == joint.child_link) {
      throw ValidationError("joint '" + joint.name + "': link is its own parent");
    }
    auto& child = links_[joint.child_link];
    if (child.parent_joint != -1) {
      throw ValidationError("link '" + child.name + "' has more than one parent joint");
    }
    child.parent_joint = j;
    if (joint.lower > joint.upper) {
      throw ValidationError("joint '" + joint.name + "': lower limit exceeds upper limit");
    }
    if (joint.kind == JointKind::FreeBase) {
      ++free_base_count;
      if (joint.parent_link != -1) {
        throw ValidationError("joint '" + joint.name + "': free_base joint must attach to world");
      }
    } else if (std::abs(joint.axis.norm() - 1.0) > kAxisTolerance) {
      throw ValidationError("joint '" + joint.name + "': axis is not unit length");
    }
  }
  if (free_base_count > 1) throw ValidationError("model has more than one free_base joint");
  floating_ = free_base_count == 1;

  // Topological order; detects cycles (links unreachable from a root).
  std::vector<std::vector<int>> children(num_links);
  std::vector<int> roots;
  for (int l = 0; l < num_links; ++l) {
    const int pj = links_[l].parent_joint;
    if (pj < 0 || joints_[pj].parent_link < 0) {
      roots.push_back(l);
    } else {
      children[joints_[pj].parent_link].push_back(l);
    }
  }
  order_.clear();
  std::vector<int> stack(roots.rbegin(), roots.rend());
  while (!stack.empty()) {
    const int l = stack.back();
    stack.pop_back();
    order_.push_back(l);
    for (auto it = children[l].rbegin(); it != children[l].rend(); ++it) stack.push_back(*it);
  }
  if (static_cast<int>(order_.size()) != num_links) {
    for (int l = 0; l < num_links; ++l) {
      if (std::find(order_.begin(), order_.end(), l) == order_.end()) {
        throw ValidationError("link '" + links_[l].name + "' is part of a kinematic cycle");
      }
    }
  }

  if (floating_) {
    for (int l : roots) {
      const int pj = links_[l].parent_joint;
      if (pj < 0 || joints_[pj].kind != JointKind::FreeBase) {
        throw ValidationError("link '" + links_[l].name +
                              "': floating-base models must have the free_base link as the only root");
      }
      base_link_ = l;
    }
  }

  // Velocity indices: free base first, remaining joints in declaration order.
  nv_ = floating_ ? 6 : 0;
  num_joint_coords_ = 0;
  for (auto& joint : joints_) {
    if (joint.kind == JointKind::FreeBase) {
      joint.velocity_index = 0;
    } else {
      joint.velocity_index = nv_++;
      ++num_joint_coords_;
    }
  }

  support_.assign(num_links, {});
  for (int l : order_) {
    const int pj = links_[l].parent_joint;
    if (pj < 0) continue;
    const int parent = joints_[pj].parent_link;
    if (parent >= 0) support_[l] = support_[parent];
    support_[l].push_back(pj);
  }

  std::map<std::string, int> seen;
  for (const auto& frame : frames_) {
    if (frame.link < 0 || frame.link >= num_links) {
      throw ValidationError("frame '" + frame.name + "' is attached to a missing link");
    }
    if (!seen.emplace(frame.name, 0).second) {
      throw ValidationError("duplicate frame name '" + frame.name + "'");
    }
  }
  for (const auto& link : links_) {
    if (!seen.emplace(link.name, 0).second) {
      throw ValidationError("link name '" + link.name + "' collides with another link or frame");
    }
  }
  if (!gravity_.allFinite()) throw ValidationError("gravity must be finite");
}

Frame RobotModel::frame(std::string_view name) const {
  for (const auto& f : frames_) {
    if (f.name == name) return f;
  }
  for (int l = 0; l < static_cast<int>(links_.size()); ++l) {
    if (links_[l].name == name) return Frame{links_[l].name, l, Eigen::Isometry3d::Identity()};
  }
  throw UnknownFrame(std::string(name));
}

bool RobotModel::has_frame(std::string_view name) const {
  for (const auto& f : frames_) {
    if (f.name == name) return true;
  }
  return link_index(name) >= 0;
}

int RobotModel::link_index(std::string_view name) const {
  for (int l = 0; l < static_cast<int>(links_.size()); ++l) {
    if (links_[l].name == name) return l;
  }
  return -1;
}

RobotModel RobotModel::scaled_inertia(double factor) const {
  std::vector<Link> links = links_;
  for (auto& link : links) {
    link.inertia.mass *= factor;
    link.inertia.rot_inertia *= factor;
  }
  return RobotModel(std::move(links), joints_, frames_, actuation_, gravity_);
}

RobotState RobotState::neutral(const RobotModel& model) {
  RobotState s;
  s.q_joints = VecX::Zero(model.num_joint_coords());
  s.nu = VecX::Zero(model.nv());
  return s;
}

VecX RobotState::configuration_vector() const {
  if (!floating()) return q_joints;
  VecX q(7 + q_joints.size());
  q.head<3>() = base_position;
  q(3) = base_orientation.w();
  q(4) = base_orientation.x();
  q(5) = base_orientation.y();
  q(6) = base_orientation.z();
  q.tail(q_joints.size()) = q_joints;
  return q;
}

void check_state(const RobotModel& model, const RobotState& state) {
  if (state.q_joints.size() != model.num_joint_coords() || state.nu.size() != model.nv()) {
    throw ValidationError("state dimensions do not match the model (q_joints " +
                          std::to_string(state.q_joints.size()) + ", nu " +
                          std::to_string(state.nu.size()) + ")");
  }
  if (model.floating_base() &&
      std::abs(state.base_orientation.norm() - 1.0) > kQuaternionTolerance) {
    throw ValidationError("base quaternion is not unit length");
  }
}

RobotState retract(const RobotState& state, const Eigen::Ref<const VecX>& delta) {
  RobotState out = state;
  if (state.floating()) {
    out.base_position += delta.head<3>();
    out.base_orientation = (quat_exp(delta.segment<3>(3)) * state.base_orientation).normalized();
    out.q_joints += delta.tail(state.q_joints.size());
  } else {
    out.q_joints += delta;
  }
  return out;
}

// --------------------------------------------------------------------------
// JSON ingestion

namespace {

Vec3 read_vec3(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(what + ": expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ParseError(what + ": expected numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

Eigen::Isometry3d read_origin(const json& j, const std::string& what) {
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  if (j.is_null()) return T;
  if (!j.is_object()) throw ParseError(what + ": origin must be an object");
  if (j.contains("xyz")) T.translation() = read_vec3(j["xyz"], what + ".xyz");
  if (j.contains("rpy")) T.linear() = rpy_to_matrix(read_vec3(j["rpy"], what + ".rpy"));
  return T;
}

double read_number(const json& j, const char* key, double fallback, const std::string& what) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ParseError(what + "." + key + ": expected a number");
  return j[key].get<double>();
}

const std::string& read_string(const json& j, const char* key, const std::string& what) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw ParseError(what + ": missing string field '" + key + "'");
  }
  return j[key].get_ref<const std::string&>();
}

}  // namespace

RobotModel build_model(std::string_view description) {
  json doc;
  try {
    doc = json::parse(description.begin(), description.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("model file must be a JSON object");
  if (!doc.contains("links") || !doc["links"].is_array()) {
    throw ParseError("model file: missing 'links' array");
  }

  std::vector<Link> links;
  std::map<std::string, int> link_ids;
  for (const auto& jl : doc["links"]) {
    Link link;
    link.name = read_string(jl, "name", "link");
    const std::string what = "link '" + link.name + "'";
    if (!jl.contains("mass")) throw ParseError(what + ": missing mass");
    link.inertia.mass = read_number(jl, "mass", 0.0, what);
    if (jl.contains("com")) link.inertia.com = read_vec3(jl["com"], what + ".com");
    if (jl.contains("inertia")) {
      const auto& ji = jl["inertia"];
      if (!ji.is_array() || ji.size() != 6) {
        throw ParseError(what + ".inertia: expected [Ixx, Iyy, Izz, Ixy, Ixz, Iyz]");
      }
      double v[6];
      for (int i = 0; i < 6; ++i) {
        if (!ji[i].is_number()) throw ParseError(what + ".inertia: expected numbers");
        v[i] = ji[i].get<double>();
      }
      link.inertia.rot_inertia << v[0], v[3], v[4],  //
          v[3], v[1], v[5],                           //
          v[4], v[5], v[2];
    }
    if (!link_ids.emplace(link.name, static_cast<int>(links.size())).second) {
      throw ValidationError("duplicate link name '" + link.name + "'");
    }
    links.push_back(std::move(link));
  }

  auto lookup_link = [&](const std::string& name, const std::string& what) {
    if (name == "world") return -1;
    auto it = link_ids.find(name);
    if (it == link_ids.end()) throw ValidationError(what + ": unknown link '" + name + "'");
    return it->second;
  };

  std::vector<Joint> joints;
  if (doc.contains("joints")) {
    if (!doc["joints"].is_array()) throw ParseError("model file: 'joints' must be an array");
    for (const auto& jj : doc["joints"]) {
      Joint joint;
      joint.name = read_string(jj, "name", "joint");
      const std::string what = "joint '" + joint.name + "'";
      const std::string& kind = read_string(jj, "kind", what);
      if (kind == "revolute") {
        joint.kind = JointKind::Revolute;
      } else if (kind == "prismatic") {
        joint.kind = JointKind::Prismatic;
      } else if (kind == "free_base") {
        joint.kind = JointKind::FreeBase;
      } else {
        throw ParseError(what + ": unknown joint kind '" + kind + "'");
      }
      joint.parent_link = lookup_link(read_string(jj, "parent", what), what);
      joint.child_link = lookup_link(read_string(jj, "child", what), what);
      if (joint.child_link < 0) throw ValidationError(what + ": child cannot be world");
      if (joint.kind != JointKind::FreeBase) {
        if (!jj.contains("axis")) throw ParseError(what + ": missing axis");
        joint.axis = read_vec3(jj["axis"], what + ".axis");
      }
      if (jj.contains("origin")) joint.parent_transform = read_origin(jj["origin"], what + ".origin");
      if (jj.contains("limits")) {
        const auto& lim = jj["limits"];
        joint.lower = read_number(lim, "lower", joint.lower, what + ".limits");
        joint.upper = read_number(lim, "upper", joint.upper, what + ".limits");
        joint.effort = read_number(lim, "effort", joint.effort, what + ".limits");
      }
      joints.push_back(std::move(joint));
    }
  }

  std::vector<Frame> frames;
  if (doc.contains("frames")) {
    if (!doc["frames"].is_array()) throw ParseError("model file: 'frames' must be an array");
    for (const auto& jf : doc["frames"]) {
      Frame frame;
      frame.name = read_string(jf, "name", "frame");
      const std::string what = "frame '" + frame.name + "'";
      frame.link = lookup_link(read_string(jf, "parent", what), what);
      if (frame.link < 0) throw ValidationError(what + ": frames must attach to a link");
      if (jf.contains("origin")) frame.offset = read_origin(jf["origin"], what + ".origin");
      frames.push_back(std::move(frame));
    }
  }

  std::optional<MatX> actuation;
  if (doc.contains("actuation")) {
    const auto& ja = doc["actuation"];
    if (ja.is_string()) {
      if (ja.get<std::string>() != "identity") {
        throw ParseError("actuation: expected \"identity\" or a row-major matrix");
      }
    } else if (ja.is_array()) {
      const auto rows = static_cast<Eigen::Index>(ja.size());
      if (rows == 0 || !ja[0].is_array()) throw ParseError("actuation: expected array of rows");
      const auto cols = static_cast<Eigen::Index>(ja[0].size());
      MatX G(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (!ja[r].is_array() || static_cast<Eigen::Index>(ja[r].size()) != cols) {
          throw ParseError("actuation: ragged matrix rows");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
          if (!ja[r][c].is_number()) throw ParseError("actuation: expected numbers");
          G(r, c) = ja[r][c].get<double>();
        }
      }
      actuation = std::move(G);
    } else if (ja.is_object()) {
      const auto rows = ja.value("rows", 0);
      const auto cols = ja.value("cols", 0);
      if (!ja.contains("data") || !ja["data"].is_array() ||
          static_cast<int>(ja["data"].size()) != rows * cols || rows <= 0 || cols <= 0) {
        throw ParseError("actuation: object form needs rows, cols and rows*cols data");
      }
      MatX G(rows, cols);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) G(r, c) = ja["data"][r * cols + c].get<double>();
      }
      actuation = std::move(G);
    } else {
      throw ParseError("actuation: unsupported value");
    }
  }

  Vec3 gravity(0.0, 0.0, -9.81);
  if (doc.contains("gravity")) gravity = read_vec3(doc["gravity"], "gravity");

  return RobotModel(std::move(links), std::move(joints), std::move(frames), std::move(actuation),
                    gravity);
}

RobotModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return build_model(buffer.str());
}

}  // namespace irwbc
