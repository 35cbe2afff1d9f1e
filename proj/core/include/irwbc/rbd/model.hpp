#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "irwbc/rbd/spatial.hpp"

namespace irwbc {

/// Mass properties of one link, expressed in the link frame. The rotational
/// inertia is taken about the link-frame origin (not the centre of mass).
struct SpatialInertia {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 rot_inertia = Mat3::Zero();

  /// Rotational inertia about the centre of mass, link axes.
  Mat3 inertia_about_com() const;
};

enum class JointKind { Revolute, Prismatic, FreeBase };

std::string_view to_string(JointKind kind);

struct Joint {
  std::string name;
  JointKind kind = JointKind::Revolute;
  Vec3 axis = Vec3::UnitZ();
  /// Pose of the joint frame in the parent link frame.
  Eigen::Isometry3d parent_transform = Eigen::Isometry3d::Identity();
  double lower = -1e300;
  double upper = 1e300;
  double effort = 1e300;
  int parent_link = -1;  ///< -1 means world
  int child_link = -1;
  /// First index of this joint in the generalized velocity.
  int velocity_index = 0;
  int dof() const { return kind == JointKind::FreeBase ? 6 : 1; }
};

struct Link {
  std::string name;
  SpatialInertia inertia;
  int parent_joint = -1;  ///< -1: welded to world at the identity pose
};

struct Frame {
  std::string name;
  int link = -1;
  Eigen::Isometry3d offset = Eigen::Isometry3d::Identity();
};

/// Immutable articulated-body description.
///
/// Generalized velocity layout: [v_base(3); w_base(3); qdot_joints] for a
/// floating base, with base velocities world-aligned at the base origin;
/// [qdot_joints] for a fixed base.
class RobotModel {
 public:
  RobotModel(std::vector<Link> links, std::vector<Joint> joints,
             std::vector<Frame> frames, std::optional<MatX> actuation,
             Vec3 gravity);

  bool floating_base() const { return floating_; }
  /// Dimension n of the generalized velocity.
  int nv() const { return nv_; }
  /// Number of actuated joint coordinates (excludes the free base).
  int num_joint_coords() const { return num_joint_coords_; }
  /// Number of control inputs m.
  int num_inputs() const { return static_cast<int>(actuation_.cols()); }
  /// Index of the first joint coordinate in the generalized velocity.
  int joint_offset() const { return floating_ ? 6 : 0; }

  const std::vector<Link>& links() const { return links_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<Frame>& frames() const { return frames_; }
  const MatX& actuation() const { return actuation_; }
  const Vec3& gravity() const { return gravity_; }
  /// Links sorted so that every parent precedes its children.
  const std::vector<int>& topological_order() const { return order_; }
  /// Root link of the floating base, or -1.
  int base_link() const { return base_link_; }

  /// Explicit frames first, then link names as implicit frames.
  Frame frame(std::string_view name) const;
  bool has_frame(std::string_view name) const;
  int link_index(std::string_view name) const;

  /// Links whose joint columns influence the motion of `link` (ancestors and
  /// the link itself), as joint indices.
  const std::vector<int>& support(int link) const { return support_[link]; }

  /// Copy with every link's mass and rotational inertia multiplied by factor.
  RobotModel scaled_inertia(double factor) const;

 private:
  void validate_and_index();

  std::vector<Link> links_;
  std::vector<Joint> joints_;
  std::vector<Frame> frames_;
  MatX actuation_;
  Vec3 gravity_;
  std::vector<int> order_;
  std::vector<std::vector<int>> support_;
  bool floating_ = false;
  int base_link_ = -1;
  int nv_ = 0;
  int num_joint_coords_ = 0;
};

/// Configuration and generalized velocity. Base fields are ignored for
/// fixed-base models.
struct RobotState {
  Vec3 base_position = Vec3::Zero();
  Eigen::Quaterniond base_orientation = Eigen::Quaterniond::Identity();
  VecX q_joints;
  VecX nu;

  bool floating() const { return nu.size() == q_joints.size() + 6; }

  /// Zero configuration and velocity for the given model.
  static RobotState neutral(const RobotModel& model);

  /// Flat configuration vector: [px,py,pz,qw,qx,qy,qz, joints] (floating)
  /// or [joints].
  VecX configuration_vector() const;
};

/// Throws ValidationError when the state does not fit the model or the base
/// quaternion is not unit length.
void check_state(const RobotModel& model, const RobotState& state);

/// Applies a tangent displacement [dp(3); dtheta(3); dq_joints] (floating) or
/// [dq_joints] (fixed). Base orientation moves by the world-frame exponential
/// map.
RobotState retract(const RobotState& state, const Eigen::Ref<const VecX>& delta);

/// Parses the JSON model description. Throws ParseError or ValidationError.
RobotModel build_model(std::string_view description);

/// Reads and parses a model file.
RobotModel load_model(const std::string& path);

}  // namespace irwbc
