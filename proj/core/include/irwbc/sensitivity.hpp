#pragma once

#include <bitset>
#include <functional>
#include <string>
#include <vector>

#include "irwbc/rbd/dynamics.hpp"

namespace irwbc {

/// Rows of a 6-row contact Jacobian ([linear; angular]) that enter Gamma.
using ContactRows = std::bitset<6>;
inline const ContactRows kForceRows{0b000111};
inline const ContactRows kWrenchRows{0b111111};

/// An anticipated impact: where it happens, along which world direction, and
/// how large the impulse can be.
class ImpactSpec {
 public:
  ImpactSpec() = default;
  /// Normalizes `normal`; throws ValidationError for a degenerate normal,
  /// negative bound or restitution outside [0, 1].
  ImpactSpec(std::string contact_frame, const Vec3& normal, double lambda_bar,
             double restitution);

  const std::string& contact_frame() const { return frame_; }
  const Vec3& normal() const { return normal_; }
  double lambda_bar() const { return lambda_bar_; }
  double restitution() const { return restitution_; }

 private:
  std::string frame_;
  Vec3 normal_ = Vec3::UnitZ();
  double lambda_bar_ = 0.0;
  double restitution_ = 0.0;
};

/// Per-axis bounds on the contact wrench error; the ellipsoid kernel is
/// diag(bounds^2).
struct WrenchUncertainty {
  Vec6 bounds = Vec6::Zero();

  explicit WrenchUncertainty(const Vec6& b);
  /// Kernel restricted to the selected rows, in row order.
  MatX kernel(const ContactRows& rows = kForceRows) const;
};

struct EllipsoidStats {
  MatX h_gamma;
  VecX eigenvalues;  ///< descending, clamped at zero
  double frobenius = 0.0;
  double lambda_max = 0.0;
  int rank = 0;
};

struct RobustnessReport {
  MatX gamma;       ///< n x 3 (force rows) Gamma(q)
  Mat3 lambda_c;    ///< J_c M^-2 J_c^T
  double h = 0.0;   ///< n^T Lambda_c n
  double worst_case_jump_sq = 0.0;
};

struct ImpactJump {
  RobotState after;
  VecX delta_nu;
  bool bound_violated = false;
};

/// Boolean mask over the configuration tangent space (size nv).
using DofMask = std::vector<bool>;

/// Joint coordinates only; excludes floating-base coordinates.
DofMask joints_only_mask(const RobotModel& model);

/// Selected rows of the world-aligned contact Jacobian.
MatX contact_jacobian(const RobotModel& model, const RobotState& state,
                      const std::string& contact_frame, const ContactRows& rows = kForceRows);

/// Gamma = M^-1 J_c^T over the selected rows (n x rows).
MatX sensitivity_matrix(const RobotModel& model, const RobotState& state,
                        const std::string& contact_frame, const ContactRows& rows = kForceRows);

/// Statistics of a symmetric PSD matrix: descending eigenvalues, Frobenius
/// norm, largest eigenvalue, numerical rank.
EllipsoidStats ellipsoid_stats(const MatX& h_gamma);

/// H_Gamma = Gamma W_e Gamma^T for the wrench-error ellipsoid.
EllipsoidStats wrench_ellipsoid(const RobotModel& model, const RobotState& state,
                                const std::string& contact_frame, const WrenchUncertainty& unc,
                                const ContactRows& rows = kForceRows);

/// Rank-one ellipsoid for a known impact direction with magnitude bound:
/// H_Gamma = lambda_bar^2 (Gamma n)(Gamma n)^T.
EllipsoidStats directional_ellipsoid(const RobotModel& model, const RobotState& state,
                                     const ImpactSpec& spec);

/// Gamma, dynamic impact ellipsoid and the impact-robustness metric H.
RobustnessReport robustness_metric(const RobotModel& model, const RobotState& state,
                                   const ImpactSpec& spec);

/// H(q) = ||M^-1 J_c^T n||^2 alone.
double impact_metric(const RobotModel& model, const RobotState& state, const ImpactSpec& spec);

/// Effective inverse mass along n: n^T J_c M^-1 J_c^T n.
double inverse_effective_mass(const RobotModel& model, const RobotState& state,
                              const ImpactSpec& spec);

/// Finite-difference step used for tangent coordinate i.
double gradient_step(const RobotState& state, int tangent_index);

/// Central finite-difference gradient of f over the masked tangent
/// coordinates; unmasked entries are zero.
VecX tangent_gradient(const RobotState& state, const DofMask& mask,
                      const std::function<double(const RobotState&)>& f);

/// Gradient of H over the masked tangent coordinates.
VecX metric_gradient(const RobotModel& model, const RobotState& state, const ImpactSpec& spec,
                     const DofMask& mask);
VecX metric_gradient(const RobotModel& model, const RobotState& state, const ImpactSpec& spec);

/// Gradient of ||H_Gamma||_F for the wrench-error ellipsoid.
VecX frobenius_gradient(const RobotModel& model, const RobotState& state,
                        const std::string& contact_frame, const WrenchUncertainty& unc,
                        const DofMask& mask, const ContactRows& rows = kForceRows);

/// Rigid impact: configuration unchanged, nu+ = nu- + Gamma n lambda.
/// Impulses beyond lambda_bar are applied but flagged.
ImpactJump impact_velocity_jump(const RobotModel& model, const RobotState& state,
                                const ImpactSpec& spec, double lambda);

}  // namespace irwbc
