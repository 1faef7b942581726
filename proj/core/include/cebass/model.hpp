#pragma once

#include <Eigen/Dense>
#include <utility>

#include "cebass/linalg.hpp"

namespace cebass {

/// Linear-Gaussian state-space model
///
///   y_t = C x_t + V_t^{1/2} Sigma_A^{1/2} eps_t
///   x_t = A x_{t-1} + W_t^{1/2} Sigma_I^{1/2} nu_t
///
/// with diagonal noise covariances, stored as their diagonals. V_t and W_t
/// are per-step diagonal inflation factors (identity when nothing anomalous
/// is happening); see NoiseScales.
struct StateSpaceModel {
  Eigen::MatrixXd A;        // q x q state transition
  Eigen::MatrixXd C;        // p x q observation map
  Eigen::VectorXd obs_var;  // diagonal of Sigma_A, strictly positive
  Eigen::VectorXd inn_var;  // diagonal of Sigma_I, strictly positive

  Eigen::Index p() const { return C.rows(); }
  Eigen::Index q() const { return A.rows(); }

  /// Throws ConfigError on inconsistent dimensions or non-positive variances.
  void validate() const;
};

/// Conditional filtering distribution N(mean, cov) carried by each particle.
struct GaussianState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Diagonal inflation factors for one time step. At most one entry across
/// (V, W) differs from one: either nothing, or observation component i is
/// inflated to 1 + 1/precision (an additive outlier), or state component j is
/// (an innovative outlier). `precision` is the sampled inverse scale (the
/// V-tilde / W-tilde of the noise model).
class NoiseScales {
 public:
  enum class Kind { Typical, Additive, Innovative };

  static NoiseScales typical() { return NoiseScales(); }
  static NoiseScales additive(int component, double precision);
  static NoiseScales innovative(int component, double precision);

  Kind kind() const { return kind_; }
  int component() const { return component_; }
  double precision() const { return precision_; }

  /// Multiplier on obs_var[i].
  double obs_factor(Eigen::Index i) const {
    return (kind_ == Kind::Additive && i == component_) ? 1.0 + 1.0 / precision_ : 1.0;
  }
  /// Multiplier on inn_var[j].
  double inn_factor(Eigen::Index j) const {
    return (kind_ == Kind::Innovative && j == component_) ? 1.0 + 1.0 / precision_ : 1.0;
  }

  Eigen::VectorXd v_diag(Eigen::Index p) const;
  Eigen::VectorXd w_diag(Eigen::Index q) const;

 private:
  NoiseScales() = default;
  Kind kind_ = Kind::Typical;
  int component_ = -1;
  double precision_ = 0.0;
};

/// One conditional Kalman predict-update step under the given inflation.
/// Returns the posterior state (covariance symmetrised, Joseph form) and the
/// log predictive density of y under N(C A mu, C Sigma_p C^T + V Sigma_A)
/// with Sigma_p = A Sigma A^T + W Sigma_I.
std::pair<GaussianState, double> kalman_update(const Eigen::VectorXd& y,
                                               const GaussianState& state,
                                               const StateSpaceModel& model,
                                               const NoiseScales& scales);

/// Predictive variance of the next observation under no anomaly:
///   Sigma_hat = C A Sigma A^T C^T + Sigma_A + C Sigma_I C^T.
Eigen::MatrixXd predictive_variance(const GaussianState& state, const StateSpaceModel& model);

/// Same, with the factorisation attached (solves against Sigma_hat go
/// through the factor, never an explicit elementwise inverse).
struct PredictiveVariance {
  Eigen::MatrixXd sigma_hat;
  CholPsd chol;
};
PredictiveVariance predictive_variance_factored(const GaussianState& state,
                                                const StateSpaceModel& model);

}  // namespace cebass
