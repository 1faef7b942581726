#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cebass/model.hpp"
#include "cebass/rng.hpp"

namespace cebass {
class Rng;

/// Anomaly priors and proposal shapes/scales.
///
/// Per observation component i: an additive anomaly occurs with probability
/// r[i] and its precision is drawn from sigma_tilde[i] * Gamma(a[i], a[i]).
/// Per state component j: an innovative anomaly occurs with probability s[j]
/// with precision from sigma_hat[j] * Gamma(b[j], b[j]). The probabilities
/// must leave positive mass for typical behaviour: sum(r) + sum(s) < 1.
///
/// log_r / log_s are kept separately so that extreme transforms (see
/// autocorrelation_adjusted) stay finite in log space even when the linear
/// probabilities underflow.
struct HyperParams {
  Eigen::VectorXd r, s;
  Eigen::VectorXd a, b;
  Eigen::VectorXd sigma_tilde, sigma_hat;
  Eigen::VectorXd log_r, log_s;
  // cached weight prefactors: log prob + lgamma(shape+1/2) - lgamma(shape)
  // + shape log shape + log sqrt(scale), per component
  Eigen::VectorXd add_prefactor, inn_prefactor;

  static HyperParams make(Eigen::VectorXd r, Eigen::VectorXd s, Eigen::VectorXd a,
                          Eigen::VectorXd b, Eigen::VectorXd sigma_tilde,
                          Eigen::VectorXd sigma_hat);

  /// Defaults: a = b = 3, r_i = s_j = 1e-3 / (p + q), unit scales (callers
  /// overwrite the scales from calibration).
  static HyperParams defaults(Eigen::Index p, Eigen::Index q);

  /// log(1 - sum r - sum s), the typical-step prior factor.
  double log_typical_prob() const;

  /// For strongly autocorrelated data the per-step anomaly probabilities are
  /// raised to the power 1/(1 - rho). Applied in log space.
  HyperParams autocorrelation_adjusted(double rho) const;

  void validate() const;
};

/// One proposed particle: the sampled inflation, its exact log importance
/// weight (target over proposal, all constants included so candidate-weight
/// sums estimate the per-step evidence), and which component produced it
/// (-1 for the typical draw).
struct ProposalDraw {
  NoiseScales scales = NoiseScales::typical();
  double log_weight = 0.0;
  int source_index = -1;
};

/// Work shared across all of one particle's descendants for one observation:
/// the predictive covariance factorisation and the residual projections.
/// Everything downstream is read-only; safe to use concurrently.
struct ProposalContext {
  Eigen::VectorXd z;           // y - C A mu
  Eigen::MatrixXd sigma_hat;   // C(A Sigma A^T + Sigma_I)C^T + Sigma_A
  CholPsd chol;
  Eigen::MatrixXd sigma_hat_inv;
  Eigen::VectorXd u;           // Sigma_hat^{-1} z
  double quad = 0.0;           // z^T Sigma_hat^{-1} z
  Eigen::VectorXd ct_u;        // C^T Sigma_hat^{-1} z
  Eigen::VectorXd ct_diag;     // diag(C^T Sigma_hat^{-1} C)

  static ProposalContext make(const GaussianState& state, const Eigen::VectorXd& y,
                              const StateSpaceModel& model);
};

/// A rank-one anomaly site: the scalar geometry shared by the additive,
/// innovative and back-sampled cases. The target covariance under an anomaly
/// of precision X is Sigma_hat + (c_noise / X) * v v^T with g = v^T
/// Sigma_hat^{-1} z and d = v^T Sigma_hat^{-1} v, v the inflation direction.
struct RankOneSite {
  double g = 0.0;            // direction-projected residual
  double d = 0.0;            // direction information
  double c_noise = 0.0;      // base noise variance of the component
  double sigma_scale = 0.0;  // proposal prior scale (sigma_tilde / sigma_hat)
  double shape = 0.0;        // prior shape (a_i / b_j)
  double prefactor = 0.0;    // cached prior and Gamma-constant terms
  // ambient Gaussian pieces of the window the site lives in
  double quad = 0.0;
  double log_det = 0.0;
  int obs_dim = 0;

  double zeta() const { return g / d; }
  /// Rate of the conjugate Gamma proposal: shape + sigma * zeta^2 / (2 c).
  double proposal_rate() const;
  /// Draw the precision: sigma_scale * Gamma(shape + 1/2, proposal_rate).
  double sample_precision(Rng& rng) const;
  /// log density of the proposal at precision x.
  double proposal_log_pdf(double x) const;
  /// Exact log importance weight at precision x. log_m_eff is the log of the
  /// stratification divisor (M, or M * |B_j| for back-samples);
  /// extra_log_prior carries the (1 - sum r - sum s)^k window factor.
  double log_weight(double x, double log_m_eff, double extra_log_prior = 0.0) const;
};

RankOneSite additive_site(int i, const ProposalContext& ctx, const StateSpaceModel& model,
                          const HyperParams& hp);
/// Requires column i of C non-zero (d > 0); throws ConfigError otherwise.
RankOneSite innovative_site(int j, const ProposalContext& ctx, const StateSpaceModel& model,
                            const HyperParams& hp);

/// Stratum draws. sample_typical is deterministic: identity scales,
/// weight (1 - sum r - sum s) N(z; 0, Sigma_hat).
ProposalDraw sample_typical(const ProposalContext& ctx, const HyperParams& hp);
ProposalDraw sample_additive_component(int i, const ProposalContext& ctx,
                                       const StateSpaceModel& model, const HyperParams& hp,
                                       int m_eff, Rng& rng);
ProposalDraw sample_innovative_component(int j, const ProposalContext& ctx,
                                         const StateSpaceModel& model, const HyperParams& hp,
                                         int m_eff, Rng& rng);

/// Full descendant set for one particle and one observation: one typical draw
/// plus M per additive component and M per innovative component, i.e.
/// M (p + q) + 1 draws. Draw order is fixed (typical, additive by component
/// then repetition, innovative likewise) so a forked rng reproduces exactly.
std::vector<ProposalDraw> sample_particles(const GaussianState& state, const Eigen::VectorXd& y,
                                           const StateSpaceModel& model, const HyperParams& hp,
                                           int m, Rng& rng);

}  // namespace cebass
