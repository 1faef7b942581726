#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "cebass/model.hpp"
#include "cebass/proposals.hpp"

namespace cebass {

/// Stacked observation system over a window of n observations following a
/// filtering state at the window start. Block m of C_aug is C A^m
/// (m = 0..n-1) and Sigma_hat_aug is the exact joint covariance of the
/// window under identity noise scales:
///   cov(Y_a, Y_b) = C [A^a Sigma A^b^T + A^{a-b} S_{b-1}] C^T + delta_ab Sigma_A,
/// a >= b >= 1, with S_m the innovation accumulation sum_{u<=m} A^u Sigma_I A^u^T.
struct AugmentedSystem {
  int window = 0;                 // number of stacked observations (horizon)
  Eigen::MatrixXd c_aug;          // (n p) x q
  Eigen::MatrixXd sigma_hat_aug;  // (n p) x (n p)
  Eigen::VectorXd z_aug;          // stacked residual
  CholPsd chol;
  double quad = 0.0;
  double log_det = 0.0;
  Eigen::VectorXd ct_u;           // C_aug^T Sigma_hat_aug^{-1} z_aug
  Eigen::VectorXd ct_diag;        // diag(C_aug^T Sigma_hat_aug^{-1} C_aug)

  /// Column j carries no signal anywhere in the window.
  bool column_zero(int j) const { return !(ct_diag(j) > 0.0); }
};

/// Exact augmented system for `window_obs.size()` observations given the
/// filtering state at the step before the window.
AugmentedSystem build_augmented(const GaussianState& state, const StateSpaceModel& model,
                                std::span<const Eigen::VectorXd> window_obs);

/// Rank-one site for an innovative anomaly in state component j at the first
/// step of the window. The inflation direction is column j of C_aug: a unit
/// kick to state component j at the window start reaches each later
/// observation through C A^m.
RankOneSite backsample_site(int j, const AugmentedSystem& aug, const StateSpaceModel& model,
                            const HyperParams& hp);

/// A back-sampled innovative draw, annotated with the window length it was
/// proposed over.
struct BackSampleDraw {
  ProposalDraw draw;
  int window = 0;
};

/// M draws of an innovative anomaly at the start of the window for every
/// state component j whose horizon set contains this window length and whose
/// augmented column is non-zero (ill-defined components are skipped). The
/// stratification divisor is M * |B_j| and the weight carries the
/// (1 - sum r - sum s)^{window-1} factor for the anomaly-free remainder of
/// the window.
std::vector<BackSampleDraw> bs_inn(const GaussianState& state,
                                   std::span<const Eigen::VectorXd> window_obs,
                                   const StateSpaceModel& model, const HyperParams& hp, int m,
                                   const std::vector<std::vector<int>>& horizons, Rng& rng);

struct ReplayResult {
  GaussianState state;
  double window_log_lik = 0.0;  // sum of the per-step predictive log densities
};

/// Re-run the window's Kalman updates for a draw made at its first step: one
/// inflated update followed by window-1 typical updates.
ReplayResult replay_updates(const NoiseScales& scales, const GaussianState& state,
                            const StateSpaceModel& model,
                            std::span<const Eigen::VectorXd> window_obs);

/// Incrementally extended innovations-form pass over a growing window.
///
/// Maintains, per retained particle snapshot, everything a back-sampled
/// proposal needs at every horizon: the Gaussian quad/log-det of the stacked residual and the
/// per-component projections g_j, d_j. Extending by one observation costs
/// O(q^3), so back-sampling over horizon sets up to max(B) is linear rather
/// than cubic in the horizon. Agrees with build_augmented to close to
/// machine precision (see tests).
class WindowPass {
 public:
  WindowPass() = default;
  WindowPass(const GaussianState& state, const StateSpaceModel& model);

  void extend(const Eigen::VectorXd& y, const StateSpaceModel& model);

  int window() const { return window_; }
  double quad() const { return quad_; }
  double log_det() const { return log_det_; }
  double g(int j) const { return g_(j); }
  double d(int j) const { return d_(j); }
  int obs_dim() const { return obs_dim_; }

  RankOneSite site(int j, const StateSpaceModel& model, const HyperParams& hp) const;

 private:
  Eigen::MatrixXd pred_cov_;    // P_m
  Eigen::VectorXd state_mean_;  // predicted mean for the data stream
  Eigen::MatrixXd rhs_states_;  // q x q predicted pseudo-states, one per component
  Eigen::MatrixXd powers_;      // A^m, columnwise directions
  Eigen::VectorXd g_, d_;
  double quad_ = 0.0;
  double log_det_ = 0.0;
  int window_ = 0;
  int obs_dim_ = 0;
  // preallocated scratch for the single-observation fast path
  Eigen::VectorXd cp_, edir_;
  Eigen::MatrixXd tmp_qq_, tmp_qq2_;
};

}  // namespace cebass
