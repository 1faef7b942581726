#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cebass/model.hpp"

namespace cebass {

/// Fixed point of the no-anomaly Kalman covariance recursion, plus the
/// predictive observation covariance at it. Used to pin the proposal scales.
struct SteadyState {
  Eigen::MatrixXd sigma_hat_limit;  // p x p predictive covariance limit
  Eigen::MatrixXd sigma_limit;      // q x q filtering covariance limit
  int iterations = 0;
  bool converged = false;
};

/// Iterate the covariance recursion (identity scales) from Sigma_0 = Sigma_I
/// until the sup-norm change drops below tol. Requires an observable model.
SteadyState steady_state(const StateSpaceModel& model, double tol = 1e-12, int max_iter = 100000);

/// Smallest k <= k_max such that [C; CA; ...; CA^k] has full column rank
/// (k = 0 when C alone suffices). Rank tolerance 1e-10 * largest singular
/// value. Throws UnobservableModelError if no k works.
int observability_index(const StateSpaceModel& model, int k_max = -1);

/// Balanced proposal scales evaluated at the steady-state predictive
/// covariance:
///   sigma_tilde_i = Sigma_A^(ii) (Sigma_hat^{-1})^(ii)
///   sigma_hat_j   = Sigma_I^(jj) (C^T Sigma_hat^{-1} C)^(jj)
/// sigma_hat entries for zero columns of C are undefined; those components
/// must get their scale from back-sampling windows instead.
struct ScaleCalibration {
  Eigen::VectorXd sigma_tilde;
  Eigen::VectorXd sigma_hat;            // NaN where undefined
  std::vector<bool> sigma_hat_defined;  // per state component
};
ScaleCalibration proposal_scales(const StateSpaceModel& model, const SteadyState& ss);

/// Smallest window length n (<= h_max) at which an innovative anomaly in
/// state component j becomes visible, i.e. some C A^m e_j with m < n is
/// non-zero. Returns 0 if the component never surfaces within h_max.
int min_visible_window(const StateSpaceModel& model, int j, int h_max);

/// Default horizon sets: windows {1, ..., k* + 1} at which component j is
/// visible. Components with a non-zero plain C column always include window
/// 1. Throws UnobservableModelError if some component ends up with an empty
/// set.
std::vector<std::vector<int>> default_horizons(const StateSpaceModel& model, int k_star);

/// Back-sampling variant of the innovative scales: per component the maximum
/// over its horizon set of Sigma_I^(jj) (C_aug^T Sigma_hat_aug^{-1}
/// C_aug)^(jj), evaluated at the steady state. Windows where the component is
/// invisible are skipped; an entirely invisible horizon set is an error.
Eigen::VectorXd backsample_innovation_scales(const StateSpaceModel& model, const SteadyState& ss,
                                             const std::vector<std::vector<int>>& horizons);

}  // namespace cebass
