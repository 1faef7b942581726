#include "cebass/backsampling.hpp"

#include <cmath>

#include "cebass/errors.hpp"

namespace cebass {

AugmentedSystem build_augmented(const GaussianState& state, const StateSpaceModel& model,
                                std::span<const Eigen::VectorXd> window_obs) {
  const int n = static_cast<int>(window_obs.size());
  if (n < 1) throw ConfigError("build_augmented: window must contain at least one observation");
  const Eigen::Index p = model.p();
  const Eigen::Index q = model.q();

  // powers A^0..A^n and innovation accumulations S_m = sum_{u<=m} A^u Sigma_I A^u^T
  std::vector<Eigen::MatrixXd> a_pow(n + 1);
  a_pow[0] = Eigen::MatrixXd::Identity(q, q);
  for (int m = 1; m <= n; ++m) a_pow[m] = model.A * a_pow[m - 1];
  std::vector<Eigen::MatrixXd> s_acc(n);
  s_acc[0] = Eigen::MatrixXd(model.inn_var.asDiagonal());
  for (int m = 1; m < n; ++m) {
    s_acc[m] = s_acc[m - 1] + a_pow[m] * model.inn_var.asDiagonal() * a_pow[m].transpose();
  }

  AugmentedSystem aug;
  aug.window = n;
  aug.c_aug.resize(n * p, q);
  for (int m = 0; m < n; ++m) aug.c_aug.middleRows(m * p, p) = model.C * a_pow[m];

  aug.sigma_hat_aug.resize(n * p, n * p);
  for (int a = 1; a <= n; ++a) {
    for (int b = 1; b <= a; ++b) {
      Eigen::MatrixXd inner =
          a_pow[a] * state.cov * a_pow[b].transpose() + a_pow[a - b] * s_acc[b - 1];
      Eigen::MatrixXd block = model.C * inner * model.C.transpose();
      if (a == b) block.diagonal() += model.obs_var;
      aug.sigma_hat_aug.block((a - 1) * p, (b - 1) * p, p, p) = block;
      if (a != b) aug.sigma_hat_aug.block((b - 1) * p, (a - 1) * p, p, p) = block.transpose();
    }
  }
  aug.sigma_hat_aug = symmetrized(aug.sigma_hat_aug);

  aug.z_aug.resize(n * p);
  const Eigen::VectorXd a_mu = model.A * state.mean;
  for (int m = 0; m < n; ++m) {
    if (window_obs[m].size() != p) throw ConfigError("build_augmented: observation dimension mismatch");
    aug.z_aug.segment(m * p, p) = window_obs[m] - aug.c_aug.middleRows(m * p, p) * a_mu;
  }

  aug.chol = CholPsd(aug.sigma_hat_aug, "augmented predictive covariance");
  Eigen::VectorXd u = aug.chol.solve(aug.z_aug);
  aug.quad = aug.z_aug.dot(u);
  aug.log_det = aug.chol.log_det();
  aug.ct_u = aug.c_aug.transpose() * u;
  Eigen::MatrixXd half = aug.chol.llt().matrixL().solve(aug.c_aug);
  aug.ct_diag = half.colwise().squaredNorm();
  return aug;
}

RankOneSite backsample_site(int j, const AugmentedSystem& aug, const StateSpaceModel& model,
                            const HyperParams& hp) {
  if (aug.column_zero(j)) {
    throw ConfigError("back-sampling: augmented column " + std::to_string(j + 1) +
                      " is zero at window " + std::to_string(aug.window));
  }
  RankOneSite site;
  site.g = aug.ct_u(j);
  site.d = aug.ct_diag(j);
  site.c_noise = model.inn_var(j);
  site.sigma_scale = hp.sigma_hat(j);
  site.shape = hp.b(j);
  site.prefactor = hp.inn_prefactor(j);
  site.quad = aug.quad;
  site.log_det = aug.log_det;
  site.obs_dim = static_cast<int>(aug.z_aug.size());
  return site;
}

std::vector<BackSampleDraw> bs_inn(const GaussianState& state,
                                   std::span<const Eigen::VectorXd> window_obs,
                                   const StateSpaceModel& model, const HyperParams& hp, int m,
                                   const std::vector<std::vector<int>>& horizons, Rng& rng) {
  const int n = static_cast<int>(window_obs.size());
  if (static_cast<Eigen::Index>(horizons.size()) != model.q()) {
    throw ConfigError("bs_inn: one horizon set per state component required");
  }
  const AugmentedSystem aug = build_augmented(state, model, window_obs);
  const double extra_prior = (n - 1) * hp.log_typical_prob();

  std::vector<BackSampleDraw> out;
  for (int j = 0; j < model.q(); ++j) {
    const auto& bj = horizons[static_cast<std::size_t>(j)];
    if (std::find(bj.begin(), bj.end(), n) == bj.end()) continue;
    if (aug.column_zero(j)) continue;  // invisible at this window; skipped
    const RankOneSite site = backsample_site(j, aug, model, hp);
    const double log_m_eff = std::log(static_cast<double>(m) * static_cast<double>(bj.size()));
    for (int k = 0; k < m; ++k) {
      BackSampleDraw bsd;
      bsd.window = n;
      const double precision = site.sample_precision(rng);
      bsd.draw.scales = NoiseScales::innovative(j, precision);
      bsd.draw.source_index = j;
      bsd.draw.log_weight = site.log_weight(precision, log_m_eff, extra_prior);
      out.push_back(std::move(bsd));
    }
  }
  return out;
}

ReplayResult replay_updates(const NoiseScales& scales, const GaussianState& state,
                            const StateSpaceModel& model,
                            std::span<const Eigen::VectorXd> window_obs) {
  ReplayResult res;
  res.state = state;
  for (std::size_t i = 0; i < window_obs.size(); ++i) {
    const NoiseScales& step_scales = (i == 0) ? scales : NoiseScales::typical();
    auto [next, log_lik] = kalman_update(window_obs[i], res.state, model, step_scales);
    res.state = std::move(next);
    res.window_log_lik += log_lik;
  }
  return res;
}

WindowPass::WindowPass(const GaussianState& state, const StateSpaceModel& model) {
  const Eigen::Index q = model.q();
  pred_cov_ = symmetrized(model.A * state.cov * model.A.transpose());
  pred_cov_.diagonal() += model.inn_var;
  state_mean_ = model.A * state.mean;
  rhs_states_ = Eigen::MatrixXd::Zero(q, q);
  powers_ = Eigen::MatrixXd::Identity(q, q);
  g_ = Eigen::VectorXd::Zero(q);
  d_ = Eigen::VectorXd::Zero(q);
  cp_.resize(q);
  edir_.resize(q);
  tmp_qq_.resize(q, q);
  tmp_qq2_.resize(q, q);
}

void WindowPass::extend(const Eigen::VectorXd& y, const StateSpaceModel& model) {
  const Eigen::Index p = model.p();

  if (p == 1) {
    // scalar-observation path, allocation free in the hot loop
    const auto c_row = model.C.row(0);
    cp_.noalias() = pred_cov_ * c_row.transpose();
    const double s = c_row.dot(cp_) + model.obs_var(0);
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw SingularCovarianceError("window pass: innovation variance not positive");
    }
    const double e = y(0) - c_row.dot(state_mean_);
    edir_.noalias() = (powers_ - rhs_states_).transpose() * c_row.transpose();

    quad_ += e * e / s;
    log_det_ += std::log(s);
    g_ += edir_ * (e / s);
    d_ += edir_.cwiseProduct(edir_) / s;

    // gain = cp_ / s
    state_mean_ += cp_ * (e / s);
    state_mean_ = (model.A * state_mean_).eval();
    rhs_states_.noalias() += (cp_ / s) * edir_.transpose();
    tmp_qq_.noalias() = model.A * rhs_states_;
    rhs_states_ = tmp_qq_;
    tmp_qq_.noalias() = model.A * powers_;
    powers_ = tmp_qq_;
    tmp_qq_.noalias() = pred_cov_ - (cp_ * cp_.transpose()) / s;
    tmp_qq2_.noalias() = model.A * tmp_qq_;
    pred_cov_.noalias() = tmp_qq2_ * model.A.transpose();
    pred_cov_ = 0.5 * (pred_cov_ + pred_cov_.transpose()).eval();
    pred_cov_.diagonal() += model.inn_var;
  } else {
    Eigen::MatrixXd s = model.C * pred_cov_ * model.C.transpose();
    s.diagonal() += model.obs_var;
    CholPsd chol(symmetrized(s), "window pass innovation covariance");

    // innovations for the data stream and for each unit inflation direction
    Eigen::VectorXd e_data = y - model.C * state_mean_;
    Eigen::MatrixXd e_dirs = model.C * powers_ - model.C * rhs_states_;  // p x q

    Eigen::VectorXd si_e = chol.solve(e_data);
    Eigen::MatrixXd si_dirs = chol.solve(e_dirs);

    quad_ += e_data.dot(si_e);
    log_det_ += chol.log_det();
    g_ += e_dirs.transpose() * si_e;
    d_ += (e_dirs.array() * si_dirs.array()).colwise().sum().matrix().transpose();

    Eigen::MatrixXd gain = chol.solve(model.C * pred_cov_.transpose()).transpose();  // q x p
    state_mean_ = model.A * (state_mean_ + gain * e_data);
    rhs_states_ = model.A * (rhs_states_ + gain * e_dirs);
    powers_ = model.A * powers_;
    Eigen::MatrixXd updated = pred_cov_ - gain * s * gain.transpose();
    pred_cov_ = symmetrized(model.A * updated * model.A.transpose());
    pred_cov_.diagonal() += model.inn_var;
  }

  window_ += 1;
  obs_dim_ += static_cast<int>(p);
}

RankOneSite WindowPass::site(int j, const StateSpaceModel& model, const HyperParams& hp) const {
  RankOneSite site;
  site.g = g_(j);
  site.d = d_(j);
  site.c_noise = model.inn_var(j);
  site.sigma_scale = hp.sigma_hat(j);
  site.shape = hp.b(j);
  site.prefactor = hp.inn_prefactor(j);
  site.quad = quad_;
  site.log_det = log_det_;
  site.obs_dim = obs_dim_;
  return site;
}

}  // namespace cebass
