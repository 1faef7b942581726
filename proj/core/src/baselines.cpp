#include "cebass/baselines.hpp"

#include <cmath>

#include "cebass/errors.hpp"

namespace cebass {

std::vector<PredictiveStep> classical_kf(const std::vector<Eigen::VectorXd>& ys,
                                         const StateSpaceModel& model, const GaussianState& init) {
  std::vector<PredictiveStep> out;
  out.reserve(ys.size());
  GaussianState state = init;
  for (const auto& y : ys) {
    PredictiveStep step;
    step.mean = model.C * (model.A * state.mean);
    step.var = predictive_variance(state, model);
    auto [next, log_lik] = kalman_update(y, state, model, NoiseScales::typical());
    step.log_lik = log_lik;
    state = std::move(next);
    out.push_back(std::move(step));
  }
  return out;
}

std::vector<PredictiveStep> huber_filter(const std::vector<Eigen::VectorXd>& ys,
                                         const StateSpaceModel& model, const GaussianState& init,
                                         const HuberConfig& cfg) {
  if (!(cfg.clip > 0.0)) throw ConfigError("huber filter: clip must be positive");
  const Eigen::Index q = model.q();

  std::vector<PredictiveStep> out;
  out.reserve(ys.size());
  GaussianState state = init;
  for (const auto& y : ys) {
    Eigen::VectorXd mu_p = model.A * state.mean;
    Eigen::MatrixXd sigma_p = model.A * state.cov * model.A.transpose();
    sigma_p.diagonal() += model.inn_var;
    sigma_p = symmetrized(sigma_p);

    Eigen::VectorXd z = y - model.C * mu_p;
    Eigen::MatrixXd s_hat = model.C * sigma_p * model.C.transpose();
    s_hat.diagonal() += model.obs_var;
    CholPsd chol(symmetrized(s_hat), "huber predictive covariance");

    PredictiveStep step;
    step.mean = model.C * mu_p;
    step.var = s_hat;
    step.log_lik = log_gaussian_density(z, chol);

    Eigen::MatrixXd gain = chol.solve(model.C * sigma_p.transpose()).transpose();

    Eigen::VectorXd update;
    if (cfg.mode == HuberConfig::Mode::AO) {
      Eigen::VectorXd clipped = z;
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double bound = cfg.clip * std::sqrt(s_hat(i, i));
        clipped(i) = std::clamp(z(i), -bound, bound);
      }
      update = gain * clipped;
    } else {
      update = gain * z;
      Eigen::MatrixXd inc_cov = gain * s_hat * gain.transpose();
      for (Eigen::Index j = 0; j < q; ++j) {
        const double bound = cfg.clip * std::sqrt(std::max(inc_cov(j, j), 0.0));
        if (bound > 0.0) update(j) = std::clamp(update(j), -bound, bound);
      }
    }

    state.mean = mu_p + update;
    Eigen::MatrixXd ikc = Eigen::MatrixXd::Identity(q, q) - gain * model.C;
    Eigen::MatrixXd cov = ikc * sigma_p * ikc.transpose();
    cov += gain * model.obs_var.asDiagonal() * gain.transpose();
    state.cov = symmetrized(cov);

    out.push_back(std::move(step));
  }
  return out;
}

}  // namespace cebass
