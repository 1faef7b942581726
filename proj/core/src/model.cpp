#include "cebass/model.hpp"

#include <cmath>

#include "cebass/errors.hpp"

namespace cebass {

void StateSpaceModel::validate() const {
  if (A.rows() == 0 || A.rows() != A.cols()) throw ConfigError("model: A must be square and non-empty");
  if (C.cols() != A.rows() || C.rows() == 0) throw ConfigError("model: C must be p x q with q matching A");
  if (obs_var.size() != C.rows()) throw ConfigError("model: Sigma_A diagonal must have length p");
  if (inn_var.size() != A.rows()) throw ConfigError("model: Sigma_I diagonal must have length q");
  if (!(obs_var.array() > 0.0).all()) throw ConfigError("model: Sigma_A diagonal must be strictly positive");
  if (!(inn_var.array() > 0.0).all()) throw ConfigError("model: Sigma_I diagonal must be strictly positive");
}

NoiseScales NoiseScales::additive(int component, double precision) {
  NoiseScales s;
  s.kind_ = Kind::Additive;
  s.component_ = component;
  s.precision_ = precision;
  return s;
}

NoiseScales NoiseScales::innovative(int component, double precision) {
  NoiseScales s;
  s.kind_ = Kind::Innovative;
  s.component_ = component;
  s.precision_ = precision;
  return s;
}

Eigen::VectorXd NoiseScales::v_diag(Eigen::Index p) const {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(p);
  if (kind_ == Kind::Additive) v(component_) += 1.0 / precision_;
  return v;
}

Eigen::VectorXd NoiseScales::w_diag(Eigen::Index q) const {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(q);
  if (kind_ == Kind::Innovative) w(component_) += 1.0 / precision_;
  return w;
}

std::pair<GaussianState, double> kalman_update(const Eigen::VectorXd& y,
                                               const GaussianState& state,
                                               const StateSpaceModel& model,
                                               const NoiseScales& scales) {
  const Eigen::Index q = model.q();

  Eigen::VectorXd w_inn = model.inn_var;
  if (scales.kind() == NoiseScales::Kind::Innovative) {
    w_inn(scales.component()) *= 1.0 + 1.0 / scales.precision();
  }
  Eigen::VectorXd v_obs = model.obs_var;
  if (scales.kind() == NoiseScales::Kind::Additive) {
    v_obs(scales.component()) *= 1.0 + 1.0 / scales.precision();
  }

  // predict
  Eigen::VectorXd mu_p = model.A * state.mean;
  Eigen::MatrixXd sigma_p = model.A * state.cov * model.A.transpose();
  sigma_p.diagonal() += w_inn;
  sigma_p = symmetrized(sigma_p);

  // update
  Eigen::VectorXd z = y - model.C * mu_p;
  Eigen::MatrixXd s_hat = model.C * sigma_p * model.C.transpose();
  s_hat.diagonal() += v_obs;
  CholPsd chol(symmetrized(s_hat), "kalman_update: predictive covariance");
  const double log_lik = log_gaussian_density(z, chol);

  // gain: K = Sigma_p C^T S^{-1}
  Eigen::MatrixXd gain = chol.solve(model.C * sigma_p.transpose()).transpose();

  GaussianState out;
  out.mean = mu_p + gain * z;
  Eigen::MatrixXd ikc = Eigen::MatrixXd::Identity(q, q) - gain * model.C;
  Eigen::MatrixXd cov = ikc * sigma_p * ikc.transpose();
  cov += gain * v_obs.asDiagonal() * gain.transpose();
  out.cov = symmetrized(cov);
  return {std::move(out), log_lik};
}

Eigen::MatrixXd predictive_variance(const GaussianState& state, const StateSpaceModel& model) {
  Eigen::MatrixXd ca = model.C * model.A;
  Eigen::MatrixXd s = ca * state.cov * ca.transpose() +
                      model.C * model.inn_var.asDiagonal() * model.C.transpose();
  s.diagonal() += model.obs_var;
  return symmetrized(s);
}

PredictiveVariance predictive_variance_factored(const GaussianState& state,
                                                const StateSpaceModel& model) {
  PredictiveVariance out;
  out.sigma_hat = predictive_variance(state, model);
  out.chol = CholPsd(out.sigma_hat, "predictive_variance");
  return out;
}

}  // namespace cebass
