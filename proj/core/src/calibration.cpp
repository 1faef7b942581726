#include "cebass/calibration.hpp"

#include <cmath>
#include <limits>

#include "cebass/backsampling.hpp"
#include "cebass/errors.hpp"

namespace cebass {

namespace {

// one covariance recursion step: predict then Joseph update, all at identity scales
Eigen::MatrixXd riccati_step(const Eigen::MatrixXd& sigma, const StateSpaceModel& model) {
  Eigen::MatrixXd pred = model.A * sigma * model.A.transpose();
  pred.diagonal() += model.inn_var;
  pred = symmetrized(pred);
  Eigen::MatrixXd s_hat = model.C * pred * model.C.transpose();
  s_hat.diagonal() += model.obs_var;
  CholPsd chol(symmetrized(s_hat), "steady_state predictive covariance");
  Eigen::MatrixXd gain = chol.solve(model.C * pred.transpose()).transpose();
  Eigen::MatrixXd ikc = Eigen::MatrixXd::Identity(model.q(), model.q()) - gain * model.C;
  Eigen::MatrixXd next = ikc * pred * ikc.transpose();
  next += gain * model.obs_var.asDiagonal() * gain.transpose();
  return symmetrized(next);
}

}  // namespace

SteadyState steady_state(const StateSpaceModel& model, double tol, int max_iter) {
  model.validate();
  observability_index(model);  // throws when unobservable

  Eigen::MatrixXd sigma = Eigen::MatrixXd(model.inn_var.asDiagonal());
  SteadyState out;
  double delta = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::MatrixXd next = riccati_step(sigma, model);
    delta = (next - sigma).cwiseAbs().maxCoeff();
    sigma = std::move(next);
    if (delta < tol) {
      out.iterations = it;
      out.converged = true;
      break;
    }
  }
  if (!out.converged) {
    throw ConvergenceError("steady_state: no convergence after " + std::to_string(max_iter) +
                           " iterations (last delta " + std::to_string(delta) + ")");
  }
  out.sigma_limit = sigma;
  GaussianState st{Eigen::VectorXd::Zero(model.q()), sigma};
  out.sigma_hat_limit = predictive_variance(st, model);
  return out;
}

int observability_index(const StateSpaceModel& model, int k_max) {
  if (k_max < 0) k_max = 10 * static_cast<int>(model.q());
  const Eigen::Index p = model.p();
  const Eigen::Index q = model.q();
  Eigen::MatrixXd stack((k_max + 1) * p, q);
  Eigen::MatrixXd block = model.C;
  for (int k = 0; k <= k_max; ++k) {
    stack.middleRows(k * p, p) = block;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack.topRows((k + 1) * p));
    const auto& sv = svd.singularValues();
    const double tol = 1e-10 * sv(0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > tol) ++rank;
    }
    if (rank == q) return k;
    block = block * model.A;
  }
  throw UnobservableModelError("model unobservable up to k_max = " + std::to_string(k_max));
}

ScaleCalibration proposal_scales(const StateSpaceModel& model, const SteadyState& ss) {
  if (!ss.converged) throw ConfigError("proposal_scales: steady state did not converge");
  CholPsd chol(ss.sigma_hat_limit, "proposal_scales: Sigma_hat limit");
  Eigen::MatrixXd inv = chol.inverse();

  ScaleCalibration cal;
  cal.sigma_tilde = model.obs_var.array() * inv.diagonal().array();
  cal.sigma_hat.resize(model.q());
  cal.sigma_hat_defined.assign(model.q(), true);
  const Eigen::VectorXd ct_diag = (model.C.transpose() * inv * model.C).diagonal();
  for (Eigen::Index j = 0; j < model.q(); ++j) {
    if (model.C.col(j).cwiseAbs().maxCoeff() == 0.0) {
      cal.sigma_hat(j) = std::numeric_limits<double>::quiet_NaN();
      cal.sigma_hat_defined[static_cast<std::size_t>(j)] = false;
    } else {
      cal.sigma_hat(j) = model.inn_var(j) * ct_diag(j);
    }
  }
  return cal;
}

int min_visible_window(const StateSpaceModel& model, int j, int h_max) {
  const double scale = model.C.cwiseAbs().maxCoeff();
  const double tol = 1e-12 * std::max(scale, 1.0);
  Eigen::VectorXd dir = Eigen::VectorXd::Unit(model.q(), j);
  for (int n = 1; n <= h_max; ++n) {
    if ((model.C * dir).cwiseAbs().maxCoeff() > tol) return n;
    dir = model.A * dir;
  }
  return 0;
}

std::vector<std::vector<int>> default_horizons(const StateSpaceModel& model, int k_star) {
  const int h_max = std::max(k_star, 0) + 1;
  std::vector<std::vector<int>> horizons(model.q());
  for (int j = 0; j < model.q(); ++j) {
    const int first = min_visible_window(model, j, h_max);
    if (first == 0) {
      throw UnobservableModelError("default_horizons: state component " + std::to_string(j + 1) +
                                   " never reaches the observations within window " +
                                   std::to_string(h_max));
    }
    for (int n = first; n <= h_max; ++n) horizons[static_cast<std::size_t>(j)].push_back(n);
  }
  return horizons;
}

Eigen::VectorXd backsample_innovation_scales(const StateSpaceModel& model, const SteadyState& ss,
                                             const std::vector<std::vector<int>>& horizons) {
  if (!ss.converged) throw ConfigError("backsample scales: steady state did not converge");
  if (static_cast<Eigen::Index>(horizons.size()) != model.q()) {
    throw ConfigError("backsample scales: one horizon set per state component required");
  }
  int max_h = 0;
  for (const auto& bj : horizons) {
    if (bj.empty()) throw ConfigError("backsample scales: empty horizon set");
    for (int h : bj) {
      if (h < 1) throw ConfigError("backsample scales: horizons must be >= 1");
      max_h = std::max(max_h, h);
    }
  }

  GaussianState st{Eigen::VectorXd::Zero(model.q()), ss.sigma_limit};
  std::vector<Eigen::VectorXd> zero_obs(static_cast<std::size_t>(max_h),
                                        Eigen::VectorXd::Zero(model.p()));
  // ct_diag at every window length, shared across components
  std::vector<Eigen::VectorXd> ct_diag(static_cast<std::size_t>(max_h) + 1);
  for (int n = 1; n <= max_h; ++n) {
    AugmentedSystem aug = build_augmented(st, model, std::span(zero_obs.data(), n));
    ct_diag[static_cast<std::size_t>(n)] = aug.ct_diag;
  }

  Eigen::VectorXd sigma_hat(model.q());
  for (Eigen::Index j = 0; j < model.q(); ++j) {
    double best = 0.0;
    bool any = false;
    for (int n : horizons[static_cast<std::size_t>(j)]) {
      const double dj = ct_diag[static_cast<std::size_t>(n)](j);
      if (!(dj > 0.0)) continue;  // component invisible at this window
      best = std::max(best, model.inn_var(j) * dj);
      any = true;
    }
    if (!any) {
      throw UnobservableModelError("backsample scales: component " + std::to_string(j + 1) +
                                   " invisible at every horizon in its set");
    }
    sigma_hat(j) = best;
  }
  return sigma_hat;
}

}  // namespace cebass
