#include "cebass/proposals.hpp"

#include <cmath>

#include "cebass/errors.hpp"

namespace cebass {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

namespace {

Eigen::VectorXd weight_prefactors(const Eigen::VectorXd& log_prob, const Eigen::VectorXd& shape,
                                  const Eigen::VectorXd& scale) {
  Eigen::VectorXd out(log_prob.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out(i) = log_prob(i) + std::lgamma(shape(i) + 0.5) - std::lgamma(shape(i)) +
             shape(i) * std::log(shape(i)) + 0.5 * std::log(scale(i));
  }
  return out;
}

}  // namespace

HyperParams HyperParams::make(Eigen::VectorXd r, Eigen::VectorXd s, Eigen::VectorXd a,
                              Eigen::VectorXd b, Eigen::VectorXd sigma_tilde,
                              Eigen::VectorXd sigma_hat) {
  HyperParams hp;
  hp.r = std::move(r);
  hp.s = std::move(s);
  hp.a = std::move(a);
  hp.b = std::move(b);
  hp.sigma_tilde = std::move(sigma_tilde);
  hp.sigma_hat = std::move(sigma_hat);
  hp.log_r = hp.r.array().log();
  hp.log_s = hp.s.array().log();
  hp.validate();
  hp.add_prefactor = weight_prefactors(hp.log_r, hp.a, hp.sigma_tilde);
  hp.inn_prefactor = weight_prefactors(hp.log_s, hp.b, hp.sigma_hat);
  return hp;
}

HyperParams HyperParams::defaults(Eigen::Index p, Eigen::Index q) {
  const double prob = 1e-3 / static_cast<double>(p + q);
  return make(Eigen::VectorXd::Constant(p, prob), Eigen::VectorXd::Constant(q, prob),
              Eigen::VectorXd::Constant(p, 3.0), Eigen::VectorXd::Constant(q, 3.0),
              Eigen::VectorXd::Ones(p), Eigen::VectorXd::Ones(q));
}

double HyperParams::log_typical_prob() const {
  return std::log1p(-(r.sum() + s.sum()));
}

HyperParams HyperParams::autocorrelation_adjusted(double rho) const {
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("autocorrelation rho must lie in (0, 1)");
  const double power = 1.0 / (1.0 - rho);
  HyperParams hp = *this;
  hp.log_r = log_r.array() * power;
  hp.log_s = log_s.array() * power;
  hp.r = hp.log_r.array().exp();  // may underflow to 0; weights use log_r
  hp.s = hp.log_s.array().exp();
  hp.add_prefactor = weight_prefactors(hp.log_r, hp.a, hp.sigma_tilde);
  hp.inn_prefactor = weight_prefactors(hp.log_s, hp.b, hp.sigma_hat);
  return hp;
}

void HyperParams::validate() const {
  const auto p = r.size();
  const auto q = s.size();
  if (a.size() != p || sigma_tilde.size() != p) throw ConfigError("hyperparams: additive vectors must have length p");
  if (b.size() != q || sigma_hat.size() != q) throw ConfigError("hyperparams: innovative vectors must have length q");
  if (!(r.array() > 0.0).all() || !(r.array() < 1.0).all() ||
      !(s.array() > 0.0).all() || !(s.array() < 1.0).all()) {
    // transformed probabilities may underflow to zero; only reject genuine junk
    if (!(r.array() >= 0.0).all() || !(s.array() >= 0.0).all() ||
        !(r.array() < 1.0).all() || !(s.array() < 1.0).all()) {
      throw ConfigError("hyperparams: anomaly probabilities must lie in [0, 1)");
    }
  }
  if (r.sum() + s.sum() >= 1.0) throw ConfigError("hyperparams: sum(r) + sum(s) must be < 1");
  if (!(a.array() > 0.0).all() || !(b.array() > 0.0).all()) throw ConfigError("hyperparams: shapes must be positive");
  if (!(sigma_tilde.array() > 0.0).all() || !(sigma_hat.array() > 0.0).all()) {
    throw ConfigError("hyperparams: scales must be positive");
  }
}

ProposalContext ProposalContext::make(const GaussianState& state, const Eigen::VectorXd& y,
                                      const StateSpaceModel& model) {
  ProposalContext ctx;
  PredictiveVariance pv = predictive_variance_factored(state, model);
  ctx.sigma_hat = std::move(pv.sigma_hat);
  ctx.chol = std::move(pv.chol);
  ctx.z = y - model.C * (model.A * state.mean);
  ctx.sigma_hat_inv = ctx.chol.inverse();
  ctx.u = ctx.sigma_hat_inv * ctx.z;
  ctx.quad = ctx.z.dot(ctx.u);
  ctx.ct_u = model.C.transpose() * ctx.u;
  ctx.ct_diag = (model.C.transpose() * ctx.sigma_hat_inv * model.C).diagonal();
  return ctx;
}

double RankOneSite::proposal_rate() const {
  const double zt = zeta();
  return shape + sigma_scale * zt * zt / (2.0 * c_noise);
}

double RankOneSite::sample_precision(Rng& rng) const {
  const double rate = proposal_rate();
  if (!(rate > 0.0)) throw FilterError("rank-one proposal: non-positive Gamma rate");
  return sigma_scale * rng.gamma(shape + 0.5, rate);
}

double RankOneSite::proposal_log_pdf(double x) const {
  // density of sigma_scale * G, G ~ Gamma(shape + 1/2, rate)
  const double rate = proposal_rate();
  const double alpha = shape + 0.5;
  const double g = x / sigma_scale;
  return alpha * std::log(rate) - std::lgamma(alpha) + (alpha - 1.0) * std::log(g) - rate * g -
         std::log(sigma_scale);
}

double RankOneSite::log_weight(double x, double log_m_eff, double extra_log_prior) const {
  // Exact prior * likelihood / proposal ratio for the rank-one inflated
  // Gaussian, grouped so the two large quadratic terms cancel analytically:
  //   z^T (S + c v v^T / x)^{-1} z = quad_perp + g^2 x / (d (x + c d))
  // with quad_perp = quad - g^2/d >= 0 (Cauchy-Schwarz), which combines with
  // the proposal's exponential tilt into zeta^2 x^2 / (2 c (x + c d)).
  // Stays finite for any finite residual; exp(delta^2 / 2) never materialises.
  const double rate = proposal_rate();
  const double zt = zeta();
  const double s = c_noise * d;
  const double quad_perp = std::max(quad - g * g / d, 0.0);
  return prefactor + extra_log_prior - log_m_eff - (shape + 0.5) * std::log(rate) -
         0.5 * std::log(x + s) - 0.5 * (static_cast<double>(obs_dim) * kLog2Pi + log_det) -
         0.5 * quad_perp + zt * zt * x * x / (2.0 * c_noise * (x + s));
}

RankOneSite additive_site(int i, const ProposalContext& ctx, const StateSpaceModel& model,
                          const HyperParams& hp) {
  RankOneSite site;
  site.g = ctx.u(i);
  site.d = ctx.sigma_hat_inv(i, i);
  site.c_noise = model.obs_var(i);
  site.sigma_scale = hp.sigma_tilde(i);
  site.shape = hp.a(i);
  site.prefactor = hp.add_prefactor(i);
  site.quad = ctx.quad;
  site.log_det = ctx.chol.log_det();
  site.obs_dim = static_cast<int>(ctx.z.size());
  return site;
}

RankOneSite innovative_site(int j, const ProposalContext& ctx, const StateSpaceModel& model,
                            const HyperParams& hp) {
  RankOneSite site;
  site.g = ctx.ct_u(j);
  site.d = ctx.ct_diag(j);
  if (!(site.d > 0.0)) {
    throw ConfigError("innovative proposal: column " + std::to_string(j + 1) +
                      " of C is zero; route this component through back-sampling");
  }
  site.c_noise = model.inn_var(j);
  site.sigma_scale = hp.sigma_hat(j);
  site.shape = hp.b(j);
  site.prefactor = hp.inn_prefactor(j);
  site.quad = ctx.quad;
  site.log_det = ctx.chol.log_det();
  site.obs_dim = static_cast<int>(ctx.z.size());
  return site;
}

ProposalDraw sample_typical(const ProposalContext& ctx, const HyperParams& hp) {
  ProposalDraw draw;
  draw.scales = NoiseScales::typical();
  draw.source_index = -1;
  draw.log_weight = hp.log_typical_prob() -
                    0.5 * (static_cast<double>(ctx.z.size()) * kLog2Pi + ctx.chol.log_det() + ctx.quad);
  return draw;
}

ProposalDraw sample_additive_component(int i, const ProposalContext& ctx,
                                       const StateSpaceModel& model, const HyperParams& hp,
                                       int m_eff, Rng& rng) {
  const RankOneSite site = additive_site(i, ctx, model, hp);
  const double precision = site.sample_precision(rng);
  ProposalDraw draw;
  draw.scales = NoiseScales::additive(i, precision);
  draw.source_index = i;
  draw.log_weight = site.log_weight(precision, std::log(static_cast<double>(m_eff)));
  return draw;
}

ProposalDraw sample_innovative_component(int j, const ProposalContext& ctx,
                                         const StateSpaceModel& model, const HyperParams& hp,
                                         int m_eff, Rng& rng) {
  const RankOneSite site = innovative_site(j, ctx, model, hp);
  const double precision = site.sample_precision(rng);
  ProposalDraw draw;
  draw.scales = NoiseScales::innovative(j, precision);
  draw.source_index = j;
  draw.log_weight = site.log_weight(precision, std::log(static_cast<double>(m_eff)));
  return draw;
}

std::vector<ProposalDraw> sample_particles(const GaussianState& state, const Eigen::VectorXd& y,
                                           const StateSpaceModel& model, const HyperParams& hp,
                                           int m, Rng& rng) {
  if (m < 1) throw ConfigError("sample_particles: M must be >= 1");
  const ProposalContext ctx = ProposalContext::make(state, y, model);
  std::vector<ProposalDraw> draws;
  draws.reserve(1 + static_cast<std::size_t>(m) * (model.p() + model.q()));
  draws.push_back(sample_typical(ctx, hp));
  for (int i = 0; i < model.p(); ++i) {
    for (int k = 0; k < m; ++k) {
      draws.push_back(sample_additive_component(i, ctx, model, hp, m, rng));
    }
  }
  for (int j = 0; j < model.q(); ++j) {
    for (int k = 0; k < m; ++k) {
      draws.push_back(sample_innovative_component(j, ctx, model, hp, m, rng));
    }
  }
  return draws;
}

}  // namespace cebass
