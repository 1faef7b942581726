#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cebass/linalg.hpp"
#include "cebass/model.hpp"
#include "cebass/proposals.hpp"
#include "cebass/rng.hpp"
#include "oracles.hpp"

using namespace cebass;

namespace {

StateSpaceModel scalar_model(double var_obs, double var_inn) {
  StateSpaceModel m;
  m.A = Eigen::MatrixXd::Ones(1, 1);
  m.C = Eigen::MatrixXd::Ones(1, 1);
  m.obs_var = Eigen::VectorXd::Constant(1, var_obs);
  m.inn_var = Eigen::VectorXd::Constant(1, var_inn);
  return m;
}

HyperParams scalar_hp(double r, double s, double a, double b, double st, double sh) {
  return HyperParams::make(Eigen::VectorXd::Constant(1, r), Eigen::VectorXd::Constant(1, s),
                           Eigen::VectorXd::Constant(1, a), Eigen::VectorXd::Constant(1, b),
                           Eigen::VectorXd::Constant(1, st), Eigen::VectorXd::Constant(1, sh));
}

StateSpaceModel planar_model() {
  StateSpaceModel m;
  m.A.resize(2, 2);
  m.A << 0.95, 0.2, 0.0, 0.9;
  m.C.resize(2, 2);
  m.C << 1.0, 0.3, -0.2, 1.1;
  m.obs_var.resize(2);
  m.obs_var << 0.8, 1.2;
  m.inn_var.resize(2);
  m.inn_var << 0.2, 0.07;
  return m;
}

}  // namespace

TEST_SUITE("proposals") {

TEST_CASE("typical draw: closed forms") {
  StateSpaceModel m = scalar_model(1.0, 0.0);
  GaussianState st{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1)};
  // Sigma_hat = 0 + 1 + 0 = 1

  {
    HyperParams hp = scalar_hp(0.05, 0.05, 3.0, 3.0, 1.0, 1.0);
    ProposalContext ctx = ProposalContext::make(st, Eigen::VectorXd::Zero(1), m);
    ProposalDraw d = sample_typical(ctx, hp);
    CHECK(d.log_weight ==
          doctest::Approx(std::log(0.9) - 0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));
    CHECK(d.scales.kind() == NoiseScales::Kind::Typical);
  }
  {
    HyperParams hp = scalar_hp(0.01, 0.01, 3.0, 3.0, 1.0, 1.0);
    ProposalContext ctx = ProposalContext::make(st, Eigen::VectorXd::Constant(1, 3.0), m);
    const double expected = std::log(0.98) - 0.5 * (std::log(2.0 * M_PI) + 9.0);
    CHECK(sample_typical(ctx, hp).log_weight == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("typical draw: 2-dim matches the dense density plus prior factor") {
  StateSpaceModel m = planar_model();
  GaussianState st{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2) * 0.4};
  Eigen::VectorXd y(2);
  y << 1.7, -0.6;
  HyperParams hp = HyperParams::defaults(2, 2);

  ProposalContext ctx = ProposalContext::make(st, y, m);
  const double expected = hp.log_typical_prob() +
                          log_gaussian_density(ctx.z, Eigen::VectorXd::Zero(2), ctx.sigma_hat);
  CHECK(sample_typical(ctx, hp).log_weight == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("zero residual leaves the proposal rate at the prior rate") {
  StateSpaceModel m = scalar_model(1.0, 0.1);
  GaussianState st{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1)};
  HyperParams hp = scalar_hp(1e-3, 1e-3, 2.0, 2.0, 1.0, 1.0);
  ProposalContext ctx = ProposalContext::make(st, Eigen::VectorXd::Zero(1), m);
  CHECK(additive_site(0, ctx, m, hp).proposal_rate() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(innovative_site(0, ctx, m, hp).proposal_rate() == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("additive weight x proposal density reproduces the exact posterior") {
  // Sigma_hat = 2 via Sigma = 1, Sigma_A = 1, Sigma_I = 0
  StateSpaceModel m = scalar_model(1.0, 0.0);
  GaussianState st{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1)};
  HyperParams hp = scalar_hp(2e-3, 1e-3, 2.0, 2.0, 1.0, 1.0);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 4.0);
  ProposalContext ctx = ProposalContext::make(st, y, m);
  CHECK(ctx.sigma_hat(0, 0) == doctest::Approx(2.0));

  const RankOneSite site = additive_site(0, ctx, m, hp);
  double ratio0 = 0.0;
  for (double v : {0.01, 0.1, 1.0, 10.0}) {
    const double log_joint = site.log_weight(v, std::log(1.0)) + site.proposal_log_pdf(v);
    const double log_target = std::log(hp.r(0)) +
                              std::log(oracles::scaled_gamma_pdf(v, 2.0, 1.0)) +
                              std::log(oracles::normal_pdf(4.0, 2.0 + 1.0 / v));
    const double ratio = std::exp(log_joint - log_target);
    if (ratio0 == 0.0) {
      ratio0 = ratio;
    } else {
      CHECK(ratio == doctest::Approx(ratio0).epsilon(1e-6));
    }
  }
  // the identity is exact: the constant is one because every factor is kept
  CHECK(ratio0 == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("innovative weight x density matches the dense rank-one oracle") {
  StateSpaceModel m = planar_model();
  GaussianState st{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2) * 0.3};
  HyperParams hp = HyperParams::make(
      Eigen::VectorXd::Constant(2, 2e-3), Eigen::VectorXd::Constant(2, 1e-3),
      Eigen::VectorXd::Constant(2, 3.0), Eigen::VectorXd::Constant(2, 3.0),
      Eigen::VectorXd::Constant(2, 0.8), Eigen::VectorXd::Constant(2, 0.05));
  Eigen::VectorXd y(2);
  y << 4.2, -1.0;
  ProposalContext ctx = ProposalContext::make(st, y, m);

  for (int j = 0; j < 2; ++j) {
    const RankOneSite site = innovative_site(j, ctx, m, hp);
    double ratio0 = 0.0;
    for (double w : {0.003, 0.05, 0.7, 9.0}) {
      const double log_joint = site.log_weight(w, std::log(1.0)) + site.proposal_log_pdf(w);
      Eigen::MatrixXd inflated =
          ctx.sigma_hat + (m.inn_var(j) / w) * m.C.col(j) * m.C.col(j).transpose();
      const double log_target = hp.log_s(j) +
                                oracles::scaled_gamma_log_pdf(w, 3.0, hp.sigma_hat(j)) +
                                log_gaussian_density(ctx.z, Eigen::VectorXd::Zero(2), inflated);
      const double ratio = log_joint - log_target;
      if (ratio0 == 0.0) {
        ratio0 = ratio;
      } else {
        CHECK(ratio == doctest::Approx(ratio0).epsilon(1e-8));
      }
    }
    CHECK(std::abs(ratio0) < 1e-8);  // exact identity, constant is one
  }
}

TEST_CASE("additive and innovative proposals coincide when C = I and noises match") {
  StateSpaceModel m;
  m.A = Eigen::MatrixXd::Identity(2, 2) * 0.9;
  m.C = Eigen::MatrixXd::Identity(2, 2);
  m.obs_var = Eigen::VectorXd::Constant(2, 0.5);
  m.inn_var = Eigen::VectorXd::Constant(2, 0.5);
  GaussianState st{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2) * 0.2};
  HyperParams hp = HyperParams::make(
      Eigen::VectorXd::Constant(2, 1e-3), Eigen::VectorXd::Constant(2, 1e-3),
      Eigen::VectorXd::Constant(2, 3.0), Eigen::VectorXd::Constant(2, 3.0),
      Eigen::VectorXd::Constant(2, 0.7), Eigen::VectorXd::Constant(2, 0.7));
  Eigen::VectorXd y(2);
  y << 2.2, -3.0;
  ProposalContext ctx = ProposalContext::make(st, y, m);

  for (int k = 0; k < 2; ++k) {
    const RankOneSite add = additive_site(k, ctx, m, hp);
    const RankOneSite inn = innovative_site(k, ctx, m, hp);
    CHECK(add.g == doctest::Approx(inn.g).epsilon(1e-12));
    CHECK(add.d == doctest::Approx(inn.d).epsilon(1e-12));
    CHECK(add.proposal_rate() == doctest::Approx(inn.proposal_rate()).epsilon(1e-12));
    CHECK(add.log_weight(0.4, 0.0) == doctest::Approx(inn.log_weight(0.4, 0.0)).epsilon(1e-12));
  }
}

TEST_CASE("asymptotic proposal mean under a huge residual") {
  StateSpaceModel m = scalar_model(1.0, 0.1);
  GaussianState st{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1)};
  HyperParams hp = scalar_hp(1e-3, 1e-3, 2.0, 2.0, 1.0, 1.0);

  // pick y so that zeta^2 = 1e6
  ProposalContext probe = ProposalContext::make(st, Eigen::VectorXd::Ones(1), m);
  const double sigma_hat = probe.sigma_hat(0, 0);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 1e3);  // zeta = z for scalar
  ProposalContext ctx = ProposalContext::make(st, y, m);
  const RankOneSite site = additive_site(0, ctx, m, hp);
  CHECK(site.zeta() * site.zeta() == doctest::Approx(1e6).epsilon(1e-9));

  Rng rng(5);
  const int n = 100000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += site.sample_precision(rng);
  const double mean = acc / n;
  const double d = 1.0 / sigma_hat;
  const double g = site.g;
  const double asymptote = (2.0 * 2.0 + 1.0) * 1.0 * (d / g) * (d / g);
  CHECK(mean / asymptote == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("descendant counts are M(p+q)+1") {
  {
    StateSpaceModel m = scalar_model(1.0, 0.01);
    GaussianState st{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1) * 0.1};
    HyperParams hp = HyperParams::defaults(1, 1);
    Rng rng(2);
    CHECK(sample_particles(st, Eigen::VectorXd::Ones(1), m, hp, 1, rng).size() == 3);
  }
  {
    StateSpaceModel m;
    m.A = Eigen::MatrixXd::Ones(1, 1);
    m.C = Eigen::MatrixXd::Ones(2, 1);
    m.obs_var = Eigen::VectorXd::Constant(2, 1.0);
    m.inn_var = Eigen::VectorXd::Constant(1, 0.01);
    GaussianState st{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1) * 0.1};
    HyperParams hp = HyperParams::defaults(2, 1);
    Rng rng(2);
    CHECK(sample_particles(st, Eigen::VectorXd::Ones(2), m, hp, 2, rng).size() == 7);
  }
}

TEST_CASE("every draw respects the single-anomaly invariant") {
  StateSpaceModel m = planar_model();
  GaussianState st{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2) * 0.3};
  HyperParams hp = HyperParams::defaults(2, 2);
  Rng rng(8);
  Eigen::VectorXd y(2);
  y << 5.0, 2.0;
  for (const ProposalDraw& d : sample_particles(st, y, m, hp, 3, rng)) {
    Eigen::VectorXd v = d.scales.v_diag(2), w = d.scales.w_diag(2);
    int non_unit = 0;
    for (int i = 0; i < 2; ++i) non_unit += (v(i) != 1.0) + (w(i) != 1.0);
    CHECK(non_unit <= 1);
    for (int i = 0; i < 2; ++i) {
      CHECK(v(i) >= 1.0);
      CHECK(w(i) >= 1.0);
    }
  }
}

TEST_CASE("candidate weight sums are unbiased for the mixture evidence") {
  StateSpaceModel m = scalar_model(1.0, 0.01);
  GaussianState st{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1) * 0.0951};
  HyperParams hp = scalar_hp(5e-4, 5e-4, 3.0, 3.0, 0.9, 0.009);
  const double y = 1.5;

  const double sigma_hat = predictive_variance(st, m)(0, 0);
  const double typical = (1.0 - 1e-3) * oracles::normal_pdf(y, sigma_hat);
  const double add_part =
      hp.r(0) * oracles::integrate_positive_axis([&](double v) {
        return oracles::scaled_gamma_pdf(v, 3.0, 0.9) * oracles::normal_pdf(y, sigma_hat + 1.0 / v);
      });
  const double inn_part =
      hp.s(0) * oracles::integrate_positive_axis([&](double w) {
        return oracles::scaled_gamma_pdf(w, 3.0, 0.009) *
               oracles::normal_pdf(y, sigma_hat + 0.01 / w);
      });
  const double truth = typical + add_part + inn_part;

  Rng master(123);
  const int n_seeds = 100000;
  double acc = 0.0;
  for (int seed = 0; seed < n_seeds; ++seed) {
    Rng rng = master.fork(static_cast<std::uint64_t>(seed));
    double sum = 0.0;
    for (const ProposalDraw& d :
         sample_particles(st, Eigen::VectorXd::Constant(1, y), m, hp, 1, rng)) {
      sum += std::exp(d.log_weight);
    }
    acc += sum;
  }
  CHECK(acc / n_seeds == doctest::Approx(truth).epsilon(0.01));
}

TEST_CASE("log weights stay finite out to astronomical residuals") {
  StateSpaceModel m = scalar_model(1.0, 0.01);
  GaussianState st{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1) * 0.1};
  HyperParams hp = scalar_hp(5e-4, 5e-4, 3.0, 3.0, 0.9, 0.009);
  Rng rng(4);
  for (double mag : {1e2, 1e4, 1e6, 1e8}) {
    ProposalContext ctx = ProposalContext::make(st, Eigen::VectorXd::Constant(1, mag), m);
    for (int rep = 0; rep < 10; ++rep) {
      ProposalDraw add = sample_additive_component(0, ctx, m, hp, 1, rng);
      ProposalDraw inn = sample_innovative_component(0, ctx, m, hp, 1, rng);
      CHECK(std::isfinite(add.log_weight));
      CHECK(std::isfinite(inn.log_weight));
      CHECK(add.scales.precision() > 0.0);
      CHECK(inn.scales.precision() > 0.0);
    }
    CHECK(std::isfinite(sample_typical(ctx, hp).log_weight));
  }
}

TEST_CASE("autocorrelation transform raises log probabilities exactly") {
  StateSpaceModel m = scalar_model(1.0, 0.01);
  GaussianState st{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1) * 0.1};
  HyperParams hp = scalar_hp(5e-4, 5e-4, 3.0, 3.0, 0.9, 0.009);
  const double rho = 0.99;
  HyperParams adj = hp.autocorrelation_adjusted(rho);

  CHECK(adj.log_r(0) * (1.0 - rho) == doctest::Approx(hp.log_r(0)).epsilon(1e-13));
  CHECK(adj.log_s(0) * (1.0 - rho) == doctest::Approx(hp.log_s(0)).epsilon(1e-13));

  // the full weight shifts by exactly the prior change, staying finite even
  // when the linear probability underflows
  ProposalContext ctx = ProposalContext::make(st, Eigen::VectorXd::Constant(1, 2.0), m);
  const RankOneSite before = additive_site(0, ctx, m, hp);
  const RankOneSite after = additive_site(0, ctx, m, adj);
  const double shift = hp.log_r(0) / (1.0 - rho) - hp.log_r(0);
  CHECK(after.log_weight(0.2, 0.0) ==
        doctest::Approx(before.log_weight(0.2, 0.0) + shift).epsilon(1e-10));
  CHECK(std::isfinite(after.log_weight(0.2, 0.0)));
  CHECK(adj.r(0) == 0.0);  // linear value underflows, weights stay usable
}

TEST_CASE("stratification divisor enters as exactly 1/M") {
  StateSpaceModel m = scalar_model(1.0, 0.01);
  GaussianState st{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1) * 0.1};
  HyperParams hp = HyperParams::defaults(1, 1);
  ProposalContext ctx = ProposalContext::make(st, Eigen::VectorXd::Constant(1, 2.0), m);
  const RankOneSite site = additive_site(0, ctx, m, hp);
  CHECK(site.log_weight(0.3, std::log(4.0)) ==
        doctest::Approx(site.log_weight(0.3, std::log(1.0)) - std::log(4.0)).epsilon(1e-13));
}

}  // TEST_SUITE
