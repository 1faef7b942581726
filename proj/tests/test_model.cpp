#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "cebass/linalg.hpp"
#include "cebass/model.hpp"
#include "cebass/rng.hpp"
#include "oracles.hpp"

using namespace cebass;

namespace {

StateSpaceModel scalar_model(double a, double c, double var_obs, double var_inn) {
  StateSpaceModel m;
  m.A = Eigen::MatrixXd::Constant(1, 1, a);
  m.C = Eigen::MatrixXd::Constant(1, 1, c);
  m.obs_var = Eigen::VectorXd::Constant(1, var_obs);
  m.inn_var = Eigen::VectorXd::Constant(1, var_inn);
  return m;
}

StateSpaceModel small_model() {
  StateSpaceModel m;
  m.A.resize(2, 2);
  m.A << 0.9, 0.3, -0.1, 0.8;
  m.C.resize(2, 2);
  m.C << 1.0, 0.4, 0.2, 1.3;
  m.obs_var.resize(2);
  m.obs_var << 0.7, 1.4;
  m.inn_var.resize(2);
  m.inn_var << 0.3, 0.05;
  return m;
}

GaussianState small_state() {
  GaussianState st;
  st.mean.resize(2);
  st.mean << 0.4, -1.2;
  st.cov.resize(2, 2);
  st.cov << 0.8, 0.2, 0.2, 0.5;
  return st;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("exactly known state never moves") {
  StateSpaceModel m = scalar_model(1.0, 1.0, 1.0, 0.0);
  GaussianState st{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1)};
  Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 5.0);
  auto [post, ll] = kalman_update(y, st, m, NoiseScales::typical());
  CHECK(post.mean(0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(post.cov(0, 0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(std::isfinite(ll));
}

TEST_CASE("scalar closed form: gain one half") {
  StateSpaceModel m = scalar_model(1.0, 1.0, 1.0, 0.0);
  GaussianState st{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1)};
  Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 2.0);
  auto [post, ll] = kalman_update(y, st, m, NoiseScales::typical());
  CHECK(post.mean(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(post.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  const double expected_ll = -0.5 * (std::log(2.0 * M_PI * 2.0) + 4.0 / 2.0);
  CHECK(ll == doctest::Approx(expected_ll).epsilon(1e-14));
}

TEST_CASE("posterior matches the precision-form conjugate oracle") {
  StateSpaceModel m = small_model();
  GaussianState st = small_state();
  Eigen::VectorXd y(2);
  y << 2.0, -0.7;

  for (const NoiseScales& sc : {NoiseScales::typical(), NoiseScales::additive(1, 0.2),
                                NoiseScales::innovative(0, 0.05)}) {
    auto [post, ll] = kalman_update(y, st, m, sc);
    GaussianState ref = oracles::precision_form_posterior(y, st, m, sc);
    CHECK((post.mean - ref.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((post.cov - ref.cov).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::isfinite(ll));
  }
}

TEST_CASE("predictive variance closed forms") {
  {
    StateSpaceModel m = scalar_model(1.0, 1.0, 1.0, 0.1);
    GaussianState st{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1)};
    CHECK(predictive_variance(st, m)(0, 0) == doctest::Approx(2.1).epsilon(1e-14));
  }
  {
    StateSpaceModel m;
    m.A = Eigen::MatrixXd::Identity(2, 2);
    m.C.resize(1, 2);
    m.C << 1.0, 0.0;
    m.obs_var = Eigen::VectorXd::Constant(1, 1.0);
    m.inn_var = Eigen::VectorXd::Constant(2, 0.1);
    GaussianState st{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)};
    CHECK(predictive_variance(st, m)(0, 0) == doctest::Approx(2.1).epsilon(1e-14));
  }
}

TEST_CASE("predictive variance against a Monte Carlo oracle") {
  StateSpaceModel m = small_model();
  GaussianState st = small_state();
  Eigen::MatrixXd sigma_hat = predictive_variance(st, m);

  Rng rng(17);
  const int n = 1000000;
  Eigen::LLT<Eigen::MatrixXd> state_chol(st.cov);
  Eigen::MatrixXd l = state_chol.matrixL();
  Eigen::VectorXd mean_acc = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd sq_acc = Eigen::MatrixXd::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd g(2);
    g << rng.normal(), rng.normal();
    Eigen::VectorXd x = st.mean + l * g;
    Eigen::VectorXd nu(2), eps(2);
    nu << std::sqrt(m.inn_var(0)) * rng.normal(), std::sqrt(m.inn_var(1)) * rng.normal();
    eps << std::sqrt(m.obs_var(0)) * rng.normal(), std::sqrt(m.obs_var(1)) * rng.normal();
    Eigen::VectorXd y = m.C * (m.A * x + nu) + eps;
    mean_acc += y;
    sq_acc += y * y.transpose();
  }
  Eigen::VectorXd mean = mean_acc / n;
  Eigen::MatrixXd cov = sq_acc / n - mean * mean.transpose();
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const double se =
          std::sqrt((sigma_hat(r, r) * sigma_hat(c, c) + sigma_hat(r, c) * sigma_hat(r, c)) / n);
      CHECK(std::abs(cov(r, c) - sigma_hat(r, c)) < 3.0 * se);
    }
  }
}

TEST_CASE("inflating W equals pre-scaling Sigma_I") {
  StateSpaceModel m = small_model();
  GaussianState st = small_state();
  Eigen::VectorXd y(2);
  y << 1.1, 0.3;

  const double precision = 0.07;
  auto [post_scaled, ll_scaled] = kalman_update(y, st, m, NoiseScales::innovative(1, precision));

  StateSpaceModel m2 = m;
  m2.inn_var(1) *= 1.0 + 1.0 / precision;
  auto [post_model, ll_model] = kalman_update(y, st, m2, NoiseScales::typical());

  CHECK((post_scaled.mean - post_model.mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((post_scaled.cov - post_model.cov).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(ll_scaled == doctest::Approx(ll_model).epsilon(1e-13));
}

TEST_CASE("updating never increases covariance (Loewner order)") {
  StateSpaceModel m = small_model();
  GaussianState st = small_state();
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd y(2);
    y << 3.0 * rng.normal(), 3.0 * rng.normal();
    NoiseScales sc = (trial % 3 == 0)   ? NoiseScales::typical()
                     : (trial % 3 == 1) ? NoiseScales::additive(trial % 2, 0.5)
                                        : NoiseScales::innovative(trial % 2, 0.5);
    Eigen::VectorXd w_inn = m.inn_var;
    for (Eigen::Index j = 0; j < 2; ++j) w_inn(j) *= sc.inn_factor(j);
    Eigen::MatrixXd sigma_p = m.A * st.cov * m.A.transpose();
    sigma_p.diagonal() += w_inn;

    auto [post, ll] = kalman_update(y, st, m, sc);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrized(sigma_p - post.cov));
    CHECK(eig.eigenvalues().minCoeff() > -1e-10);
    st = post;  // walk the state around a bit
  }
}

TEST_CASE("chained log likelihoods equal the stacked joint density") {
  StateSpaceModel m = small_model();
  GaussianState st = small_state();
  Rng rng(11);
  const int horizon = 5;

  std::vector<Eigen::VectorXd> ys;
  for (int t = 0; t < horizon; ++t) {
    Eigen::VectorXd y(2);
    y << rng.normal(), rng.normal();
    ys.push_back(y);
  }

  double chained = 0.0;
  GaussianState cur = st;
  for (const auto& y : ys) {
    auto [next, ll] = kalman_update(y, cur, m, NoiseScales::typical());
    chained += ll;
    cur = next;
  }

  oracles::StackedJoint joint = oracles::stacked_joint(m, st, horizon);
  Eigen::VectorXd stacked(horizon * 2);
  for (int t = 0; t < horizon; ++t) stacked.segment(t * 2, 2) = ys[static_cast<std::size_t>(t)];
  const double reference = log_gaussian_density(stacked, joint.mean, joint.cov);
  CHECK(chained == doctest::Approx(reference).epsilon(1e-8));
}

TEST_CASE("noise scales enforce the single-anomaly shape") {
  NoiseScales add = NoiseScales::additive(1, 0.25);
  Eigen::VectorXd v = add.v_diag(3), w = add.w_diag(2);
  CHECK(v(1) == doctest::Approx(5.0));
  CHECK(v(0) == 1.0);
  CHECK(v(2) == 1.0);
  CHECK((w.array() == 1.0).all());

  NoiseScales inn = NoiseScales::innovative(0, 0.5);
  CHECK(inn.w_diag(2)(0) == doctest::Approx(3.0));
  CHECK(inn.v_diag(2).isOnes());
}

}  // TEST_SUITE
