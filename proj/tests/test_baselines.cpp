#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cebass/baselines.hpp"
#include "cebass/linalg.hpp"
#include "cebass/model.hpp"
#include "cebass/rng.hpp"
#include "cebass/simulate.hpp"
#include "oracles.hpp"

using namespace cebass;

namespace {

StateSpaceModel model1() {
  StateSpaceModel m;
  m.A = Eigen::MatrixXd::Ones(1, 1);
  m.C = Eigen::MatrixXd::Ones(1, 1);
  m.obs_var = Eigen::VectorXd::Constant(1, 1.0);
  m.inn_var = Eigen::VectorXd::Constant(1, 0.01);
  return m;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("classical filter scores equal the joint stacked density") {
  StateSpaceModel m = model1();
  GaussianState init{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 0.09)};
  Rng rng(7);
  std::vector<Eigen::VectorXd> ys;
  const int horizon = 40;
  for (int t = 0; t < horizon; ++t) ys.push_back(Eigen::VectorXd::Constant(1, rng.normal()));

  std::vector<PredictiveStep> steps = classical_kf(ys, m, init);
  double total = 0.0;
  for (const auto& s : steps) total += s.log_lik;

  oracles::StackedJoint joint = oracles::stacked_joint(m, init, horizon);
  Eigen::VectorXd stacked(horizon);
  for (int t = 0; t < horizon; ++t) stacked(t) = ys[static_cast<std::size_t>(t)](0);
  CHECK(total == doctest::Approx(log_gaussian_density(stacked, joint.mean, joint.cov)).epsilon(1e-9));
}

TEST_CASE("huge clip reproduces the classical filter") {
  StateSpaceModel m = model1();
  GaussianState init{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 0.09)};
  Rng rng(3);
  std::vector<Eigen::VectorXd> ys;
  for (int t = 0; t < 50; ++t) {
    ys.push_back(Eigen::VectorXd::Constant(1, rng.normal() + (t == 25 ? 12.0 : 0.0)));
  }
  std::vector<PredictiveStep> kf = classical_kf(ys, m, init);
  for (HuberConfig::Mode mode : {HuberConfig::Mode::AO, HuberConfig::Mode::IO}) {
    std::vector<PredictiveStep> hub = huber_filter(ys, m, init, HuberConfig{1e12, mode});
    for (std::size_t t = 0; t < ys.size(); ++t) {
      CHECK(hub[t].mean(0) == doctest::Approx(kf[t].mean(0)).epsilon(1e-12));
      CHECK(hub[t].log_lik == doctest::Approx(kf[t].log_lik).epsilon(1e-12));
    }
  }
}

TEST_CASE("a spike moves the clipped filter strictly less") {
  StateSpaceModel m = model1();
  GaussianState init{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 0.09)};
  std::vector<Eigen::VectorXd> ys = {Eigen::VectorXd::Constant(1, 0.1),
                                     Eigen::VectorXd::Constant(1, 30.0),
                                     Eigen::VectorXd::Constant(1, 0.1)};
  std::vector<PredictiveStep> kf = classical_kf(ys, m, init);
  std::vector<PredictiveStep> ao = huber_filter(ys, m, init, HuberConfig{2.0, HuberConfig::Mode::AO});
  // compare the post-spike predictions: the clipped filter stayed closer to home
  CHECK(std::abs(ao[2].mean(0)) < std::abs(kf[2].mean(0)));
}

TEST_CASE("update shrinkage is monotone and continuous in clip") {
  StateSpaceModel m = model1();
  GaussianState init{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 0.09)};
  std::vector<Eigen::VectorXd> ys = {Eigen::VectorXd::Constant(1, 8.0)};

  double prev_move = 0.0;
  for (double clip : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    std::vector<Eigen::VectorXd> two = {ys[0], Eigen::VectorXd::Constant(1, 0.0)};
    std::vector<PredictiveStep> ao = huber_filter(two, m, init, HuberConfig{clip, HuberConfig::Mode::AO});
    const double move = std::abs(ao[1].mean(0));
    CHECK(move >= prev_move - 1e-12);
    prev_move = move;
  }

  std::vector<Eigen::VectorXd> two = {ys[0], Eigen::VectorXd::Constant(1, 0.0)};
  auto at = [&](double clip) {
    return huber_filter(two, m, init, HuberConfig{clip, HuberConfig::Mode::AO})[1].mean(0);
  };
  CHECK(std::abs(at(2.0 + 1e-7) - at(2.0)) < 1e-5);
}

TEST_CASE("AO Huberisation beats the classical filter on additive-outlier streams") {
  Scenario sc;
  sc.model_id = 1;
  sc.regime = Regime::AdditiveOnly;
  const StateSpaceModel m = sc.model();
  const GaussianState init{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 0.0951)};

  Rng master(2024);
  double diff_acc = 0.0;
  const int reps = 8;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = master.fork(static_cast<std::uint64_t>(rep));
    SimulatedStream stream = generate(sc, rng);

    auto eval = [&](const std::vector<PredictiveStep>& steps) {
      std::vector<Eigen::VectorXd> means;
      std::vector<double> lls;
      for (const auto& s : steps) {
        means.push_back(s.mean);
        lls.push_back(s.log_lik);
      }
      return evaluate(stream.ys, means, lls, stream.labels, sc.model_id).avg_pred_log_lik;
    };

    const double kf_score = eval(classical_kf(stream.ys, m, init));
    const double ao_score = eval(huber_filter(stream.ys, m, init, HuberConfig{2.0, HuberConfig::Mode::AO}));
    diff_acc += ao_score - kf_score;
  }
  CHECK(diff_acc / reps > 0.0);
}

}  // TEST_SUITE
