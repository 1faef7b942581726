#include "cebass/simulate.hpp"

#include <cmath>

#include "cebass/errors.hpp"

namespace cebass {

namespace {

StateSpaceModel random_walk_model(double sigma_a, double sigma_i) {
  StateSpaceModel m;
  m.A = Eigen::MatrixXd::Ones(1, 1);
  m.C = Eigen::MatrixXd::Ones(1, 1);
  m.obs_var = Eigen::VectorXd::Constant(1, sigma_a * sigma_a);
  m.inn_var = Eigen::VectorXd::Constant(1, sigma_i * sigma_i);
  return m;
}

StateSpaceModel two_measurement_model() {
  StateSpaceModel m;
  m.A = Eigen::MatrixXd::Ones(1, 1);
  m.C = Eigen::MatrixXd::Ones(2, 1);
  m.obs_var = Eigen::VectorXd::Constant(2, 1.0);
  m.inn_var = Eigen::VectorXd::Constant(1, 0.01);
  return m;
}

StateSpaceModel trend_model() {
  // position + trend; only the position is observed
  StateSpaceModel m;
  m.A.resize(2, 2);
  m.A << 1.0, 1.0, 0.0, 1.0;
  m.C.resize(1, 2);
  m.C << 1.0, 0.0;
  m.obs_var = Eigen::VectorXd::Constant(1, 1.0);
  m.inn_var.resize(2);
  m.inn_var << 0.01, 0.0001;  // sigma_I = (0.1, 0.01)
  return m;
}

StateSpaceModel observed_trend_model() {
  // position + trend, both observed
  StateSpaceModel m;
  m.A.resize(2, 2);
  m.A << 1.0, 1.0, 0.0, 1.0;
  m.C = Eigen::MatrixXd::Identity(2, 2);
  m.obs_var = Eigen::VectorXd::Constant(2, 1.0);
  m.inn_var.resize(2);
  m.inn_var << 0.01, 0.0001;
  return m;
}

constexpr long kAnomalyTimes[4] = {100, 300, 600, 900};

}  // namespace

StateSpaceModel Scenario::model() const {
  switch (model_id) {
    case 1:
      return random_walk_model(1.0, 0.1);
    case 2:
      return two_measurement_model();
    case 3:
      return trend_model();
    case 4:
      return observed_trend_model();
    default:
      throw ConfigError("scenario: model_id must be 1..4");
  }
}

std::vector<Injection> Scenario::injections() const {
  using K = NoiseScales::Kind;
  std::vector<Injection> inj;
  if (regime == Regime::None) return inj;

  auto add = [&](long t, K kind, int comp, double value) {
    inj.push_back(Injection{t, kind, comp, value});
  };

  switch (model_id) {
    case 1:
      // realised noise products: 10 for both anomaly types
      if (regime == Regime::AdditiveOnly) {
        for (long t : kAnomalyTimes) add(t, K::Additive, 0, 10.0);
      } else if (regime == Regime::InnovativeOnly) {
        for (long t : kAnomalyTimes) add(t, K::Innovative, 0, 10.0);
      } else {
        add(100, K::Additive, 0, 10.0);
        add(300, K::Innovative, 0, 10.0);
        add(600, K::Innovative, 0, 10.0);
        add(900, K::Additive, 0, 10.0);
      }
      break;
    case 2:
      if (regime == Regime::AdditiveOnly) {
        // one in the first component, two in the second, one in the first
        add(100, K::Additive, 0, 10.0);
        add(300, K::Additive, 1, 10.0);
        add(600, K::Additive, 1, 10.0);
        add(900, K::Additive, 0, 10.0);
      } else if (regime == Regime::InnovativeOnly) {
        for (long t : kAnomalyTimes) add(t, K::Innovative, 0, 10.0);
      } else {
        add(100, K::Additive, 0, 10.0);
        add(300, K::Innovative, 0, 10.0);
        add(600, K::Innovative, 0, 10.0);
        add(900, K::Additive, 1, 10.0);
      }
      break;
    case 3: {
      // V^{1/2} eps = 30; W^{1/2} eta = 100 (position) or 500 (trend), so the
      // state jumps by sigma_I * eta: 10 and 5.
      const double ao = 30.0;
      const double io1 = 100.0 * 0.1;
      const double io2 = 500.0 * 0.01;
      if (regime == Regime::AdditiveOnly) {
        for (long t : kAnomalyTimes) add(t, K::Additive, 0, ao);
      } else if (regime == Regime::InnovativeOnly) {
        // second component first, alternating
        add(100, K::Innovative, 1, io2);
        add(300, K::Innovative, 0, io1);
        add(600, K::Innovative, 1, io2);
        add(900, K::Innovative, 0, io1);
      } else {
        add(100, K::Additive, 0, ao);
        add(300, K::Innovative, 0, io1);
        add(600, K::Innovative, 1, io2);
        add(900, K::Additive, 0, ao);
      }
      break;
    }
    case 4: {
      // here the stated products include sigma_I: jumps of 100 and 500
      const double ao = 30.0;
      const double io1 = 100.0;
      const double io2 = 500.0;
      if (regime == Regime::AdditiveOnly) {
        for (long t : kAnomalyTimes) add(t, K::Additive, 0, ao);
      } else if (regime == Regime::InnovativeOnly) {
        add(100, K::Innovative, 1, io2);
        add(300, K::Innovative, 0, io1);
        add(600, K::Innovative, 1, io2);
        add(900, K::Innovative, 0, io1);
      } else {
        add(100, K::Additive, 0, ao);
        add(300, K::Innovative, 0, io1);
        add(600, K::Innovative, 1, io2);
        add(900, K::Additive, 0, ao);
      }
      break;
    }
    default:
      throw ConfigError("scenario: model_id must be 1..4");
  }
  return inj;
}

const char* Scenario::regime_name(Regime r) {
  switch (r) {
    case Regime::None:
      return "none";
    case Regime::AdditiveOnly:
      return "ao";
    case Regime::InnovativeOnly:
      return "io";
    case Regime::Both:
      return "both";
  }
  return "?";
}

SimulatedStream generate(const StateSpaceModel& model, int horizon,
                         const std::vector<Injection>& injections, Rng& rng) {
  model.validate();
  const Eigen::Index p = model.p();
  const Eigen::Index q = model.q();

  SimulatedStream out;
  out.ys.reserve(horizon);
  out.xs.reserve(horizon);
  out.labels = injections;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(q);
  for (long t = 1; t <= horizon; ++t) {
    Eigen::VectorXd inn(q);
    for (Eigen::Index j = 0; j < q; ++j) inn(j) = std::sqrt(model.inn_var(j)) * rng.normal();
    Eigen::VectorXd obs(p);
    for (Eigen::Index i = 0; i < p; ++i) obs(i) = std::sqrt(model.obs_var(i)) * rng.normal();
    for (const Injection& inj : injections) {
      if (inj.time != t) continue;
      if (inj.kind == NoiseScales::Kind::Innovative) {
        inn(inj.component) = inj.value;
      } else if (inj.kind == NoiseScales::Kind::Additive) {
        obs(inj.component) = inj.value;
      }
    }
    x = model.A * x + inn;
    out.xs.push_back(x);
    out.ys.push_back(model.C * x + obs);
  }
  return out;
}

SimulatedStream generate(const Scenario& scenario, Rng& rng) {
  const StateSpaceModel m = scenario.model();
  return generate(m, scenario.horizon, scenario.injections(), rng);
}

MetricResult evaluate(const std::vector<Eigen::VectorXd>& ys,
                      const std::vector<Eigen::VectorXd>& pred_means,
                      const std::vector<double>& pred_log_liks,
                      const std::vector<Injection>& labels, int model_id) {
  if (ys.size() != pred_means.size() || ys.size() != pred_log_liks.size()) {
    throw ConfigError("evaluate: series lengths differ");
  }
  MetricResult res;
  for (const Injection& inj : labels) {
    res.excluded_times.insert(inj.time);
    res.excluded_times_mse.insert(inj.time);
    const int extra = (model_id == 1) ? 1 : (model_id == 3) ? 2 : 0;
    for (int e = 1; e <= extra; ++e) res.excluded_times_mse.insert(inj.time + e);
  }

  double ll = 0.0, mse = 0.0;
  long n_ll = 0, n_mse = 0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const long t = static_cast<long>(i) + 1;
    if (!res.excluded_times.count(t)) {
      ll += pred_log_liks[i];
      ++n_ll;
    }
    if (!res.excluded_times_mse.count(t)) {
      mse += (ys[i] - pred_means[i]).squaredNorm();
      ++n_mse;
    }
  }
  res.avg_pred_log_lik = n_ll > 0 ? ll / static_cast<double>(n_ll) : 0.0;
  res.avg_pred_mse = n_mse > 0 ? mse / static_cast<double>(n_mse) : 0.0;
  return res;
}

MetricResult run_and_evaluate(const FilterRunner& runner, const SimulatedStream& stream,
                              const StateSpaceModel& model, const GaussianState& init,
                              int model_id) {
  const std::vector<PredictiveStep> steps = runner(stream.ys, model, init);
  std::vector<Eigen::VectorXd> means;
  std::vector<double> lls;
  means.reserve(steps.size());
  lls.reserve(steps.size());
  for (const PredictiveStep& s : steps) {
    means.push_back(s.mean);
    lls.push_back(s.log_lik);
  }
  return evaluate(stream.ys, means, lls, stream.labels, model_id);
}

}  // namespace cebass
