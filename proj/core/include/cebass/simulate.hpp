#pragma once

#include <Eigen/Dense>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "cebass/baselines.hpp"
#include "cebass/model.hpp"
#include "cebass/rng.hpp"

namespace cebass {

/// One injected anomaly: at step `time`, `value` deterministically replaces
/// the corresponding noise product (the realised observation offset for
/// additive, the realised state-increment term for innovative).
struct Injection {
  long time = 0;
  NoiseScales::Kind kind = NoiseScales::Kind::Typical;
  int component = 0;
  double value = 0.0;
};

enum class Regime { None, AdditiveOnly, InnovativeOnly, Both };

/// The 16 simulation cells: four models, four regimes, T = 1000 with
/// anomalies at 100/300/600/900 and the per-model injected magnitudes.
struct Scenario {
  int model_id = 1;  // 1..4
  Regime regime = Regime::None;
  int horizon = 1000;

  StateSpaceModel model() const;
  std::vector<Injection> injections() const;
  static const char* regime_name(Regime r);
};

struct SimulatedStream {
  std::vector<Eigen::VectorXd> ys;
  std::vector<Eigen::VectorXd> xs;  // ground truth states
  std::vector<Injection> labels;
};

/// Simulate the model with the given injections. States start from x_0 = 0.
SimulatedStream generate(const StateSpaceModel& model, int horizon,
                         const std::vector<Injection>& injections, Rng& rng);
SimulatedStream generate(const Scenario& scenario, Rng& rng);

struct MetricResult {
  double avg_pred_log_lik = 0.0;
  double avg_pred_mse = 0.0;
  std::set<long> excluded_times;      // log-lik exclusions (the anomaly steps)
  std::set<long> excluded_times_mse;  // adds the post-anomaly steps per model
};

/// Average one-step predictive log density and mean squared error, excluding
/// the anomaly steps and, for the MSE, one extra step after each anomaly for
/// model 1 and two for model 3.
MetricResult evaluate(const std::vector<Eigen::VectorXd>& ys,
                      const std::vector<Eigen::VectorXd>& pred_means,
                      const std::vector<double>& pred_log_liks,
                      const std::vector<Injection>& labels, int model_id);

/// Any filter the harness can score: stream in, one predictive summary per
/// step out. classical_kf / huber_filter fit directly; external filters plug
/// in for parity runs.
using FilterRunner = std::function<std::vector<PredictiveStep>(
    const std::vector<Eigen::VectorXd>& ys, const StateSpaceModel& model,
    const GaussianState& init)>;

MetricResult run_and_evaluate(const FilterRunner& runner, const SimulatedStream& stream,
                              const StateSpaceModel& model, const GaussianState& init,
                              int model_id);

}  // namespace cebass
