#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "cebass/backsampling.hpp"
#include "cebass/calibration.hpp"
#include "cebass/model.hpp"
#include "cebass/proposals.hpp"
#include "cebass/rng.hpp"

namespace cebass {

/// Most recent anomaly in a particle's ancestry. Typical steps inherit the
/// tag; sampling a new anomaly overwrites it. `time` is the back-dated
/// location: a back-sampled anomaly over a window of h observations processed
/// at step t is attributed to step t + 1 - h.
struct AnomalyTag {
  long time = 0;
  NoiseScales::Kind kind = NoiseScales::Kind::Typical;
  int component = -1;
};

struct Particle {
  GaussianState state;
  double log_weight = 0.0;  // normalised within the current set
  NoiseScales last_scales = NoiseScales::typical();
  int horizon = 1;  // window length sampled this step (1 for typical/additive)
  std::optional<AnomalyTag> tag;
};

struct FilterConfig {
  int n_particles = 20;   // N maintained after subsampling
  int m_descendants = 1;  // M draws per anomaly stratum
  HyperParams hp;
  std::vector<std::vector<int>> horizons;  // B_j, window lengths per state component
  std::uint64_t seed = 0;
  double anomaly_threshold = 0.5;

  int max_horizon() const;
  void validate(const StateSpaceModel& model) const;
};

/// Knobs for assembling a calibrated FilterConfig. Scales always come from
/// the steady-state calibration; probabilities and shapes may be overridden.
struct FilterOptions {
  int n_particles = 20;
  int m_descendants = 1;
  std::uint64_t seed = 0;
  double anomaly_threshold = 0.5;
  double shape = 3.0;                       // common Gamma shape c
  std::optional<Eigen::VectorXd> r;         // additive anomaly probabilities
  std::optional<Eigen::VectorXd> s;         // innovative anomaly probabilities
  std::optional<std::vector<std::vector<int>>> horizons;  // explicit B_j override
  std::optional<int> max_horizon;           // B_j = {1..max}, filtered for visibility
  std::optional<double> rho;                // autocorrelation probability transform
};

/// Runs the steady-state calibration and resolves horizon sets. User-supplied
/// horizon sets are filtered down to windows where the component is visible
/// (a window whose augmented column is zero cannot propose).
FilterConfig build_filter_config(const StateSpaceModel& model, const FilterOptions& opts = {});

/// mu = 0, Sigma = steady-state filtering covariance.
GaussianState default_initial_state(const StateSpaceModel& model);

/// Threshold crossing of an anomaly posterior.
struct FlagEvent {
  long detect_time = 0;   // step at which the posterior first crossed
  long anomaly_time = 0;  // back-dated location
  NoiseScales::Kind kind = NoiseScales::Kind::Typical;
  int component = -1;
  double probability = 0.0;
};

struct AnomalyReport {
  long time = 0;
  Eigen::VectorXd p_additive;    // posterior of an anomaly at exactly this step
  Eigen::VectorXd p_innovative;
  GaussianState map_state;       // highest-weight particle after the step
  double predictive_log_lik = 0.0;  // log of the one-step mixture evidence
  Eigen::VectorXd predictive_mean;  // before seeing this step's observation
  Eigen::MatrixXd predictive_var;
  std::optional<FlagEvent> flag;    // strongest crossing fired this step, if any
};

/// Fearnhead-Clifford optimal stratified resampling. `weights` must be
/// normalised. Solves sum_i min(w_i / kappa, 1) = n_keep; candidates with
/// w_i >= kappa are kept at their weight, the rest are selected by a
/// systematic pass and kept with weight kappa, so E[retained weight] equals
/// the input weight for every candidate.
struct SubsampleResult {
  std::vector<int> kept;         // candidate indices
  std::vector<double> weights;   // retained weights, parallel to kept
  double kappa = 0.0;
};
SubsampleResult stratified_subsample(const std::vector<double>& weights, int n_keep, Rng& rng);

/// Streaming particle filter with back-sampling. One instance per stream;
/// candidate generation is pure given per-particle substreams, the
/// subsampling step is the sequential barrier.
class CebassFilter {
 public:
  CebassFilter(StateSpaceModel model, FilterConfig cfg, GaussianState init);

  AnomalyReport step(const Eigen::VectorXd& y);
  std::vector<AnomalyReport> run(const std::vector<Eigen::VectorXd>& ys);

  const std::vector<Particle>& particles() const { return particles_; }
  const std::vector<FlagEvent>& flag_events() const { return events_; }
  long time() const { return t_; }

  /// Posterior probability, under the current particle set, of an anomaly of
  /// the given kind/component back-dated to `anomaly_time`.
  double current_posterior(long anomaly_time, NoiseScales::Kind kind, int component) const;

  /// Highest posterior ever tracked for a bucket (0 when never seen above
  /// the tracking floor). Key order: time, kind, component.
  struct TrackRecord {
    long time;
    NoiseScales::Kind kind;
    int component;
    double max_probability;
    bool fired;
  };
  std::vector<TrackRecord> anomaly_records() const;

 private:
  AnomalyReport step_impl(const Eigen::VectorXd& y);

  struct Snapshot {
    GaussianState state;
    double log_weight = 0.0;
    std::optional<AnomalyTag> tag;
    WindowPass pass;
  };
  struct Candidate {
    double raw_log_weight = 0.0;
    int slot = 0;   // 1-based age of the source snapshot (== horizon)
    int index = 0;  // particle within the slot
    NoiseScales scales = NoiseScales::typical();
  };

  void push_snapshot();
  void track_posteriors(AnomalyReport& report);

  StateSpaceModel model_;
  FilterConfig cfg_;
  Rng master_;
  long t_ = 0;
  std::vector<Particle> particles_;
  std::deque<std::vector<Snapshot>> snapshots_;  // front = age 1
  std::deque<Eigen::VectorXd> obs_window_;       // back = newest
  std::deque<double> step_evidence_;             // log Z_s, back = newest
  std::vector<FlagEvent> events_;

  struct Track {
    double max_prob = 0.0;
    bool fired = false;
  };
  std::map<std::tuple<long, int, int>, Track> tracks_;
  long prune_before_ = 0;
};

}  // namespace cebass
