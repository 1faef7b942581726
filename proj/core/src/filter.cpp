#include "cebass/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cebass/errors.hpp"

namespace cebass {

namespace {
constexpr std::uint64_t kSubsampleStream = 0xFFFFFFFFULL;
constexpr double kTrackFloor = 0.05;
constexpr int kTrackSlack = 16;

int kind_code(NoiseScales::Kind k) { return static_cast<int>(k); }
}  // namespace

int FilterConfig::max_horizon() const {
  int m = 0;
  for (const auto& bj : horizons) {
    for (int h : bj) m = std::max(m, h);
  }
  return m;
}

void FilterConfig::validate(const StateSpaceModel& model) const {
  if (n_particles < 1) throw ConfigError("filter: N must be >= 1");
  if (m_descendants < 1) throw ConfigError("filter: M must be >= 1");
  if (!(anomaly_threshold > 0.0 && anomaly_threshold < 1.0)) {
    throw ConfigError("filter: anomaly threshold must lie in (0, 1)");
  }
  if (static_cast<Eigen::Index>(horizons.size()) != model.q()) {
    throw ConfigError("filter: one horizon set per state component required");
  }
  for (const auto& bj : horizons) {
    if (bj.empty()) throw ConfigError("filter: empty horizon set");
    int prev = 0;
    for (int h : bj) {
      if (h < 1) throw ConfigError("filter: horizons must be >= 1");
      if (h <= prev) throw ConfigError("filter: horizon sets must be strictly increasing");
      prev = h;
    }
  }
  if (hp.r.size() != model.p() || hp.s.size() != model.q()) {
    throw ConfigError("filter: hyperparameter dimensions do not match the model");
  }
}

FilterConfig build_filter_config(const StateSpaceModel& model, const FilterOptions& opts) {
  model.validate();
  const Eigen::Index p = model.p();
  const Eigen::Index q = model.q();

  const SteadyState ss = steady_state(model);

  std::vector<std::vector<int>> horizons;
  if (opts.horizons) {
    horizons.resize(q);
    for (Eigen::Index j = 0; j < q; ++j) {
      const auto& user = (*opts.horizons)[static_cast<std::size_t>(j)];
      int h_max = 0;
      for (int h : user) h_max = std::max(h_max, h);
      const int first = min_visible_window(model, static_cast<int>(j), std::max(h_max, 1));
      for (int h : user) {
        if (h < 1) throw ConfigError("filter: horizons must be >= 1");
        if (first > 0 && h >= first) horizons[static_cast<std::size_t>(j)].push_back(h);
      }
      if (horizons[static_cast<std::size_t>(j)].empty()) {
        throw ConfigError("filter: component " + std::to_string(j + 1) +
                          " is invisible at every requested horizon");
      }
      std::sort(horizons[j].begin(), horizons[j].end());
      horizons[j].erase(std::unique(horizons[j].begin(), horizons[j].end()), horizons[j].end());
    }
  } else if (opts.max_horizon) {
    if (*opts.max_horizon < 1) throw ConfigError("filter: max_horizon must be >= 1");
    horizons.resize(q);
    for (Eigen::Index j = 0; j < q; ++j) {
      const int first = min_visible_window(model, static_cast<int>(j), *opts.max_horizon);
      if (first == 0) {
        throw ConfigError("filter: component " + std::to_string(j + 1) +
                          " is invisible within max_horizon");
      }
      for (int h = first; h <= *opts.max_horizon; ++h) {
        horizons[static_cast<std::size_t>(j)].push_back(h);
      }
    }
  } else {
    horizons = default_horizons(model, observability_index(model));
  }

  const ScaleCalibration cal = proposal_scales(model, ss);
  const Eigen::VectorXd sigma_hat_bs = backsample_innovation_scales(model, ss, horizons);

  Eigen::VectorXd r = opts.r ? *opts.r : Eigen::VectorXd::Constant(p, 1e-3 / static_cast<double>(p + q));
  Eigen::VectorXd s = opts.s ? *opts.s : Eigen::VectorXd::Constant(q, 1e-3 / static_cast<double>(p + q));
  if (r.size() != p) throw ConfigError("filter: r must have length p");
  if (s.size() != q) throw ConfigError("filter: s must have length q");

  FilterConfig cfg;
  cfg.n_particles = opts.n_particles;
  cfg.m_descendants = opts.m_descendants;
  cfg.seed = opts.seed;
  cfg.anomaly_threshold = opts.anomaly_threshold;
  cfg.horizons = std::move(horizons);
  cfg.hp = HyperParams::make(std::move(r), std::move(s),
                             Eigen::VectorXd::Constant(p, opts.shape),
                             Eigen::VectorXd::Constant(q, opts.shape), cal.sigma_tilde,
                             sigma_hat_bs);
  if (opts.rho) cfg.hp = cfg.hp.autocorrelation_adjusted(*opts.rho);
  cfg.validate(model);
  return cfg;
}

GaussianState default_initial_state(const StateSpaceModel& model) {
  const SteadyState ss = steady_state(model);
  return GaussianState{Eigen::VectorXd::Zero(model.q()), ss.sigma_limit};
}

SubsampleResult stratified_subsample(const std::vector<double>& weights, int n_keep, Rng& rng) {
  if (n_keep <= 0) throw ConfigError("subsample: N must be positive");
  const int k = static_cast<int>(weights.size());
  SubsampleResult res;
  if (k <= n_keep) {
    res.kept.resize(k);
    std::iota(res.kept.begin(), res.kept.end(), 0);
    res.weights = weights;
    return res;
  }

  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return weights[a] > weights[b]; });

  // suffix sums over the sorted weights
  std::vector<double> tail(k + 1, 0.0);
  for (int i = k - 1; i >= 0; --i) tail[i] = tail[i + 1] + weights[order[i]];

  int n_det = 0;
  double kappa = tail[0] / n_keep;
  while (n_det < n_keep) {
    kappa = tail[n_det] / (n_keep - n_det);
    if (weights[order[n_det]] >= kappa) {
      ++n_det;
    } else {
      break;
    }
  }

  for (int i = 0; i < n_det; ++i) {
    res.kept.push_back(order[i]);
    res.weights.push_back(weights[order[i]]);
  }
  res.kappa = kappa;

  const int n_strat = n_keep - n_det;
  if (n_strat > 0 && tail[n_det] > 0.0) {
    kappa = tail[n_det] / n_strat;
    res.kappa = kappa;
    double u = rng.uniform() * kappa;
    double cum = 0.0;
    int selected = 0;
    for (int i = n_det; i < k && selected < n_strat; ++i) {
      cum += weights[order[i]];
      if (cum > u) {
        res.kept.push_back(order[i]);
        res.weights.push_back(kappa);
        ++selected;
        u += kappa;
      }
    }
    // float rounding can starve the last grid point of the pass
    for (int i = k - 1; selected < n_strat && i >= n_det; --i) {
      if (std::find(res.kept.begin() + n_det, res.kept.end(), order[i]) == res.kept.end()) {
        res.kept.push_back(order[i]);
        res.weights.push_back(kappa);
        ++selected;
      }
    }
  }
  return res;
}

CebassFilter::CebassFilter(StateSpaceModel model, FilterConfig cfg, GaussianState init)
    : model_(std::move(model)), cfg_(std::move(cfg)), master_(cfg_.seed) {
  model_.validate();
  cfg_.validate(model_);
  if (init.mean.size() != model_.q() || init.cov.rows() != model_.q()) {
    throw ConfigError("filter: initial state dimension mismatch");
  }
  Particle p0;
  p0.state = std::move(init);
  p0.log_weight = 0.0;
  particles_.push_back(std::move(p0));
}

void CebassFilter::push_snapshot() {
  std::vector<Snapshot> slot;
  slot.reserve(particles_.size());
  for (const Particle& p : particles_) {
    Snapshot snap;
    snap.state = p.state;
    snap.log_weight = p.log_weight;
    snap.tag = p.tag;
    snap.pass = WindowPass(p.state, model_);
    slot.push_back(std::move(snap));
  }
  snapshots_.push_front(std::move(slot));
  const std::size_t depth = static_cast<std::size_t>(cfg_.max_horizon());
  while (snapshots_.size() > depth) snapshots_.pop_back();
}

AnomalyReport CebassFilter::step(const Eigen::VectorXd& y) {
  try {
    return step_impl(y);
  } catch (const SingularCovarianceError& e) {
    throw SingularCovarianceError(std::string(e.what()) + " (at step " + std::to_string(t_) +
                                  ")");
  }
}

AnomalyReport CebassFilter::step_impl(const Eigen::VectorXd& y) {
  if (y.size() != model_.p()) throw DataError("filter: observation dimension mismatch");
  t_ += 1;
  const int m = cfg_.m_descendants;
  const Eigen::Index p = model_.p();
  const Eigen::Index q = model_.q();

  AnomalyReport report;
  report.time = t_;

  // one-step predictive mixture from the current particles, before the update
  {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(p, p);
    for (const Particle& part : particles_) {
      const double w = std::exp(part.log_weight);
      const Eigen::VectorXd mi = model_.C * (model_.A * part.state.mean);
      mean += w * mi;
      second += w * (predictive_variance(part.state, model_) + mi * mi.transpose());
    }
    report.predictive_mean = mean;
    report.predictive_var = symmetrized(second - mean * mean.transpose());
  }

  push_snapshot();
  obs_window_.push_back(y);
  while (obs_window_.size() > static_cast<std::size_t>(cfg_.max_horizon())) {
    obs_window_.pop_front();
  }
  for (auto& slot : snapshots_) {
    for (Snapshot& snap : slot) snap.pass.extend(y, model_);
  }

  // which components back-sample at which window length
  const int max_h = cfg_.max_horizon();
  std::vector<std::vector<int>> comps_at(static_cast<std::size_t>(max_h) + 1);
  for (int j = 0; j < q; ++j) {
    for (int h : cfg_.horizons[static_cast<std::size_t>(j)]) {
      comps_at[static_cast<std::size_t>(h)].push_back(j);
    }
  }

  std::size_t horizon_strata = 0;
  for (const auto& bj : cfg_.horizons) horizon_strata += bj.size();
  std::vector<Candidate> cands;
  cands.reserve(snapshots_.front().size() *
                (1 + static_cast<std::size_t>(m) * (static_cast<std::size_t>(p) + horizon_strata)));

  // typical + additive descendants of the age-1 particles
  {
    const auto& slot = snapshots_.front();
    for (int idx = 0; idx < static_cast<int>(slot.size()); ++idx) {
      const Snapshot& snap = slot[static_cast<std::size_t>(idx)];
      const ProposalContext ctx = ProposalContext::make(snap.state, y, model_);
      Rng rng = master_.fork(static_cast<std::uint64_t>(t_), 0, static_cast<std::uint64_t>(idx));

      Candidate c;
      c.slot = 1;
      c.index = idx;
      const ProposalDraw typical = sample_typical(ctx, cfg_.hp);
      c.raw_log_weight = snap.log_weight + typical.log_weight;
      c.scales = typical.scales;
      cands.push_back(c);

      for (int i = 0; i < p; ++i) {
        for (int rep = 0; rep < m; ++rep) {
          const ProposalDraw d = sample_additive_component(i, ctx, model_, cfg_.hp, m, rng);
          Candidate ca;
          ca.slot = 1;
          ca.index = idx;
          ca.raw_log_weight = snap.log_weight + d.log_weight;
          ca.scales = d.scales;
          cands.push_back(ca);
        }
      }
    }
  }

  // Back-sampled innovative descendants, one stratum per (window, particle,
  // component). Particle weights are renormalised once per step, so a window
  // proposal re-explaining steps t-h+1..t-1 must give back those steps'
  // normalisation constants: its raw weight is divided by the product of the
  // intermediate per-step evidences (for h = 1 nothing changes and the
  // bookkeeping is exactly the unnormalised prob * prob_prev of the
  // single-step algorithm).
  std::vector<double> evidence_back(static_cast<std::size_t>(max_h), 0.0);
  {
    double acc = 0.0;
    for (int k = 1; k < max_h; ++k) {
      if (static_cast<std::size_t>(k) <= step_evidence_.size()) {
        acc += step_evidence_[step_evidence_.size() - static_cast<std::size_t>(k)];
      }
      evidence_back[static_cast<std::size_t>(k)] = acc;
    }
  }
  for (int h = 1; h <= max_h; ++h) {
    if (comps_at[static_cast<std::size_t>(h)].empty()) continue;
    if (static_cast<std::size_t>(h) > snapshots_.size()) break;
    const double evidence_correction = evidence_back[static_cast<std::size_t>(h - 1)];
    const auto& slot = snapshots_[static_cast<std::size_t>(h - 1)];
    for (int idx = 0; idx < static_cast<int>(slot.size()); ++idx) {
      const Snapshot& snap = slot[static_cast<std::size_t>(idx)];
      Rng rng = master_.fork(static_cast<std::uint64_t>(t_), static_cast<std::uint64_t>(h),
                             static_cast<std::uint64_t>(idx));
      const double extra_prior = (h - 1) * cfg_.hp.log_typical_prob();
      for (int j : comps_at[static_cast<std::size_t>(h)]) {
        if (!(snap.pass.d(j) > 0.0)) continue;
        const RankOneSite site = snap.pass.site(j, model_, cfg_.hp);
        const double log_m_eff =
            std::log(static_cast<double>(m) *
                     static_cast<double>(cfg_.horizons[static_cast<std::size_t>(j)].size()));
        for (int rep = 0; rep < m; ++rep) {
          const double precision = site.sample_precision(rng);
          Candidate c;
          c.slot = h;
          c.index = idx;
          c.scales = NoiseScales::innovative(j, precision);
          c.raw_log_weight = snap.log_weight - evidence_correction +
                             site.log_weight(precision, log_m_eff, extra_prior);
          cands.push_back(c);
        }
      }
    }
  }

  // normalise and record the per-step evidence
  Eigen::VectorXd raw(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) raw(static_cast<Eigen::Index>(i)) = cands[i].raw_log_weight;
  const double lse = log_sum_exp(raw);
  if (!std::isfinite(lse)) {
    throw DegenerateFilterError("filter: all candidate weights vanished at step " +
                                std::to_string(t_));
  }
  report.predictive_log_lik = lse;
  step_evidence_.push_back(lse);
  while (step_evidence_.size() >= static_cast<std::size_t>(cfg_.max_horizon())) {
    step_evidence_.pop_front();
  }

  std::vector<double> norm(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) norm[i] = std::exp(cands[i].raw_log_weight - lse);

  Rng sub_rng = master_.fork(static_cast<std::uint64_t>(t_), kSubsampleStream, 0);
  const SubsampleResult sel = stratified_subsample(norm, cfg_.n_particles, sub_rng);

  double wsum = 0.0;
  for (double w : sel.weights) wsum += w;

  std::vector<Particle> next;
  next.reserve(sel.kept.size());
  std::vector<Eigen::VectorXd> window;
  for (std::size_t i = 0; i < sel.kept.size(); ++i) {
    const Candidate& c = cands[static_cast<std::size_t>(sel.kept[i])];
    const Snapshot& snap = snapshots_[static_cast<std::size_t>(c.slot - 1)][static_cast<std::size_t>(c.index)];

    window.assign(obs_window_.end() - c.slot, obs_window_.end());
    const ReplayResult rep = replay_updates(c.scales, snap.state, model_,
                                            std::span(window.data(), window.size()));

    Particle part;
    part.state = rep.state;
    part.log_weight = std::log(sel.weights[i] / wsum);
    part.last_scales = c.scales;
    part.horizon = c.slot;
    switch (c.scales.kind()) {
      case NoiseScales::Kind::Typical:
        part.tag = snap.tag;
        break;
      case NoiseScales::Kind::Additive:
        part.tag = AnomalyTag{t_, NoiseScales::Kind::Additive, c.scales.component()};
        break;
      case NoiseScales::Kind::Innovative:
        part.tag = AnomalyTag{t_ + 1 - c.slot, NoiseScales::Kind::Innovative, c.scales.component()};
        break;
    }
    next.push_back(std::move(part));
  }
  particles_ = std::move(next);

  track_posteriors(report);
  return report;
}

void CebassFilter::track_posteriors(AnomalyReport& report) {
  const Eigen::Index p = model_.p();
  const Eigen::Index q = model_.q();
  report.p_additive = Eigen::VectorXd::Zero(p);
  report.p_innovative = Eigen::VectorXd::Zero(q);

  std::map<std::tuple<long, int, int>, double> probs;
  double best_w = -std::numeric_limits<double>::infinity();
  const Particle* best = nullptr;
  for (const Particle& part : particles_) {
    if (part.log_weight > best_w) {
      best_w = part.log_weight;
      best = &part;
    }
    if (!part.tag) continue;
    const double w = std::exp(part.log_weight);
    probs[{part.tag->time, kind_code(part.tag->kind), part.tag->component}] += w;
    if (part.tag->time == t_) {
      if (part.tag->kind == NoiseScales::Kind::Additive) {
        report.p_additive(part.tag->component) += w;
      } else if (part.tag->kind == NoiseScales::Kind::Innovative) {
        report.p_innovative(part.tag->component) += w;
      }
    }
  }
  if (best) report.map_state = best->state;

  const FlagEvent* strongest = nullptr;
  std::size_t events_before = events_.size();
  for (const auto& [key, prob] : probs) {
    if (prob < kTrackFloor) continue;
    Track& track = tracks_[key];
    track.max_prob = std::max(track.max_prob, prob);
    if (!track.fired && prob > cfg_.anomaly_threshold) {
      track.fired = true;
      FlagEvent ev;
      ev.detect_time = t_;
      ev.anomaly_time = std::get<0>(key);
      ev.kind = static_cast<NoiseScales::Kind>(std::get<1>(key));
      ev.component = std::get<2>(key);
      ev.probability = prob;
      events_.push_back(ev);
    }
  }
  for (std::size_t i = events_before; i < events_.size(); ++i) {
    if (!strongest || events_[i].probability > strongest->probability) strongest = &events_[i];
  }
  if (strongest) report.flag = *strongest;

  // bound the tracking map: drop entries the particle tags can no longer reach
  const long horizon_reach = cfg_.max_horizon() + kTrackSlack;
  const long cutoff = t_ - 4 * horizon_reach;
  if (cutoff > prune_before_) {
    for (auto it = tracks_.begin(); it != tracks_.end();) {
      if (std::get<0>(it->first) < cutoff && it->second.max_prob < kTrackFloor * 2) {
        it = tracks_.erase(it);
      } else {
        ++it;
      }
    }
    prune_before_ = cutoff;
  }
}

std::vector<AnomalyReport> CebassFilter::run(const std::vector<Eigen::VectorXd>& ys) {
  std::vector<AnomalyReport> out;
  out.reserve(ys.size());
  for (const auto& y : ys) out.push_back(step(y));
  return out;
}

double CebassFilter::current_posterior(long anomaly_time, NoiseScales::Kind kind,
                                       int component) const {
  double prob = 0.0;
  for (const Particle& part : particles_) {
    if (part.tag && part.tag->time == anomaly_time && part.tag->kind == kind &&
        part.tag->component == component) {
      prob += std::exp(part.log_weight);
    }
  }
  return prob;
}

std::vector<CebassFilter::TrackRecord> CebassFilter::anomaly_records() const {
  std::vector<TrackRecord> out;
  out.reserve(tracks_.size());
  for (const auto& [key, track] : tracks_) {
    out.push_back(TrackRecord{std::get<0>(key), static_cast<NoiseScales::Kind>(std::get<1>(key)),
                              std::get<2>(key), track.max_prob, track.fired});
  }
  return out;
}

}  // namespace cebass
