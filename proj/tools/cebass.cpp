// cebass: streaming robust filtering and anomaly classification.
//
//   cebass run       --config model.json --input data.csv --output report.csv
//   cebass bench     --suite paper --reps 50 --out results/
//   cebass calibrate --config model.json
//
// Exit codes: 0 success, 2 configuration error, 3 data error.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cebass/baselines.hpp"
#include "cebass/calibration.hpp"
#include "cebass/errors.hpp"
#include "cebass/filter.hpp"
#include "cebass/io.hpp"
#include "cebass/simulate.hpp"

namespace {

using namespace cebass;

std::uint64_t resolve_seed(bool seed_given, std::uint64_t cli_seed, std::uint64_t config_seed) {
  if (seed_given) return cli_seed;
  if (const char* env = std::getenv("CEBASS_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError("CEBASS_SEED is not a valid unsigned integer");
    }
  }
  return config_seed;
}

int cmd_run(const std::string& config_path, const std::string& input_path,
            const std::string& output_path, bool seed_given, std::uint64_t cli_seed) {
  RunConfig cfg = load_run_config(config_path);
  cfg.options.seed = resolve_seed(seed_given, cli_seed, cfg.options.seed);

  FilterConfig fc = build_filter_config(cfg.model, cfg.options);
  GaussianState init = cfg.init ? *cfg.init : default_initial_state(cfg.model);
  CebassFilter filter(cfg.model, fc, std::move(init));

  std::ifstream in(input_path);
  if (!in) throw DataError("input: cannot open '" + input_path + "'");
  std::ofstream out(output_path);
  if (!out) throw DataError("output: cannot open '" + output_path + "'");

  CsvStreamReader reader(in, cfg.model.p());
  write_report_header(out, cfg.model.p(), cfg.model.q());
  while (auto row = reader.next()) {
    const AnomalyReport report = filter.step(row->second);
    write_report_row(out, row->first, report);
  }
  return 0;
}

int cmd_calibrate(const std::string& config_path) {
  RunConfig cfg = load_run_config(config_path);
  const StateSpaceModel& model = cfg.model;

  const SteadyState ss = steady_state(model);
  const int k_star = observability_index(model);
  const FilterConfig fc = build_filter_config(model, cfg.options);
  const ScaleCalibration cal = proposal_scales(model, ss);

  const Eigen::IOFormat fmt(Eigen::StreamPrecision, 0, ", ", "; ", "[", "]", "[", "]");
  std::cout << "steady state converged in " << ss.iterations << " iterations\n";
  std::cout << "filtering covariance limit: " << ss.sigma_limit.format(fmt) << "\n";
  std::cout << "predictive covariance limit (Sigma_hat): " << ss.sigma_hat_limit.format(fmt)
            << "\n";
  std::cout << "observability index k*: " << k_star << "\n";
  for (std::size_t j = 0; j < fc.horizons.size(); ++j) {
    std::cout << "B_" << (j + 1) << (cfg.options.horizons ? " (user)" : " (default)") << ": {";
    for (std::size_t i = 0; i < fc.horizons[j].size(); ++i) {
      std::cout << (i ? ", " : "") << fc.horizons[j][i];
    }
    std::cout << "}\n";
  }
  std::cout << "sigma_tilde: " << cal.sigma_tilde.transpose().format(fmt) << "\n";
  std::cout << "sigma_hat (max over horizons): " << fc.hp.sigma_hat.transpose().format(fmt)
            << "\n";
  return 0;
}

struct BenchCell {
  int model_id;
  Regime regime;
};

struct BenchRow {
  std::string filter;
  double log_lik;
  double mse;
};

int cmd_bench(const std::string& suite, int reps, const std::string& out_dir, bool seed_given,
              std::uint64_t cli_seed, int threads, double clip) {
  if (suite != "paper") throw ConfigError("bench: unknown suite '" + suite + "'");
  if (reps < 1) throw ConfigError("bench: reps must be >= 1");
  if (threads < 1) throw ConfigError("bench: threads must be >= 1");
  const std::uint64_t seed = resolve_seed(seed_given, cli_seed, 0);

  std::vector<BenchCell> cells;
  for (int m = 1; m <= 4; ++m) {
    for (Regime r : {Regime::None, Regime::AdditiveOnly, Regime::InnovativeOnly, Regime::Both}) {
      cells.push_back(BenchCell{m, r});
    }
  }

  std::ostringstream clip_label;
  clip_label << clip;
  const std::vector<std::string> filter_names = {"cebass", "kf", "huber_ao_" + clip_label.str(),
                                                 "huber_io_" + clip_label.str()};

  const std::size_t n_items = cells.size() * static_cast<std::size_t>(reps);
  std::vector<std::vector<BenchRow>> results(n_items);

  Rng master(seed);
  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t item = cursor.fetch_add(1);
      if (item >= n_items) return;
      const std::size_t cell_idx = item / static_cast<std::size_t>(reps);
      const int rep = static_cast<int>(item % static_cast<std::size_t>(reps));
      const BenchCell& cell = cells[cell_idx];

      Scenario sc;
      sc.model_id = cell.model_id;
      sc.regime = cell.regime;
      const StateSpaceModel model = sc.model();

      Rng stream_rng = master.fork(static_cast<std::uint64_t>(cell.model_id),
                                   static_cast<std::uint64_t>(cell.regime),
                                   static_cast<std::uint64_t>(rep));
      const SimulatedStream stream = generate(sc, stream_rng);
      const GaussianState init = default_initial_state(model);

      std::vector<BenchRow> rows;

      {
        FilterOptions opts;
        opts.n_particles = 20;
        opts.m_descendants = 1;
        opts.seed = master
                        .fork(static_cast<std::uint64_t>(cell.model_id),
                              static_cast<std::uint64_t>(cell.regime),
                              static_cast<std::uint64_t>(rep) + 0x10000ULL)
                        .next_u64();
        const FilterConfig fc = build_filter_config(model, opts);
        CebassFilter filter(model, fc, init);
        std::vector<Eigen::VectorXd> means;
        std::vector<double> lls;
        means.reserve(stream.ys.size());
        lls.reserve(stream.ys.size());
        for (const auto& y : stream.ys) {
          const AnomalyReport rep_t = filter.step(y);
          means.push_back(rep_t.predictive_mean);
          lls.push_back(rep_t.predictive_log_lik);
        }
        const MetricResult m = evaluate(stream.ys, means, lls, stream.labels, cell.model_id);
        rows.push_back(BenchRow{filter_names[0], m.avg_pred_log_lik, m.avg_pred_mse});
      }

      auto eval_steps = [&](const std::vector<PredictiveStep>& steps, const std::string& name) {
        std::vector<Eigen::VectorXd> means;
        std::vector<double> lls;
        for (const auto& s : steps) {
          means.push_back(s.mean);
          lls.push_back(s.log_lik);
        }
        const MetricResult m = evaluate(stream.ys, means, lls, stream.labels, cell.model_id);
        rows.push_back(BenchRow{name, m.avg_pred_log_lik, m.avg_pred_mse});
      };
      eval_steps(classical_kf(stream.ys, model, init), filter_names[1]);
      eval_steps(huber_filter(stream.ys, model, init, HuberConfig{clip, HuberConfig::Mode::AO}),
                 filter_names[2]);
      eval_steps(huber_filter(stream.ys, model, init, HuberConfig{clip, HuberConfig::Mode::IO}),
                 filter_names[3]);

      results[item] = std::move(rows);
    }
  };

  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::filesystem::create_directories(out_dir);
  const std::string metrics_path = out_dir + "/metrics.csv";
  std::ofstream metrics(metrics_path);
  if (!metrics) throw DataError("bench: cannot open '" + metrics_path + "'");
  metrics << "replication,filter,model,regime,metric,value\n";
  for (std::size_t cell_idx = 0; cell_idx < cells.size(); ++cell_idx) {
    for (int rep = 0; rep < reps; ++rep) {
      const std::size_t item = cell_idx * static_cast<std::size_t>(reps) + static_cast<std::size_t>(rep);
      for (const BenchRow& row : results[item]) {
        const char* regime = Scenario::regime_name(cells[cell_idx].regime);
        metrics << rep << ',' << row.filter << ',' << cells[cell_idx].model_id << ',' << regime
                << ",avg_pred_loglik," << format_double(row.log_lik) << '\n';
        metrics << rep << ',' << row.filter << ',' << cells[cell_idx].model_id << ',' << regime
                << ",avg_pred_mse," << format_double(row.mse) << '\n';
      }
    }
  }
  metrics.close();

  const std::string summary_path = out_dir + "/summary.csv";
  std::ofstream summary(summary_path);
  if (!summary) throw DataError("bench: cannot open '" + summary_path + "'");
  summary << "model,regime,filter,metric,mean\n";
  for (std::size_t cell_idx = 0; cell_idx < cells.size(); ++cell_idx) {
    for (std::size_t f = 0; f < filter_names.size(); ++f) {
      double sum_ll = 0.0, sum_mse = 0.0;
      for (int rep = 0; rep < reps; ++rep) {
        const std::size_t item = cell_idx * static_cast<std::size_t>(reps) + static_cast<std::size_t>(rep);
        sum_ll += results[item][f].log_lik;
        sum_mse += results[item][f].mse;
      }
      const char* regime = Scenario::regime_name(cells[cell_idx].regime);
      summary << cells[cell_idx].model_id << ',' << regime << ',' << filter_names[f]
              << ",avg_pred_loglik," << format_double(sum_ll / reps) << '\n';
      summary << cells[cell_idx].model_id << ',' << regime << ',' << filter_names[f]
              << ",avg_pred_mse," << format_double(sum_mse / reps) << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cebass: robust streaming filter with online anomaly classification"};
  app.require_subcommand(1);

  std::string config_path, input_path, output_path;
  std::uint64_t cli_seed = 0;

  auto* run = app.add_subcommand("run", "filter a CSV stream and classify anomalies");
  run->add_option("--config", config_path, "JSON model/filter config")->required();
  run->add_option("--input", input_path, "input CSV (t,y1..yp)")->required();
  run->add_option("--output", output_path, "output CSV")->required();
  auto* run_seed = run->add_option("--seed", cli_seed, "RNG seed (overrides config and CEBASS_SEED)");

  std::string suite = "paper", out_dir;
  int reps = 50, threads = 1;
  double clip = 2.0;
  auto* bench = app.add_subcommand("bench", "run the simulation study over all 16 cells");
  bench->add_option("--suite", suite, "benchmark suite (paper)");
  bench->add_option("--reps", reps, "replications per cell");
  bench->add_option("--out", out_dir, "output directory")->required();
  auto* bench_seed = bench->add_option("--seed", cli_seed, "RNG seed");
  bench->add_option("--threads", threads, "worker threads (results are thread-count invariant)");
  bench->add_option("--clip", clip, "Huber clip constant for the robust baselines");

  auto* calibrate = app.add_subcommand("calibrate", "print steady-state calibration for a config");
  calibrate->add_option("--config", config_path, "JSON model/filter config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  try {
    if (run->parsed()) {
      return cmd_run(config_path, input_path, output_path, run_seed->count() > 0, cli_seed);
    }
    if (bench->parsed()) {
      return cmd_bench(suite, reps, out_dir, bench_seed->count() > 0, cli_seed, threads, clip);
    }
    if (calibrate->parsed()) {
      return cmd_calibrate(config_path);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UnobservableModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const FilterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
