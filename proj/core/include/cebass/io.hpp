#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>

#include "cebass/filter.hpp"
#include "cebass/model.hpp"

namespace cebass {

/// Parsed run configuration: the model, the filter knobs, and an optional
/// explicit initial state (defaults to the steady-state prior otherwise).
struct RunConfig {
  StateSpaceModel model;
  FilterOptions options;
  std::optional<GaussianState> init;
};

/// Parse a JSON config. A "preset" key, when present, supplies defaults that
/// explicit keys override (deep merge). Errors carry the offending field
/// path. Known presets: example1, example2, two_measurement, observed_trend,
/// machine_temperature, router.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Serialise the resolved config; parse_run_config(serialize_run_config(c))
/// reproduces c exactly.
std::string serialize_run_config(const RunConfig& cfg);

/// Streaming reader for `t,y1,...,yp` CSV input. Enforces the header, the
/// column count, strictly increasing t, and rejects missing or non-numeric
/// cells.
class CsvStreamReader {
 public:
  CsvStreamReader(std::istream& in, Eigen::Index expected_p);

  /// Next row, or nullopt at end of input.
  std::optional<std::pair<long, Eigen::VectorXd>> next();

 private:
  std::istream& in_;
  Eigen::Index p_;
  long line_ = 1;
  bool have_last_t_ = false;
  long last_t_ = 0;
};

/// Output schema: t,pred_mean_1..p,pred_loglik,p_add_1..p,p_inn_1..q,flag
/// with flag in {none, add:i, inn:j@lag}; 1 + p + 1 + p + q + 1 columns.
void write_report_header(std::ostream& out, Eigen::Index p, Eigen::Index q);
void write_report_row(std::ostream& out, long t, const AnomalyReport& report);

/// Fixed-format double used everywhere CSV is written (round-trip exact).
std::string format_double(double v);

}  // namespace cebass
