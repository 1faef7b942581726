#include "cebass/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "cebass/errors.hpp"

namespace cebass {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError("config: " + where + ": " + what);
}

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

Eigen::VectorXd as_vector(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = as_number(j[i], where + "[" + std::to_string(i) + "]");
  }
  return v;
}

Eigen::MatrixXd as_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) fail(where, "expected rows to be arrays of numbers");
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      fail(where + "[" + std::to_string(r) + "]", "ragged matrix rows");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          as_number(j[r][c], where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
  }
  return m;
}

void merge_into(json& base, const json& overlay) {
  if (!overlay.is_object() || !base.is_object()) {
    base = overlay;
    return;
  }
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object()) {
      merge_into(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

json preset_json(const std::string& name) {
  if (name == "example1") {
    // random walk, sigma_A = 1, sigma_I = 0.1
    return json::parse(R"({
      "model": {"A": [[1.0]], "C": [[1.0]], "Sigma_A": [1.0], "Sigma_I": [0.01]}
    })");
  }
  if (name == "example2") {
    // position + trend, sigma_A = 1, sigma_I = (0.1, 0.01)
    return json::parse(R"({
      "model": {"A": [[1.0, 1.0], [0.0, 1.0]], "C": [[1.0, 0.0]],
                "Sigma_A": [1.0], "Sigma_I": [0.01, 0.0001]}
    })");
  }
  if (name == "two_measurement") {
    return json::parse(R"({
      "model": {"A": [[1.0]], "C": [[1.0], [1.0]], "Sigma_A": [1.0, 1.0], "Sigma_I": [0.01]}
    })");
  }
  if (name == "observed_trend") {
    return json::parse(R"({
      "model": {"A": [[1.0, 1.0], [0.0, 1.0]], "C": [[1.0, 0.0], [0.0, 1.0]],
                "Sigma_A": [1.0, 1.0], "Sigma_I": [0.01, 0.0001]}
    })");
  }
  if (name == "machine_temperature") {
    // changepoint-style random walk: sigma_I pinned to sigma_A / 10000, long
    // back-sampling horizons, strong autocorrelation adjustment. Override
    // Sigma_A (and mu0) with values estimated from a training prefix.
    return json::parse(R"({
      "model": {"A": [[1.0]], "C": [[1.0]], "Sigma_A": [1.0], "Sigma_I": [1e-8]},
      "filter": {"horizons": [[1, 5, 10, 20, 40, 80, 150, 250]], "rho": 0.99}
    })");
  }
  if (name == "router") {
    // level + AR(1) deviation; estimates sigma_A = 0.0516,
    // sigma_I = (0.0157, 0.516), rho = 0.815
    return json::parse(R"({
      "model": {"A": [[1.0, 0.0], [0.0, 0.815]], "C": [[1.0, 1.0]],
                "Sigma_A": [0.00266256], "Sigma_I": [0.00024649, 0.266256]},
      "filter": {"rho": 0.815}
    })");
  }
  fail("preset", "unknown preset '" + name + "'");
}

RunConfig config_from_json(json j) {
  if (j.contains("preset")) {
    if (!j["preset"].is_string()) fail("preset", "expected a string");
    json base = preset_json(j["preset"].get<std::string>());
    j.erase("preset");
    merge_into(base, j);
    j = std::move(base);
  }

  RunConfig cfg;
  if (!j.contains("model")) fail("model", "missing");
  const json& jm = j["model"];
  if (!jm.contains("A")) fail("model.A", "missing");
  if (!jm.contains("C")) fail("model.C", "missing");
  if (!jm.contains("Sigma_A")) fail("model.Sigma_A", "missing");
  if (!jm.contains("Sigma_I")) fail("model.Sigma_I", "missing");
  cfg.model.A = as_matrix(jm["A"], "model.A");
  cfg.model.C = as_matrix(jm["C"], "model.C");
  cfg.model.obs_var = as_vector(jm["Sigma_A"], "model.Sigma_A");
  cfg.model.inn_var = as_vector(jm["Sigma_I"], "model.Sigma_I");
  try {
    cfg.model.validate();
  } catch (const ConfigError& e) {
    fail("model", e.what());
  }

  if (j.contains("filter")) {
    const json& jf = j["filter"];
    if (!jf.is_object()) fail("filter", "expected an object");
    for (auto it = jf.begin(); it != jf.end(); ++it) {
      const std::string key = it.key();
      const json& v = it.value();
      const std::string where = "filter." + key;
      if (key == "N") {
        cfg.options.n_particles = static_cast<int>(as_number(v, where));
      } else if (key == "M") {
        cfg.options.m_descendants = static_cast<int>(as_number(v, where));
      } else if (key == "seed") {
        cfg.options.seed = static_cast<std::uint64_t>(as_number(v, where));
      } else if (key == "anomaly_threshold") {
        cfg.options.anomaly_threshold = as_number(v, where);
      } else if (key == "shape") {
        cfg.options.shape = as_number(v, where);
      } else if (key == "r") {
        cfg.options.r = v.is_array() ? as_vector(v, where)
                                     : Eigen::VectorXd::Constant(cfg.model.p(), as_number(v, where));
      } else if (key == "s") {
        cfg.options.s = v.is_array() ? as_vector(v, where)
                                     : Eigen::VectorXd::Constant(cfg.model.q(), as_number(v, where));
      } else if (key == "rho") {
        cfg.options.rho = as_number(v, where);
      } else if (key == "max_horizon") {
        cfg.options.max_horizon = static_cast<int>(as_number(v, where));
      } else if (key == "horizons") {
        if (!v.is_array() || v.size() != static_cast<std::size_t>(cfg.model.q())) {
          fail(where, "expected one horizon array per state component");
        }
        std::vector<std::vector<int>> horizons(v.size());
        for (std::size_t jj = 0; jj < v.size(); ++jj) {
          if (!v[jj].is_array()) fail(where + "[" + std::to_string(jj) + "]", "expected an array");
          for (const auto& h : v[jj]) {
            horizons[jj].push_back(static_cast<int>(as_number(h, where + "[" + std::to_string(jj) + "]")));
          }
        }
        cfg.options.horizons = std::move(horizons);
      } else {
        fail(where, "unknown key");
      }
    }
  }

  if (j.contains("init")) {
    const json& ji = j["init"];
    if (!ji.contains("mu") || !ji.contains("Sigma")) fail("init", "needs both mu and Sigma");
    GaussianState init;
    init.mean = as_vector(ji["mu"], "init.mu");
    init.cov = as_matrix(ji["Sigma"], "init.Sigma");
    if (init.mean.size() != cfg.model.q() || init.cov.rows() != cfg.model.q() ||
        init.cov.cols() != cfg.model.q()) {
      fail("init", "dimensions do not match the model state");
    }
    cfg.init = std::move(init);
  }

  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key != "model" && key != "filter" && key != "init") fail(key, "unknown key");
  }
  return cfg;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    arr.push_back(row);
  }
  return arr;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  return config_from_json(std::move(j));
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
  json j;
  j["model"]["A"] = matrix_to_json(cfg.model.A);
  j["model"]["C"] = matrix_to_json(cfg.model.C);
  j["model"]["Sigma_A"] = vector_to_json(cfg.model.obs_var);
  j["model"]["Sigma_I"] = vector_to_json(cfg.model.inn_var);

  json jf;
  jf["N"] = cfg.options.n_particles;
  jf["M"] = cfg.options.m_descendants;
  jf["seed"] = cfg.options.seed;
  jf["anomaly_threshold"] = cfg.options.anomaly_threshold;
  jf["shape"] = cfg.options.shape;
  if (cfg.options.r) jf["r"] = vector_to_json(*cfg.options.r);
  if (cfg.options.s) jf["s"] = vector_to_json(*cfg.options.s);
  if (cfg.options.rho) jf["rho"] = *cfg.options.rho;
  if (cfg.options.max_horizon) jf["max_horizon"] = *cfg.options.max_horizon;
  if (cfg.options.horizons) {
    json arr = json::array();
    for (const auto& bj : *cfg.options.horizons) arr.push_back(bj);
    jf["horizons"] = arr;
  }
  j["filter"] = std::move(jf);

  if (cfg.init) {
    j["init"]["mu"] = vector_to_json(cfg.init->mean);
    j["init"]["Sigma"] = matrix_to_json(cfg.init->cov);
  }
  return j.dump(2);
}

CsvStreamReader::CsvStreamReader(std::istream& in, Eigen::Index expected_p)
    : in_(in), p_(expected_p) {
  std::string header;
  if (!std::getline(in_, header)) throw DataError("input: empty file (expected a header row)");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  std::string expected = "t";
  for (Eigen::Index i = 1; i <= p_; ++i) expected += ",y" + std::to_string(i);
  // count the columns first so mismatches name the count
  const std::size_t cols = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
  if (cols != static_cast<std::size_t>(p_) + 1) {
    throw DataError("input: header has " + std::to_string(cols) + " columns, expected " +
                    std::to_string(p_ + 1) + " (t,y1..y" + std::to_string(p_) + ")");
  }
  if (header != expected) {
    throw DataError("input: header must be '" + expected + "', got '" + header + "'");
  }
}

std::optional<std::pair<long, Eigen::VectorXd>> CsvStreamReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (cells.size() != static_cast<std::size_t>(p_) + 1) {
      throw DataError("input line " + std::to_string(line_) + ": " + std::to_string(cells.size()) +
                      " columns, expected " + std::to_string(p_ + 1));
    }

    auto parse_cell = [&](const std::string& cell, bool integral) -> double {
      if (cell.empty()) {
        throw DataError("input line " + std::to_string(line_) + ": missing value");
      }
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        if (integral && v != static_cast<double>(static_cast<long>(v))) {
          throw std::invalid_argument(cell);
        }
        return v;
      } catch (const std::exception&) {
        throw DataError("input line " + std::to_string(line_) + ": cannot parse '" + cell + "'");
      }
    };

    const long t = static_cast<long>(parse_cell(cells[0], true));
    if (have_last_t_ && t <= last_t_) {
      throw DataError("input line " + std::to_string(line_) + ": t must be strictly increasing");
    }
    last_t_ = t;
    have_last_t_ = true;

    Eigen::VectorXd y(p_);
    for (Eigen::Index i = 0; i < p_; ++i) {
      y(i) = parse_cell(cells[static_cast<std::size_t>(i) + 1], false);
    }
    return std::make_pair(t, std::move(y));
  }
  return std::nullopt;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_report_header(std::ostream& out, Eigen::Index p, Eigen::Index q) {
  out << "t";
  for (Eigen::Index i = 1; i <= p; ++i) out << ",pred_mean_" << i;
  out << ",pred_loglik";
  for (Eigen::Index i = 1; i <= p; ++i) out << ",p_add_" << i;
  for (Eigen::Index j = 1; j <= q; ++j) out << ",p_inn_" << j;
  out << ",flag\n";
}

void write_report_row(std::ostream& out, long t, const AnomalyReport& report) {
  out << t;
  for (Eigen::Index i = 0; i < report.predictive_mean.size(); ++i) {
    out << ',' << format_double(report.predictive_mean(i));
  }
  out << ',' << format_double(report.predictive_log_lik);
  for (Eigen::Index i = 0; i < report.p_additive.size(); ++i) {
    out << ',' << format_double(report.p_additive(i));
  }
  for (Eigen::Index j = 0; j < report.p_innovative.size(); ++j) {
    out << ',' << format_double(report.p_innovative(j));
  }
  out << ',';
  if (!report.flag) {
    out << "none";
  } else if (report.flag->kind == NoiseScales::Kind::Additive) {
    out << "add:" << (report.flag->component + 1);
  } else {
    const long lag = report.flag->detect_time + 1 - report.flag->anomaly_time;
    out << "inn:" << (report.flag->component + 1) << '@' << lag;
  }
  out << '\n';
}

}  // namespace cebass
