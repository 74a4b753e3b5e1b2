#include "aisil/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace aisil::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_cell(const std::string& cell, std::size_t line_no,
                  std::size_t col) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != cell.size() || cell.empty() || !std::isfinite(v))
    throw DataError("line " + std::to_string(line_no) + ", column " +
                    std::to_string(col + 1) + ": cannot parse '" + cell +
                    "' as a finite number");
  return v;
}

}  // namespace

Table load_returns(const std::string& path, DataMode mode) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (t.columns.empty()) {
      t.columns = cells;
      if (t.columns.empty()) throw DataError("line 1: empty header row");
      continue;
    }
    if (cells.size() != t.columns.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(t.columns.size()) + " cells, found " +
                      std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      row[c] = parse_cell(cells[c], line_no, c);
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw DataError("'" + path + "' has no header row");

  if (mode == DataMode::Prices) {
    if (t.row_count() < 3)
      throw DataError("prices mode needs at least 3 rows, found " +
                      std::to_string(t.row_count()));
    for (std::size_t r = 0; r < t.row_count(); ++r)
      for (std::size_t c = 0; c < t.col_count(); ++c)
        if (!(t.rows[r][c] > 0.0))
          throw DataError("line " + std::to_string(r + 2) + ", column " +
                          std::to_string(c + 1) +
                          ": price must be positive for log-differencing");
    std::vector<std::vector<double>> returns(t.row_count() - 1);
    for (std::size_t r = 1; r < t.row_count(); ++r) {
      returns[r - 1].resize(t.col_count());
      for (std::size_t c = 0; c < t.col_count(); ++c)
        returns[r - 1][c] = std::log(t.rows[r][c]) - std::log(t.rows[r - 1][c]);
    }
    t.rows = std::move(returns);
  } else if (t.row_count() < 2) {
    throw DataError("returns mode needs at least 2 rows, found " +
                    std::to_string(t.row_count()));
  }
  return t;
}

void write_table_csv(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << std::setprecision(17);
  for (std::size_t c = 0; c < table.columns.size(); ++c)
    out << (c ? "," : "") << table.columns[c];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c)
      out << (c ? "," : "") << row[c];
    out << '\n';
  }
  if (!out) throw DataError("write failed on '" + path + "'");
}

SvSimulation simulate_sv(const sv::Theta& theta, std::size_t T,
                         std::uint64_t seed) {
  RngStream rng(seed, 0, 0, 0, RngStream::Role::Data);
  SvSimulation sim;
  sim.x = sv::state_sample(theta, T, rng);
  sim.y.resize(T);
  for (std::size_t t = 0; t < T; ++t)
    sim.y[t] = rng.normal(0.0, std::exp(0.5 * sim.x[t]));
  return sim;
}

FactorSimulation simulate_factor(const factor::Theta& theta, std::size_t T,
                                 std::uint64_t seed) {
  const std::size_t S = theta.series_count();
  const std::size_t K = theta.factor_count();
  RngStream rng(seed, 0, 0, 0, RngStream::Role::Data);
  FactorSimulation sim;
  sim.state.h.resize(S);
  sim.state.lambda.resize(K);
  sim.state.f.assign(K, std::vector<double>(T));
  for (std::size_t s = 0; s < S; ++s)
    sim.state.h[s] = sv::state_sample(theta.idio[s], T, rng);
  for (std::size_t k = 0; k < K; ++k) {
    sv::Theta fk = theta.fac[k];
    fk.mu = 0.0;
    sim.state.lambda[k] = sv::state_sample(fk, T, rng);
    for (std::size_t t = 0; t < T; ++t)
      sim.state.f[k][t] =
          rng.normal(0.0, std::exp(0.5 * sim.state.lambda[k][t]));
  }
  sim.y.assign(T, std::vector<double>(S));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double mean = 0.0;
      for (std::size_t k = 0; k < K; ++k)
        mean += theta.beta[s][k] * sim.state.f[k][t];
      sim.y[t][s] = rng.normal(mean, std::exp(0.5 * sim.state.h[s][t]));
    }
  }
  return sim;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (kv.count(key))
      throw ConfigError("line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

namespace {

std::size_t parse_count(const std::string& key, const std::string& value) {
  try {
    const long long v = std::stoll(value);
    if (v < 1) throw std::out_of_range("count");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' must be a positive integer, got '" +
                      value + "'");
  }
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    return std::stod(value);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' must be numeric, got '" + value + "'");
  }
}

}  // namespace

RunConfig make_run_config(const std::map<std::string, std::string>& kv) {
  RunConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "model") {
      if (value != "sv" && value != "factor-sv")
        throw ConfigError("'model' must be sv or factor-sv");
      cfg.model = value;
    } else if (key == "kernel") {
      if (value != "pg" && value != "hmc")
        throw ConfigError("'kernel' must be pg or hmc");
      cfg.kernel = value;
    } else if (key == "factors") {
      cfg.n_factors = parse_count(key, value);
    } else if (key == "particles") {
      cfg.m_particles = parse_count(key, value);
    } else if (key == "filter_particles") {
      cfg.n_particles = parse_count(key, value);
    } else if (key == "move_reps") {
      cfg.move_reps = parse_count(key, value);
    } else if (key == "leapfrog_steps") {
      cfg.leapfrog_steps = parse_count(key, value);
    } else if (key == "ess_fraction") {
      cfg.ess_fraction = parse_real(key, value);
    } else if (key == "step_size") {
      cfg.step_size = parse_real(key, value);
    } else if (key == "runs") {
      cfg.runs = parse_count(key, value);
    } else if (key == "seed") {
      cfg.seed = parse_count(key, value);
    } else if (key == "data") {
      cfg.data_path = value;
    } else if (key == "mode") {
      if (value == "prices")
        cfg.data_mode = DataMode::Prices;
      else if (value == "returns")
        cfg.data_mode = DataMode::Returns;
      else
        throw ConfigError("'mode' must be prices or returns");
    } else if (key == "output") {
      cfg.output_dir = value;
    } else if (key == "workers") {
      cfg.workers = static_cast<unsigned>(parse_count(key, value));
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  if (!(cfg.ess_fraction > 0.0 && cfg.ess_fraction < 1.0))
    throw ConfigError("'ess_fraction' must lie in (0, 1)");
  if (!(cfg.step_size > 0.0)) throw ConfigError("'step_size' must be positive");
  if (cfg.m_particles < 2) throw ConfigError("'particles' must be at least 2");
  return cfg;
}

std::vector<std::string> sv_param_names() { return {"mu", "phi", "tau2"}; }

std::vector<double> flatten_theta(const sv::Theta& theta) {
  return {theta.mu, theta.phi, theta.tau2};
}

std::vector<std::string> factor_param_names(std::size_t S, std::size_t K) {
  std::vector<std::string> names;
  for (std::size_t s = 0; s < S; ++s) {
    const std::string i = std::to_string(s + 1);
    names.push_back("mu_" + i);
    names.push_back("phi_" + i);
    names.push_back("tau2_" + i);
  }
  for (std::size_t k = 0; k < K; ++k) {
    const std::string i = std::to_string(k + 1);
    names.push_back("phi_f" + i);
    names.push_back("tau2_f" + i);
  }
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t k = 0; k < factor::free_loadings(s, K); ++k)
      names.push_back("beta_" + std::to_string(s + 1) + "_" +
                      std::to_string(k + 1));
  return names;
}

std::vector<double> flatten_theta(const factor::Theta& theta) {
  std::vector<double> v;
  for (const auto& p : theta.idio) {
    v.push_back(p.mu);
    v.push_back(p.phi);
    v.push_back(p.tau2);
  }
  for (const auto& p : theta.fac) {
    v.push_back(p.phi);
    v.push_back(p.tau2);
  }
  const std::size_t K = theta.factor_count();
  for (std::size_t s = 0; s < theta.series_count(); ++s)
    for (std::size_t k = 0; k < factor::free_loadings(s, K); ++k)
      v.push_back(theta.beta[s][k]);
  return v;
}

nlohmann::json to_json(const TemperRecord& record) {
  return {{"ladder", record.ladder},
          {"ess_after_reweight", record.ess_after_reweight},
          {"log_z_increments", record.log_z_increments},
          {"accept_rates", record.accept_rates},
          {"ess_grid_below", record.ess_grid_below},
          {"ess_grid_above", record.ess_grid_above},
          {"complete", record.complete},
          {"stages", record.stage_count()}};
}

nlohmann::json to_json(const diag::RunSummary& summary, bool with_timing) {
  nlohmann::json j = {{"param_names", summary.param_names},
                      {"post_mean", summary.post_mean},
                      {"post_sd", summary.post_sd},
                      {"log_z", summary.log_z},
                      {"stages", summary.ladder_length},
                      {"seed", summary.seed}};
  if (with_timing) j["seconds"] = summary.seconds;
  return j;
}

nlohmann::json to_json(const diag::AggregateReport& report) {
  return {{"param_names", report.param_names},
          {"pooled_mean", report.pooled_mean},
          {"between_run_sd", report.between_run_sd},
          {"mean_log_z", report.mean_log_z},
          {"log_z_sd", report.log_z_sd},
          {"mean_stages", report.mean_stages},
          {"runs", report.run_count}};
}

nlohmann::json to_json(const diag::VarianceReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"particles", r.n_particles},
                    {"variance", r.variance},
                    {"mean_seconds", r.mean_seconds},
                    {"reps", r.reps},
                    {"degenerate", r.degenerate}});
  return {{"temperature", report.temperature}, {"rows", rows}};
}

diag::RunSummary run_summary_from_json(const nlohmann::json& j) {
  diag::RunSummary s;
  j.at("param_names").get_to(s.param_names);
  j.at("post_mean").get_to(s.post_mean);
  j.at("post_sd").get_to(s.post_sd);
  s.log_z = j.at("log_z").get<double>();
  s.ladder_length = j.at("stages").get<std::size_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("seconds")) s.seconds = j["seconds"].get<double>();
  return s;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed on '" + path + "'");
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("'" + path + "': " + e.what());
  }
}

void write_density_csv(const std::string& path,
                       const std::vector<diag::DensityPoint>& density) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << std::setprecision(17) << "x,density\n";
  for (const auto& p : density) out << p.x << ',' << p.density << '\n';
  if (!out) throw DataError("write failed on '" + path + "'");
}

}  // namespace aisil::io
