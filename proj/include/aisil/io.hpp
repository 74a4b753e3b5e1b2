#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aisil/diagnostics.hpp"
#include "aisil/engine.hpp"
#include "aisil/factor_sv.hpp"
#include "aisil/sv.hpp"

namespace aisil::io {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class DataMode { Prices, Returns };

// T x S numeric table with named columns.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t row_count() const { return rows.size(); }
  std::size_t col_count() const { return columns.size(); }
};

// Reads a CSV with a header row; prices mode converts each series to
// log-differences (one fewer row).  Throws DataError with the offending line
// number for ragged rows, non-numeric cells, or too-short series.
Table load_returns(const std::string& path, DataMode mode);

void write_table_csv(const std::string& path, const Table& table);

// Forward simulation of the univariate model.
struct SvSimulation {
  std::vector<double> y;
  std::vector<double> x;
};
SvSimulation simulate_sv(const sv::Theta& theta, std::size_t T,
                         std::uint64_t seed);

// Forward simulation of the factor model.
struct FactorSimulation {
  std::vector<std::vector<double>> y;  // T x S
  factor::State state;
};
FactorSimulation simulate_factor(const factor::Theta& theta, std::size_t T,
                                 std::uint64_t seed);

// Flat key = value config file: one pair per line, '#' comments, quoted or
// bare values.  Throws ConfigError with line numbers.
std::map<std::string, std::string> parse_config_file(const std::string& path);

struct RunConfig {
  std::string model = "sv";    // sv | factor-sv
  std::string kernel = "pg";   // pg | hmc
  std::size_t n_factors = 1;   // K, factor model only
  std::size_t m_particles = 560;
  std::size_t n_particles = 250;   // N, PG filters
  std::size_t move_reps = 10;      // R
  std::size_t leapfrog_steps = 100;
  double ess_fraction = 0.8;
  double step_size = 0.01;
  std::size_t runs = 1;
  std::uint64_t seed = 1;
  std::string data_path;
  DataMode data_mode = DataMode::Returns;
  std::string output_dir = ".";
  unsigned workers = 0;
};

// Builds a RunConfig from parsed key/value pairs, validating ranges.
// Unknown keys are rejected.
RunConfig make_run_config(const std::map<std::string, std::string>& kv);

// Flat parameter views of the model parameters, used for draw archives and
// posterior summaries.
std::vector<std::string> sv_param_names();
std::vector<double> flatten_theta(const sv::Theta& theta);
std::vector<std::string> factor_param_names(std::size_t S, std::size_t K);
std::vector<double> flatten_theta(const factor::Theta& theta);

nlohmann::json to_json(const TemperRecord& record);
nlohmann::json to_json(const diag::RunSummary& summary, bool with_timing);
nlohmann::json to_json(const diag::AggregateReport& report);
nlohmann::json to_json(const diag::VarianceReport& report);
diag::RunSummary run_summary_from_json(const nlohmann::json& j);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

void write_density_csv(const std::string& path,
                       const std::vector<diag::DensityPoint>& density);

}  // namespace aisil::io
