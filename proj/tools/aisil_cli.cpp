#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aisil/diagnostics.hpp"
#include "aisil/engine.hpp"
#include "aisil/factor_sv.hpp"
#include "aisil/io.hpp"
#include "aisil/sv.hpp"

namespace {

namespace fs = std::filesystem;
using namespace aisil;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitEngine = 4;
constexpr int kExitHarness = 5;

struct CliAbort {
  int code;
};

EngineConfig engine_config(const io::RunConfig& cfg) {
  EngineConfig ec;
  ec.ess_target = cfg.ess_fraction * static_cast<double>(cfg.m_particles);
  ec.move_reps = cfg.move_reps;
  ec.workers = cfg.workers;
  ec.progress = [](const StageInfo& s) {
    std::cerr << "stage " << s.stage << "  a=" << s.temperature
              << "  ess=" << s.ess << "  accept=" << s.accept_rate << '\n';
  };
  return ec;
}

template <class Theta>
diag::RunSummary summarize(const std::vector<Theta>& thetas,
                           const std::vector<std::string>& names,
                           const TemperRecord& record, std::uint64_t seed) {
  diag::RunSummary s;
  s.param_names = names;
  const std::size_t P = names.size();
  std::vector<std::vector<double>> cols(P,
                                        std::vector<double>(thetas.size()));
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    const std::vector<double> flat = io::flatten_theta(thetas[i]);
    for (std::size_t p = 0; p < P; ++p) cols[p][i] = flat[p];
  }
  s.post_mean.resize(P);
  s.post_sd.resize(P);
  for (std::size_t p = 0; p < P; ++p) {
    s.post_mean[p] = mean_of(cols[p]);
    s.post_sd[p] = std::sqrt(sample_variance(cols[p]));
  }
  s.log_z = estimate_log_marginal_likelihood(record);
  s.ladder_length = record.stage_count();
  s.seed = seed;
  return s;
}

template <class Theta>
void write_run_artifacts(const fs::path& dir,
                         const std::vector<Theta>& thetas,
                         const std::vector<std::string>& names,
                         const TemperRecord& record,
                         const diag::RunSummary& summary) {
  fs::create_directories(dir);
  io::Table draws;
  draws.columns = names;
  draws.rows.reserve(thetas.size());
  for (const auto& th : thetas) draws.rows.push_back(io::flatten_theta(th));
  io::write_table_csv((dir / "draws.csv").string(), draws);
  io::write_json((dir / "record.json").string(), io::to_json(record));
  io::write_json((dir / "summary.json").string(), io::to_json(summary, false));
  io::write_json((dir / "timing.json").string(),
                 {{"seconds", summary.seconds}});
  for (std::size_t p = 0; p < names.size(); ++p) {
    std::vector<double> col(thetas.size());
    for (std::size_t i = 0; i < thetas.size(); ++i)
      col[i] = io::flatten_theta(thetas[i])[p];
    io::write_density_csv((dir / ("density_" + names[p] + ".csv")).string(),
                          diag::kde_export(col));
  }
}

template <class Model, class KernelFactory>
diag::RunSummary run_once(const Model& model, KernelFactory make_kernel,
                          const std::vector<std::string>& names,
                          const io::RunConfig& cfg, std::uint64_t seed,
                          const fs::path& dir) {
  auto kernel = make_kernel();
  const RngStream root(seed);
  const auto t0 = std::chrono::steady_clock::now();
  auto [cloud, record] =
      run_aisil(model, kernel, cfg.m_particles, engine_config(cfg), root);
  diag::RunSummary summary = summarize(cloud.thetas, names, record, seed);
  summary.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  write_run_artifacts(dir, cloud.thetas, names, record, summary);
  return summary;
}

template <class Model, class KernelFactory>
int run_experiment(const Model& model, KernelFactory make_kernel,
                   const std::vector<std::string>& names,
                   const io::RunConfig& cfg) {
  std::vector<diag::RunSummary> summaries;
  for (std::size_t r = 0; r < cfg.runs; ++r) {
    const std::uint64_t seed = cfg.seed + r;
    const fs::path dir =
        fs::path(cfg.output_dir) / ("run_" + std::to_string(seed));
    try {
      summaries.push_back(
          run_once(model, make_kernel, names, cfg, seed, dir));
    } catch (const EngineAbortError& e) {
      fs::create_directories(dir);
      io::write_json((dir / "partial_record.json").string(),
                     io::to_json(e.partial));
      std::cerr << "engine abort (seed " << seed << "): " << e.what()
                << "; partial ladder written\n";
      return kExitEngine;
    }
    std::cerr << "run seed " << seed << ": log Z = " << summaries.back().log_z
              << ", stages = " << summaries.back().ladder_length << '\n';
  }
  io::write_json((fs::path(cfg.output_dir) / "aggregate.json").string(),
                 io::to_json(diag::aggregate_runs(summaries)));
  return kExitOk;
}

io::RunConfig load_config(const std::string& config_path,
                          const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> kv;
  if (!config_path.empty()) kv = io::parse_config_file(config_path);
  for (const auto& [k, v] : overrides)
    if (!v.empty()) kv[k] = v;
  return io::make_run_config(kv);
}

int cmd_fit(const io::RunConfig& cfg) {
  if (cfg.data_path.empty()) {
    std::cerr << "error: no data file given (set 'data' in the config or "
                 "--data)\n";
    return kExitConfig;
  }
  const io::Table table = io::load_returns(cfg.data_path, cfg.data_mode);
  fs::create_directories(cfg.output_dir);

  if (cfg.model == "sv") {
    if (table.col_count() != 1) {
      std::cerr << "error: sv model expects a single-series file, found "
                << table.col_count() << " columns\n";
      return kExitData;
    }
    std::vector<double> y(table.row_count());
    for (std::size_t t = 0; t < y.size(); ++t) y[t] = table.rows[t][0];
    const sv::Model model(y);
    const std::vector<std::string> names = io::sv_param_names();
    if (cfg.kernel == "pg")
      return run_experiment(
          model, [&] { return sv::PgKernel(model, cfg.n_particles); }, names,
          cfg);
    HmcConfig hc;
    hc.leapfrog_steps = cfg.leapfrog_steps;
    hc.step_size = cfg.step_size;
    return run_experiment(
        model, [&] { return sv::HmcKernel(model, hc); }, names, cfg);
  }

  if (cfg.n_factors > table.col_count()) {
    std::cerr << "error: more factors than series\n";
    return kExitConfig;
  }
  const factor::Model model(table.rows, cfg.n_factors);
  const std::vector<std::string> names =
      io::factor_param_names(model.series_count(), model.factor_count());
  if (cfg.kernel == "pg")
    return run_experiment(
        model, [&] { return factor::PgKernel(model, cfg.n_particles); }, names,
        cfg);
  HmcConfig hc;
  hc.leapfrog_steps = cfg.leapfrog_steps;
  hc.step_size = cfg.step_size;
  return run_experiment(
      model, [&] { return factor::HmcKernel(model, hc); }, names, cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Density-tempered SMC for stochastic volatility models"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Forward-simulate a model");
  std::string sim_model = "sv";
  std::size_t sim_T = 1000, sim_S = 5, sim_K = 1;
  double sim_mu = -0.5, sim_phi = 0.98, sim_tau2 = 0.025;
  double sim_fphi = 0.98, sim_ftau2 = 0.05, sim_loading = 0.6;
  std::uint64_t sim_seed = 1;
  std::string sim_out = ".";
  sim->add_option("--model", sim_model)->check(CLI::IsMember({"sv", "factor-sv"}));
  sim->add_option("--length", sim_T);
  sim->add_option("--series", sim_S);
  sim->add_option("--factors", sim_K);
  sim->add_option("--mu", sim_mu);
  sim->add_option("--phi", sim_phi);
  sim->add_option("--tau2", sim_tau2);
  sim->add_option("--factor-phi", sim_fphi);
  sim->add_option("--factor-tau2", sim_ftau2);
  sim->add_option("--loading", sim_loading);
  sim->add_option("--seed", sim_seed);
  sim->add_option("--output", sim_out);

  // fit
  auto* fit = app.add_subcommand("fit", "Run the tempered sampler");
  std::string fit_config;
  std::map<std::string, std::string> ov;
  fit->add_option("--config", fit_config);
  fit->add_option("--model", ov["model"]);
  fit->add_option("--kernel", ov["kernel"]);
  fit->add_option("--factors", ov["factors"]);
  fit->add_option("--particles", ov["particles"]);
  fit->add_option("--filter-particles", ov["filter_particles"]);
  fit->add_option("--move-reps", ov["move_reps"]);
  fit->add_option("--leapfrog-steps", ov["leapfrog_steps"]);
  fit->add_option("--ess-fraction", ov["ess_fraction"]);
  fit->add_option("--step-size", ov["step_size"]);
  fit->add_option("--runs", ov["runs"]);
  fit->add_option("--seed", ov["seed"]);
  fit->add_option("--data", ov["data"]);
  fit->add_option("--mode", ov["mode"]);
  fit->add_option("--output", ov["output"]);
  fit->add_option("--workers", ov["workers"]);

  // pf-variance
  auto* pfv = app.add_subcommand(
      "pf-variance", "Log-likelihood variance of the bootstrap filter");
  std::string pfv_data, pfv_out = "variance.json";
  std::size_t pfv_column = 0, pfv_reps = 30;
  double pfv_mu = -0.5, pfv_phi = 0.98, pfv_tau2 = 0.025, pfv_a = 1.0;
  std::vector<std::size_t> pfv_n = {100, 250, 500, 1000};
  std::uint64_t pfv_seed = 1;
  pfv->add_option("--data", pfv_data)->required();
  pfv->add_option("--column", pfv_column);
  pfv->add_option("--mu", pfv_mu);
  pfv->add_option("--phi", pfv_phi);
  pfv->add_option("--tau2", pfv_tau2);
  pfv->add_option("--temperature", pfv_a);
  pfv->add_option("--particles", pfv_n);
  pfv->add_option("--reps", pfv_reps);
  pfv->add_option("--seed", pfv_seed);
  pfv->add_option("--output", pfv_out);

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "Pool run summaries");
  std::vector<std::string> agg_inputs;
  std::string agg_out = "aggregate.json";
  agg->add_option("summaries", agg_inputs)->required();
  agg->add_option("--output", agg_out);

  // check
  auto* chk = app.add_subcommand("check", "Kernel invariance harness");
  std::size_t chk_iters = 100000;
  double chk_a = 0.7;
  std::uint64_t chk_seed = 1;
  chk->add_option("--iterations", chk_iters);
  chk->add_option("--temperature", chk_a);
  chk->add_option("--seed", chk_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      fs::create_directories(sim_out);
      if (sim_model == "sv") {
        const io::SvSimulation s =
            io::simulate_sv({sim_mu, sim_phi, sim_tau2}, sim_T, sim_seed);
        io::Table y{{"y"}, {}};
        io::Table x{{"x"}, {}};
        for (std::size_t t = 0; t < sim_T; ++t) {
          y.rows.push_back({s.y[t]});
          x.rows.push_back({s.x[t]});
        }
        io::write_table_csv((fs::path(sim_out) / "returns.csv").string(), y);
        io::write_table_csv((fs::path(sim_out) / "states.csv").string(), x);
      } else {
        factor::Theta th;
        th.idio.assign(sim_S, {sim_mu, sim_phi, sim_tau2});
        th.fac.assign(sim_K, {0.0, sim_fphi, sim_ftau2});
        th.beta.assign(sim_S, std::vector<double>(sim_K, 0.0));
        for (std::size_t s = 0; s < sim_S; ++s)
          for (std::size_t k = 0; k < factor::free_loadings(s, sim_K); ++k)
            th.beta[s][k] = sim_loading;
        const io::FactorSimulation s = io::simulate_factor(th, sim_T, sim_seed);
        io::Table y;
        for (std::size_t c = 0; c < sim_S; ++c)
          y.columns.push_back("y" + std::to_string(c + 1));
        y.rows = s.y;
        io::write_table_csv((fs::path(sim_out) / "returns.csv").string(), y);
        io::Table f;
        for (std::size_t k = 0; k < sim_K; ++k)
          f.columns.push_back("f" + std::to_string(k + 1));
        f.rows.assign(sim_T, std::vector<double>(sim_K));
        for (std::size_t t = 0; t < sim_T; ++t)
          for (std::size_t k = 0; k < sim_K; ++k)
            f.rows[t][k] = s.state.f[k][t];
        io::write_table_csv((fs::path(sim_out) / "factors.csv").string(), f);
      }
      return kExitOk;
    }

    if (fit->parsed()) return cmd_fit(load_config(fit_config, ov));

    if (pfv->parsed()) {
      const io::Table table = io::load_returns(pfv_data, io::DataMode::Returns);
      if (pfv_column >= table.col_count()) {
        std::cerr << "error: column index out of range\n";
        return kExitData;
      }
      std::vector<double> y(table.row_count());
      for (std::size_t t = 0; t < y.size(); ++t)
        y[t] = table.rows[t][pfv_column];
      const sv::FilterAdapter filter(y, {pfv_mu, pfv_phi, pfv_tau2});
      const diag::VarianceReport report = diag::pf_variance_harness(
          filter, pfv_n, pfv_reps, pfv_a, RngStream(pfv_seed));
      for (const auto& row : report.rows)
        std::cout << "N=" << row.n_particles << "  variance=" << row.variance
                  << "  mean_seconds=" << row.mean_seconds
                  << "  degenerate=" << row.degenerate << '\n';
      io::write_json(pfv_out, io::to_json(report));
      return kExitOk;
    }

    if (agg->parsed()) {
      std::vector<diag::RunSummary> summaries;
      for (const auto& path : agg_inputs)
        summaries.push_back(io::run_summary_from_json(io::read_json(path)));
      const diag::AggregateReport report = diag::aggregate_runs(summaries);
      io::write_json(agg_out, io::to_json(report));
      for (std::size_t p = 0; p < report.param_names.size(); ++p)
        std::cout << report.param_names[p] << "  " << report.pooled_mean[p]
                  << " (" << report.between_run_sd[p] << ")\n";
      std::cout << "log Z  " << report.mean_log_z << " (" << report.log_z_sd
                << ")\n";
      return kExitOk;
    }

    if (chk->parsed()) {
      const diag::GridToyModel toy;
      const RngStream rng(chk_seed);
      const auto pg = diag::kernel_invariance_harness(
          toy, chk_a, chk_iters,
          [chk_a](const diag::GridToyModel& t, std::size_t& th,
                  std::vector<std::size_t>& path, RngStream& r) {
            diag::grid_pg_move(t, th, path, chk_a, 2, r);
          },
          rng);
      const auto broken = diag::kernel_invariance_harness(
          toy, chk_a, chk_iters,
          [chk_a](const diag::GridToyModel& t, std::size_t& th,
                  std::vector<std::size_t>& path, RngStream& r) {
            diag::grid_broken_move(t, th, path, chk_a, 2, r);
          },
          rng.substream(1, 0, 0, RngStream::Role::Generic));
      std::cout << "pg move:        p = " << pg.p_value << '\n';
      std::cout << "broken control: p = " << broken.p_value << '\n';
      const bool ok = pg.p_value > 0.01 && broken.p_value < 0.001;
      std::cout << (ok ? "PASS" : "FAIL") << '\n';
      return ok ? kExitOk : kExitHarness;
    }
  } catch (const io::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const io::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const EngineAbortError& e) {
    std::cerr << "engine abort: " << e.what() << '\n';
    return kExitEngine;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
