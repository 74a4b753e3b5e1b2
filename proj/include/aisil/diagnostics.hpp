#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "aisil/filter.hpp"
#include "aisil/math_util.hpp"
#include "aisil/parallel.hpp"
#include "aisil/rng.hpp"

namespace aisil::diag {

// One row of the particle-count vs log-likelihood-variance table.
struct VarianceRow {
  std::size_t n_particles = 0;
  double variance = 0.0;
  double mean_seconds = 0.0;
  std::size_t reps = 0;
  std::size_t degenerate = 0;
  std::vector<double> logliks;  // successful replications only
};

struct VarianceReport {
  std::vector<VarianceRow> rows;
  double temperature = 1.0;
};

// Runs the bootstrap filter `reps` times per particle count at temperature a
// and reports the sample variance of the log-likelihood estimate.
// Degenerate runs are counted and excluded.  Replications run in parallel;
// each (N, rep) pair has its own substream so results do not depend on the
// worker count.
template <FilterModel F>
VarianceReport pf_variance_harness(const F& model,
                                   const std::vector<std::size_t>& n_list,
                                   std::size_t reps, double a,
                                   const RngStream& rng, unsigned workers = 0) {
  VarianceReport report;
  report.temperature = a;
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    VarianceRow row;
    row.n_particles = n_list[ni];
    row.reps = reps;
    std::vector<double> ll(reps, kNegInf);
    std::vector<double> secs(reps, 0.0);
    parallel_for(
        reps,
        [&](std::size_t r) {
          RngStream s = rng.substream(r, 0, ni, RngStream::Role::Filter);
          const auto t0 = std::chrono::steady_clock::now();
          try {
            ll[r] = bootstrap_filter(model, row.n_particles, a, s).loglik;
          } catch (const FilterDegenerateError&) {
          }
          secs[r] = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
        },
        workers);
    for (std::size_t r = 0; r < reps; ++r) {
      if (std::isfinite(ll[r]))
        row.logliks.push_back(ll[r]);
      else
        ++row.degenerate;
    }
    if (row.logliks.size() >= 2) row.variance = sample_variance(row.logliks);
    row.mean_seconds = mean_of(secs);
    report.rows.push_back(std::move(row));
  }
  return report;
}

// Per-run posterior summary.
struct RunSummary {
  std::vector<std::string> param_names;
  std::vector<double> post_mean;
  std::vector<double> post_sd;
  double log_z = 0.0;
  std::size_t ladder_length = 0;  // number of stages P
  double seconds = 0.0;
  std::uint64_t seed = 0;
};

struct AggregateReport {
  std::vector<std::string> param_names;
  std::vector<double> pooled_mean;      // mean over runs of posterior means
  std::vector<double> between_run_sd;   // sd over runs of posterior means
  double mean_log_z = 0.0;
  double log_z_sd = 0.0;                // between-run sd of log Z
  double mean_stages = 0.0;
  std::size_t run_count = 0;
};

AggregateReport aggregate_runs(const std::vector<RunSummary>& runs);

// Upper regularized incomplete gamma Q(a, x); used for chi-square p-values.
double gamma_q(double a, double x);

// P(X > stat) for a chi-square variable with `dof` degrees of freedom.
double chi_square_sf(double stat, std::size_t dof);

struct InvarianceVerdict {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
  std::size_t iterations = 0;
};

// Enumerable toy model for the invariance harness: two-point parameter grid,
// two-point state grid, short horizon.  Small enough that the tempered
// target over (theta, path) enumerates exactly.
struct GridToyModel {
  std::vector<double> theta_values = {0.3, 0.8};   // persistence of each regime
  std::vector<double> theta_log_prior = {std::log(0.7), std::log(0.3)};
  std::vector<double> state_values = {-1.0, 1.0};
  std::vector<double> init_log_prob = {std::log(0.6), std::log(0.4)};
  std::vector<double> obs = {0.4, -0.9, 1.3};      // y_t; T = obs.size()

  std::size_t horizon() const { return obs.size(); }
  // log Pr(state j at t | state i at t-1) under theta: stay with prob theta.
  double trans_log_prob(std::size_t theta_idx, std::size_t from,
                        std::size_t to) const;
  double obs_loglik(std::size_t t, std::size_t state) const;
  // log p(theta) + log p(path | theta) + a log p(y | path)
  double cell_logdensity(std::size_t theta_idx,
                         const std::vector<std::size_t>& path, double a) const;
  std::size_t cell_index(std::size_t theta_idx,
                         const std::vector<std::size_t>& path) const;
  std::size_t cell_count() const;
};

// Exact probabilities of every (theta, path) cell under the tempered target.
std::vector<double> enumerate_grid_target(const GridToyModel& toy, double a);

// One particle-Gibbs sweep on the toy model: exact-conditional flip move on
// theta, then conditional SMC with N particles and backward simulation.
void grid_pg_move(const GridToyModel& toy, std::size_t& theta_idx,
                  std::vector<std::size_t>& path, double a,
                  std::size_t n_particles, RngStream& rng);

// Negative control: proposes the opposite theta and always accepts, which
// breaks detailed balance whenever the conditional is not symmetric.
void grid_broken_move(const GridToyModel& toy, std::size_t& theta_idx,
                      std::vector<std::size_t>& path, double a,
                      std::size_t n_particles, RngStream& rng);

// Draws (theta, path) exactly from the enumerated target, applies `move`
// once, and chi-square-tests the empirical cell frequencies against the
// enumeration.  Move is any callable (toy, theta_idx&, path&, rng&).
template <class Move>
InvarianceVerdict kernel_invariance_harness(const GridToyModel& toy, double a,
                                            std::size_t iterations, Move&& move,
                                            const RngStream& rng) {
  const std::vector<double> target = enumerate_grid_target(toy, a);
  const std::size_t cells = target.size();
  const std::size_t T = toy.horizon();

  std::vector<std::size_t> counts(cells, 0);
  for (std::size_t it = 0; it < iterations; ++it) {
    RngStream s = rng.substream(it, 0, 0, RngStream::Role::Generic);
    // Exact draw from the enumerated target.
    const double u = s.uniform();
    double cum = 0.0;
    std::size_t cell = cells - 1;
    for (std::size_t i = 0; i < cells; ++i) {
      cum += target[i];
      if (u <= cum) {
        cell = i;
        break;
      }
    }
    std::size_t theta_idx = cell / (std::size_t{1} << T);
    std::vector<std::size_t> path(T);
    for (std::size_t t = 0; t < T; ++t)
      path[t] = (cell >> (T - 1 - t)) & 1U;
    move(toy, theta_idx, path, s);
    ++counts[toy.cell_index(theta_idx, path)];
  }

  InvarianceVerdict v;
  v.iterations = iterations;
  v.dof = cells - 1;
  for (std::size_t i = 0; i < cells; ++i) {
    const double expected = target[i] * static_cast<double>(iterations);
    const double d = static_cast<double>(counts[i]) - expected;
    v.statistic += d * d / expected;
  }
  v.p_value = chi_square_sf(v.statistic, v.dof);
  return v;
}

// Two-sample chi-square comparison over pooled-quantile bins; used by the
// Geweke-style check (successive-conditional vs marginal-conditional draws).
InvarianceVerdict two_sample_bin_test(std::vector<double> a,
                                      std::vector<double> b,
                                      std::size_t n_bins = 20);

struct DensityPoint {
  double x = 0.0;
  double density = 0.0;
};

// Gaussian kernel density on an evenly spaced grid, bandwidth by Silverman's
// rule of thumb.
std::vector<DensityPoint> kde_export(const std::vector<double>& draws,
                                     double grid_lo, double grid_hi,
                                     std::size_t grid_points);
std::vector<DensityPoint> kde_export(const std::vector<double>& draws,
                                     std::size_t grid_points = 256);

}  // namespace aisil::diag
