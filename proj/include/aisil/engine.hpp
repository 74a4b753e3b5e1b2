#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aisil/cloud.hpp"
#include "aisil/filter.hpp"
#include "aisil/math_util.hpp"
#include "aisil/parallel.hpp"
#include "aisil/rng.hpp"

namespace aisil {

// Realized annealing schedule and per-stage telemetry.
struct TemperRecord {
  std::vector<double> ladder = {0.0};      // a_0 .. a_P
  std::vector<double> ess_after_reweight;  // per stage 1..P
  std::vector<double> log_z_increments;    // log(Z_{a_p} / Z_{a_p-1})
  std::vector<double> accept_rates;        // mean Markov-move acceptance
  // ESS one temperature grid step below/above the chosen a (reweighted from
  // the same pre-reweight cloud); lets callers audit how tightly the
  // adaptive search bracketed the ESS target.
  std::vector<double> ess_grid_below;
  std::vector<double> ess_grid_above;
  bool complete = false;

  std::size_t stage_count() const { return ladder.size() - 1; }
};

struct StageInfo {
  std::size_t stage;
  double temperature;
  double ess;
  double log_z_increment;
  double accept_rate;
};

struct EngineConfig {
  double ess_target;                 // absolute, in (1, M]
  std::size_t grid_size = 1000;      // candidates for the temperature search
  std::size_t move_reps = 10;        // R
  std::size_t max_stages = 10000;
  double delta_floor = 1e-8;         // abort after repeated tiny increments
  std::size_t floor_patience = 5;
  unsigned workers = 0;              // 0 = hardware concurrency
  std::function<void(const StageInfo&)> progress;
};

struct EngineAbortError : std::runtime_error {
  EngineAbortError(std::string msg, TemperRecord rec)
      : std::runtime_error(std::move(msg)), partial(std::move(rec)) {}
  TemperRecord partial;
};

// ESS = 1 / sum W_i^2 for normalized weights; ranges over [1, M].
inline double ess(std::span<const double> normalized_weights) {
  double s = 0.0;
  for (double w : normalized_weights) s += w * w;
  return 1.0 / s;
}

namespace detail {

// ESS of the cloud reweighted by exp(delta_a * loglik), in log space.
inline double reweighted_ess(std::span<const double> log_weights,
                             std::span<const double> loglik, double delta_a) {
  const std::size_t m = log_weights.size();
  std::vector<double> lw(m), lw2(m);
  for (std::size_t i = 0; i < m; ++i) {
    lw[i] = log_weights[i] + delta_a * loglik[i];
    lw2[i] = 2.0 * lw[i];
  }
  const double l1 = log_sum_exp(lw);
  const double l2 = log_sum_exp(lw2);
  if (!std::isfinite(l1) || !std::isfinite(l2)) return 1.0;
  return std::exp(2.0 * l1 - l2);
}

}  // namespace detail

// Grid search for the next temperature: G equally spaced candidates in
// (a_prev, 1].  Returns exactly 1 when the terminal ESS already meets the
// target, otherwise the candidate whose ESS is closest to the target (ties
// toward the larger a).
template <class Theta, class State>
double find_next_temperature(const ParticleCloud<Theta, State>& cloud,
                             double a_prev, double ess_target,
                             std::size_t grid_size) {
  if (!(a_prev >= 0.0 && a_prev < 1.0))
    throw std::invalid_argument("find_next_temperature: a_prev outside [0,1)");
  const double ess_at_one = detail::reweighted_ess(
      cloud.log_weights, cloud.cached_loglik, 1.0 - a_prev);
  if (ess_at_one >= ess_target) return 1.0;

  double best_a = 1.0;
  double best_gap = std::fabs(ess_at_one - ess_target);
  for (std::size_t g = 1; g <= grid_size; ++g) {
    // Last grid point is pinned to exactly 1 so terminal ladders end at 1.
    const double a = g == grid_size
                         ? 1.0
                         : a_prev + (1.0 - a_prev) * static_cast<double>(g) /
                               static_cast<double>(grid_size);
    const double e = detail::reweighted_ess(cloud.log_weights,
                                            cloud.cached_loglik, a - a_prev);
    const double gap = std::fabs(e - ess_target);
    if (gap < best_gap || (gap == best_gap && a > best_a)) {
      best_gap = gap;
      best_a = a;
    }
  }
  return best_a;
}

// Eq.-1 reweighting: log w_i += (a_new - a_prev) loglik_i, then normalize.
template <class Theta, class State>
void reweight(ParticleCloud<Theta, State>& cloud, double a_new, double a_prev) {
  if (!(a_prev < a_new && a_new <= 1.0))
    throw std::invalid_argument("reweight: need a_prev < a_new <= 1");
  const double delta = a_new - a_prev;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    cloud.log_weights[i] += delta * cloud.cached_loglik[i];
  const double lse = log_sum_exp(cloud.log_weights);
  if (!std::isfinite(lse))
    throw std::runtime_error("reweight: degenerate cloud (all weights zero)");
  for (double& lw : cloud.log_weights) lw -= lse;
  cloud.normalized = true;
}

// Systematic resampling of (theta, state) pairs; weights reset to 1/M.
template <class Theta, class State>
void resample_cloud(ParticleCloud<Theta, State>& cloud, RngStream& rng) {
  const std::vector<double> w = cloud.weights();
  const std::vector<int> idx = systematic_indices(w, rng.uniform());
  std::vector<Theta> thetas(cloud.size());
  std::vector<State> states(cloud.size());
  std::vector<double> loglik(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    thetas[i] = cloud.thetas[idx[i]];
    states[i] = cloud.states[idx[i]];
    loglik[i] = cloud.cached_loglik[idx[i]];
  }
  cloud.thetas = std::move(thetas);
  cloud.states = std::move(states);
  cloud.cached_loglik = std::move(loglik);
  cloud.set_uniform_weights();
}

// Sum of the per-stage incremental log Z ratios (Z_{a_0} = 1).
inline double estimate_log_marginal_likelihood(const TemperRecord& record) {
  if (!record.complete)
    throw std::logic_error("estimate_log_marginal_likelihood: a_P != 1");
  double s = 0.0;
  for (double lz : record.log_z_increments) s += lz;
  return s;
}

// Markov-move kernel contract: move() applies one full sweep to a particle
// and returns its acceptance fraction in [0,1]; end_stage() sees the
// cloud-averaged acceptance at the stage barrier (step-size adaptation).
template <class K, class M>
concept MoveKernel = requires(K k, typename M::Theta& th, typename M::State& st,
                              double a, RngStream& rng, std::size_t stage,
                              double rate) {
  { k.move(th, st, a, rng) } -> std::convertible_to<double>;
  { k.end_stage(stage, rate) };
};

// Generic AISIL loop: adaptive temperature search, reweight, resample,
// R Markov-move sweeps per particle per stage.  The incremental Z ratio is
// taken from the pre-reweight weighted cloud.
template <StateSpaceModel M, class Kernel>
  requires MoveKernel<Kernel, M>
std::pair<ParticleCloud<typename M::Theta, typename M::State>, TemperRecord>
run_aisil(const M& model, Kernel& kernel, std::size_t m_particles,
          const EngineConfig& cfg, const RngStream& rng) {
  if (!(cfg.ess_target > 1.0 &&
        cfg.ess_target <= static_cast<double>(m_particles)))
    throw std::invalid_argument("run_aisil: ESS target outside (1, M]");
  if (cfg.grid_size < 2 || cfg.move_reps < 1)
    throw std::invalid_argument("run_aisil: bad grid size or move count");

  auto cloud = init_cloud(model, m_particles, rng);
  TemperRecord record;
  double a_prev = 0.0;
  std::size_t tiny_steps = 0;

  for (std::size_t p = 1; a_prev < 1.0; ++p) {
    if (p > cfg.max_stages)
      throw EngineAbortError("run_aisil: max stage count exceeded", record);

    const double a_new =
        find_next_temperature(cloud, a_prev, cfg.ess_target, cfg.grid_size);
    if (a_new - a_prev < cfg.delta_floor) {
      if (++tiny_steps >= cfg.floor_patience)
        throw EngineAbortError("run_aisil: temperature increments collapsed",
                               record);
    } else {
      tiny_steps = 0;
    }

    // Z_{a_p}/Z_{a_p-1} estimated from the stage p-1 weighted cloud.
    {
      std::vector<double> lw(cloud.size());
      for (std::size_t i = 0; i < cloud.size(); ++i)
        lw[i] = cloud.log_weights[i] +
                (a_new - a_prev) * cloud.cached_loglik[i];
      record.log_z_increments.push_back(log_sum_exp(lw));
    }

    {
      const double grid_step =
          (1.0 - a_prev) / static_cast<double>(cfg.grid_size);
      const double lo = std::max(a_new - grid_step, a_prev + grid_step);
      const double hi = std::min(a_new + grid_step, 1.0);
      record.ess_grid_below.push_back(detail::reweighted_ess(
          cloud.log_weights, cloud.cached_loglik, lo - a_prev));
      record.ess_grid_above.push_back(detail::reweighted_ess(
          cloud.log_weights, cloud.cached_loglik, hi - a_prev));
    }

    reweight(cloud, a_new, a_prev);
    record.ladder.push_back(a_new);
    record.ess_after_reweight.push_back(ess(cloud.weights()));

    RngStream resample_rng =
        rng.substream(0, 0, p, RngStream::Role::Resample);
    resample_cloud(cloud, resample_rng);

    std::vector<double> accept(cloud.size(), 0.0);
    parallel_for(
        cloud.size(),
        [&](std::size_t i) {
          RngStream move_rng = rng.substream(0, i, p, RngStream::Role::Move);
          double acc = 0.0;
          for (std::size_t r = 0; r < cfg.move_reps; ++r)
            acc += kernel.move(cloud.thetas[i], cloud.states[i], a_new,
                               move_rng);
          accept[i] = acc / static_cast<double>(cfg.move_reps);
          cloud.cached_loglik[i] =
              model.loglik(cloud.thetas[i], cloud.states[i]);
        },
        cfg.workers);

    const double mean_accept = mean_of(accept);
    record.accept_rates.push_back(mean_accept);
    kernel.end_stage(p, mean_accept);

    if (cfg.progress)
      cfg.progress({p, a_new, record.ess_after_reweight.back(),
                    record.log_z_increments.back(), mean_accept});
    a_prev = a_new;
  }
  record.complete = true;
  return {std::move(cloud), std::move(record)};
}

}  // namespace aisil
