#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aisil/math_util.hpp"
#include "aisil/rng.hpp"

namespace aisil {

// Univariate state-transition model driven by a bootstrap particle filter.
// Observation tempering is applied by the filter itself, so obs_logdensity
// returns the raw log g_t(y_t | x_t).
template <class F>
concept FilterModel = requires(const F f, double x, double xprev,
                               std::size_t t, RngStream rng) {
  { f.length() } -> std::convertible_to<std::size_t>;
  { f.init_sample(rng) } -> std::convertible_to<double>;
  { f.trans_sample(xprev, rng) } -> std::convertible_to<double>;
  { f.trans_logdensity(x, xprev) } -> std::convertible_to<double>;
  { f.obs_logdensity(t, x) } -> std::convertible_to<double>;
};

struct FilterDegenerateError : std::runtime_error {
  explicit FilterDegenerateError(std::size_t t)
      : std::runtime_error("particle filter degenerate at t=" +
                           std::to_string(t)),
        time_index(t) {}
  std::size_t time_index;
};

struct FilterState {
  std::vector<std::vector<double>> particles;   // [t][j]
  std::vector<std::vector<int>> ancestors;      // [t-1][j], 0-based
  std::vector<std::vector<double>> log_weights; // unnormalized, tempered
  std::vector<std::vector<double>> norm_weights;
  double loglik = 0.0;
  double temperature = 1.0;

  std::size_t length() const { return particles.size(); }
  std::size_t particle_count() const {
    return particles.empty() ? 0 : particles.front().size();
  }
};

struct Trajectory {
  std::vector<int> indices;
  std::vector<double> states;

  std::size_t length() const { return states.size(); }
};

// Systematic resampling: `count` strata points (u+k)/count inverted through
// the cumulative weights.  Marginally Pr(index = j) = W_j.
inline std::vector<int> systematic_indices(std::span<const double> weights,
                                           double u, std::size_t count) {
  const std::size_t n = weights.size();
  std::vector<int> idx(count);
  double cum = weights[0];
  std::size_t j = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double point = (u + static_cast<double>(k)) / static_cast<double>(count);
    while (point > cum && j + 1 < n) {
      ++j;
      cum += weights[j];
    }
    idx[k] = static_cast<int>(j);
  }
  return idx;
}

inline std::vector<int> systematic_indices(std::span<const double> weights,
                                           double u) {
  return systematic_indices(weights, u, weights.size());
}

namespace detail {

// IEEE underflow guard: log-weights more than 700 below the per-step
// maximum are dropped to -inf before normalization.
inline void clip_log_weights(std::vector<double>& logw) {
  const double m = *std::max_element(logw.begin(), logw.end());
  if (!std::isfinite(m)) return;
  for (double& x : logw)
    if (x < m - 700.0) x = kNegInf;
}

// Normalizes the step weights, accumulates log((1/N) sum exp), throws on a
// fully degenerate step.
inline void finish_step(FilterState& fs, std::vector<double> logw,
                        std::size_t t) {
  clip_log_weights(logw);
  const double lse = log_sum_exp(logw);
  if (!std::isfinite(lse)) throw FilterDegenerateError(t);
  fs.loglik += lse - std::log(static_cast<double>(logw.size()));
  std::vector<double> norm(logw.size());
  for (std::size_t j = 0; j < logw.size(); ++j)
    norm[j] = std::exp(logw[j] - lse);
  fs.log_weights.push_back(std::move(logw));
  fs.norm_weights.push_back(std::move(norm));
}

}  // namespace detail

// Bootstrap particle filter with tempered observation weights (proposal =
// state transition, systematic resampling every step).  exp(loglik) is
// unbiased for the tempered likelihood integral.
template <FilterModel F>
FilterState bootstrap_filter(const F& model, std::size_t n_particles, double a,
                             RngStream& rng) {
  if (n_particles < 2) throw std::invalid_argument("bootstrap_filter: N < 2");
  const std::size_t T = model.length();
  FilterState fs;
  fs.temperature = a;
  fs.particles.reserve(T);

  std::vector<double> x(n_particles), logw(n_particles);
  for (std::size_t j = 0; j < n_particles; ++j) x[j] = model.init_sample(rng);
  for (std::size_t j = 0; j < n_particles; ++j)
    logw[j] = a * model.obs_logdensity(0, x[j]);
  fs.particles.push_back(x);
  detail::finish_step(fs, logw, 0);

  for (std::size_t t = 1; t < T; ++t) {
    const double u = rng.uniform();
    std::vector<int> anc =
        systematic_indices(fs.norm_weights.back(), u, n_particles);
    std::vector<double> xnew(n_particles);
    for (std::size_t j = 0; j < n_particles; ++j)
      xnew[j] = model.trans_sample(fs.particles.back()[anc[j]], rng);
    for (std::size_t j = 0; j < n_particles; ++j)
      logw[j] = a * model.obs_logdensity(t, xnew[j]);
    fs.ancestors.push_back(std::move(anc));
    fs.particles.push_back(std::move(xnew));
    detail::finish_step(fs, logw, t);
  }
  return fs;
}

// Conditional SMC: the reference trajectory occupies slot N-1 at every time
// step; the remaining slots and their ancestors are regenerated.  Weights
// are computed for all N slots, reference included.
template <FilterModel F>
FilterState conditional_smc(const F& model, std::size_t n_particles, double a,
                            const Trajectory& reference, RngStream& rng) {
  const std::size_t T = model.length();
  if (reference.length() != T)
    throw std::invalid_argument("conditional_smc: reference length mismatch");
  if (n_particles < 1) throw std::invalid_argument("conditional_smc: N < 1");
  const std::size_t ref = n_particles - 1;

  FilterState fs;
  fs.temperature = a;
  fs.particles.reserve(T);

  std::vector<double> x(n_particles), logw(n_particles);
  for (std::size_t j = 0; j < ref; ++j) x[j] = model.init_sample(rng);
  x[ref] = reference.states[0];
  for (std::size_t j = 0; j < n_particles; ++j)
    logw[j] = a * model.obs_logdensity(0, x[j]);
  fs.particles.push_back(x);
  detail::finish_step(fs, logw, 0);

  for (std::size_t t = 1; t < T; ++t) {
    std::vector<int> anc(n_particles);
    if (ref > 0) {
      const double u = rng.uniform();
      std::vector<int> free = systematic_indices(fs.norm_weights.back(), u, ref);
      std::copy(free.begin(), free.end(), anc.begin());
    }
    anc[ref] = static_cast<int>(ref);
    std::vector<double> xnew(n_particles);
    for (std::size_t j = 0; j < ref; ++j)
      xnew[j] = model.trans_sample(fs.particles.back()[anc[j]], rng);
    xnew[ref] = reference.states[t];
    for (std::size_t j = 0; j < n_particles; ++j)
      logw[j] = a * model.obs_logdensity(t, xnew[j]);
    fs.ancestors.push_back(std::move(anc));
    fs.particles.push_back(std::move(xnew));
    detail::finish_step(fs, logw, t);
  }
  return fs;
}

// Backward simulation: J_T ~ final normalized weights; for t < T,
// J_t proportional to w_t^j f(x_{t+1}^{J_{t+1}} | x_t^j), in log space.
template <FilterModel F>
Trajectory backward_simulate(const FilterState& fs, const F& model,
                             RngStream& rng) {
  const std::size_t T = fs.length();
  const std::size_t N = fs.particle_count();
  Trajectory traj;
  traj.indices.resize(T);
  traj.states.resize(T);

  auto draw_categorical = [&rng](std::span<const double> w) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      cum += w[j];
      if (u <= cum) return static_cast<int>(j);
    }
    return static_cast<int>(w.size() - 1);
  };

  traj.indices[T - 1] = draw_categorical(fs.norm_weights[T - 1]);
  traj.states[T - 1] = fs.particles[T - 1][traj.indices[T - 1]];

  std::vector<double> logb(N);
  for (std::size_t t = T - 1; t-- > 0;) {
    const double xnext = traj.states[t + 1];
    for (std::size_t j = 0; j < N; ++j)
      logb[j] = fs.log_weights[t][j] +
                model.trans_logdensity(xnext, fs.particles[t][j]);
    const double lse = log_sum_exp(logb);
    if (!std::isfinite(lse)) throw FilterDegenerateError(t);
    std::vector<double> b(N);
    for (std::size_t j = 0; j < N; ++j) b[j] = std::exp(logb[j] - lse);
    traj.indices[t] = draw_categorical(b);
    traj.states[t] = fs.particles[t][traj.indices[t]];
  }
  return traj;
}

}  // namespace aisil
