#include "aisil/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aisil::diag {

AggregateReport aggregate_runs(const std::vector<RunSummary>& runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate_runs: no runs");
  const std::size_t P = runs.front().param_names.size();
  for (const auto& r : runs)
    if (r.post_mean.size() != P || r.param_names != runs.front().param_names)
      throw std::invalid_argument("aggregate_runs: inconsistent runs");

  AggregateReport out;
  out.param_names = runs.front().param_names;
  out.run_count = runs.size();
  out.pooled_mean.resize(P);
  out.between_run_sd.assign(P, 0.0);

  std::vector<double> buf(runs.size());
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t r = 0; r < runs.size(); ++r) buf[r] = runs[r].post_mean[p];
    out.pooled_mean[p] = mean_of(buf);
    if (runs.size() > 1) out.between_run_sd[p] = std::sqrt(sample_variance(buf));
  }
  for (std::size_t r = 0; r < runs.size(); ++r) buf[r] = runs[r].log_z;
  out.mean_log_z = mean_of(buf);
  if (runs.size() > 1) out.log_z_sd = std::sqrt(sample_variance(buf));
  double stages = 0.0;
  for (const auto& r : runs) stages += static_cast<double>(r.ladder_length);
  out.mean_stages = stages / static_cast<double>(runs.size());
  return out;
}

namespace {

// Lower regularized incomplete gamma by series expansion (x < a + 1).
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized incomplete gamma by continued fraction (x >= a + 1).
double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0)
    throw std::invalid_argument("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

double chi_square_sf(double stat, std::size_t dof) {
  if (stat <= 0.0) return 1.0;
  return gamma_q(static_cast<double>(dof) / 2.0, stat / 2.0);
}

double GridToyModel::trans_log_prob(std::size_t theta_idx, std::size_t from,
                                    std::size_t to) const {
  const double stay = theta_values[theta_idx];
  return std::log(from == to ? stay : 1.0 - stay);
}

double GridToyModel::obs_loglik(std::size_t t, std::size_t state) const {
  // y_t observed through N(y; state value, 1).
  const double d = obs[t] - state_values[state];
  return -0.5 * (kLogTwoPi + d * d);
}

double GridToyModel::cell_logdensity(std::size_t theta_idx,
                                     const std::vector<std::size_t>& path,
                                     double a) const {
  double lp = theta_log_prior[theta_idx] + init_log_prob[path[0]] +
              a * obs_loglik(0, path[0]);
  for (std::size_t t = 1; t < path.size(); ++t)
    lp += trans_log_prob(theta_idx, path[t - 1], path[t]) +
          a * obs_loglik(t, path[t]);
  return lp;
}

std::size_t GridToyModel::cell_index(
    std::size_t theta_idx, const std::vector<std::size_t>& path) const {
  std::size_t idx = theta_idx;
  for (std::size_t p : path) idx = idx * 2 + p;
  return idx;
}

std::size_t GridToyModel::cell_count() const {
  return theta_values.size() << horizon();
}

std::vector<double> enumerate_grid_target(const GridToyModel& toy, double a) {
  const std::size_t T = toy.horizon();
  const std::size_t cells = toy.cell_count();
  std::vector<double> logp(cells);
  std::vector<std::size_t> path(T);
  for (std::size_t th = 0; th < toy.theta_values.size(); ++th) {
    for (std::size_t code = 0; code < (std::size_t{1} << T); ++code) {
      for (std::size_t t = 0; t < T; ++t) path[t] = (code >> (T - 1 - t)) & 1U;
      logp[toy.cell_index(th, path)] = toy.cell_logdensity(th, path, a);
    }
  }
  const double lse = log_sum_exp(logp);
  std::vector<double> p(cells);
  for (std::size_t i = 0; i < cells; ++i) p[i] = std::exp(logp[i] - lse);
  return p;
}

namespace {

// Bootstrap-filter view of the toy model for a fixed theta.  States carry
// the grid values; indices are recovered by matching.
class GridFilterAdapter {
 public:
  GridFilterAdapter(const GridToyModel& toy, std::size_t theta_idx)
      : toy_(&toy), theta_idx_(theta_idx) {}

  std::size_t length() const { return toy_->horizon(); }
  double init_sample(RngStream& rng) const {
    const double u = rng.uniform();
    return toy_->state_values[u < std::exp(toy_->init_log_prob[0]) ? 0 : 1];
  }
  double trans_sample(double xprev, RngStream& rng) const {
    const std::size_t from = state_index(xprev);
    const double stay = toy_->theta_values[theta_idx_];
    const std::size_t to = rng.uniform() < stay ? from : 1 - from;
    return toy_->state_values[to];
  }
  double trans_logdensity(double x, double xprev) const {
    return toy_->trans_log_prob(theta_idx_, state_index(xprev), state_index(x));
  }
  double obs_logdensity(std::size_t t, double x) const {
    return toy_->obs_loglik(t, state_index(x));
  }

  std::size_t state_index(double v) const {
    return v == toy_->state_values[0] ? 0 : 1;
  }

 private:
  const GridToyModel* toy_;
  std::size_t theta_idx_;
};

void grid_path_refresh(const GridToyModel& toy, std::size_t theta_idx,
                       std::vector<std::size_t>& path, double a,
                       std::size_t n_particles, RngStream& rng) {
  const GridFilterAdapter filter(toy, theta_idx);
  Trajectory ref;
  ref.states.resize(path.size());
  for (std::size_t t = 0; t < path.size(); ++t)
    ref.states[t] = toy.state_values[path[t]];
  ref.indices.assign(path.size(), static_cast<int>(n_particles) - 1);
  const FilterState fs = conditional_smc(filter, n_particles, a, ref, rng);
  const Trajectory out = backward_simulate(fs, filter, rng);
  for (std::size_t t = 0; t < path.size(); ++t)
    path[t] = filter.state_index(out.states[t]);
}

}  // namespace

void grid_pg_move(const GridToyModel& toy, std::size_t& theta_idx,
                  std::vector<std::size_t>& path, double a,
                  std::size_t n_particles, RngStream& rng) {
  const std::size_t other = 1 - theta_idx;
  const double log_ratio =
      toy.cell_logdensity(other, path, a) - toy.cell_logdensity(theta_idx, path, a);
  if (log_ratio >= 0.0 || rng.uniform() < std::exp(log_ratio))
    theta_idx = other;
  grid_path_refresh(toy, theta_idx, path, a, n_particles, rng);
}

void grid_broken_move(const GridToyModel& toy, std::size_t& theta_idx,
                      std::vector<std::size_t>& path, double a,
                      std::size_t n_particles, RngStream& rng) {
  theta_idx = 1 - theta_idx;  // no acceptance step
  grid_path_refresh(toy, theta_idx, path, a, n_particles, rng);
}

InvarianceVerdict two_sample_bin_test(std::vector<double> a,
                                      std::vector<double> b,
                                      std::size_t n_bins) {
  if (a.size() < n_bins * 5 || b.size() < n_bins * 5)
    throw std::invalid_argument("two_sample_bin_test: samples too small");
  std::vector<double> pooled;
  pooled.reserve(a.size() + b.size());
  pooled.insert(pooled.end(), a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());

  std::vector<double> edges(n_bins - 1);
  for (std::size_t k = 1; k < n_bins; ++k)
    edges[k - 1] = pooled[pooled.size() * k / n_bins];

  auto bin_of = [&](double x) {
    return static_cast<std::size_t>(
        std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
  };
  std::vector<double> ca(n_bins, 0.0), cb(n_bins, 0.0);
  for (double x : a) ca[bin_of(x)] += 1.0;
  for (double x : b) cb[bin_of(x)] += 1.0;

  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  InvarianceVerdict v;
  v.iterations = a.size() + b.size();
  v.dof = n_bins - 1;
  for (std::size_t k = 0; k < n_bins; ++k) {
    const double tot = ca[k] + cb[k];
    if (tot == 0.0) continue;
    const double ea = tot * na / (na + nb);
    const double eb = tot * nb / (na + nb);
    v.statistic += (ca[k] - ea) * (ca[k] - ea) / ea +
                   (cb[k] - eb) * (cb[k] - eb) / eb;
  }
  v.p_value = chi_square_sf(v.statistic, v.dof);
  return v;
}

std::vector<DensityPoint> kde_export(const std::vector<double>& draws,
                                     double grid_lo, double grid_hi,
                                     std::size_t grid_points) {
  if (draws.empty()) throw std::invalid_argument("kde_export: no draws");
  if (!(grid_lo < grid_hi) || grid_points < 2)
    throw std::invalid_argument("kde_export: bad grid");

  const double n = static_cast<double>(draws.size());
  double bw;
  if (draws.size() < 2) {
    bw = 1e-3;
  } else {
    const double sd = std::sqrt(sample_variance(draws));
    std::vector<double> sorted = draws;
    std::sort(sorted.begin(), sorted.end());
    const double iqr = sorted[sorted.size() * 3 / 4] - sorted[sorted.size() / 4];
    double spread = sd;
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    bw = 0.9 * spread * std::pow(n, -0.2);
    if (!(bw > 0.0)) bw = std::max(1e-3, (grid_hi - grid_lo) / 1000.0);
  }

  std::vector<DensityPoint> out(grid_points);
  const double step = (grid_hi - grid_lo) / static_cast<double>(grid_points - 1);
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double x = grid_lo + step * static_cast<double>(g);
    double dens = 0.0;
    for (double d : draws) {
      const double z = (x - d) / bw;
      dens += std::exp(-0.5 * z * z);
    }
    out[g] = {x, dens / (n * bw * std::sqrt(2.0 * M_PI))};
  }
  return out;
}

std::vector<DensityPoint> kde_export(const std::vector<double>& draws,
                                     std::size_t grid_points) {
  if (draws.empty()) throw std::invalid_argument("kde_export: no draws");
  const auto [lo_it, hi_it] = std::minmax_element(draws.begin(), draws.end());
  double lo = *lo_it, hi = *hi_it;
  double pad = 0.15 * (hi - lo);
  if (pad == 0.0) pad = std::max(1e-2, 1e-2 * std::fabs(lo));
  return kde_export(draws, lo - pad, hi + pad, grid_points);
}

}  // namespace aisil::diag
