#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "aisil/filter.hpp"
#include "aisil/sv.hpp"

using namespace aisil;

namespace {

// Linear-Gaussian state space: x1 ~ N(0, p0), x_t = rho x_{t-1} + N(0, q),
// y_t ~ N(x_t, r).  Exact likelihood available from the Kalman filter.
struct LinearGaussian {
  std::vector<double> y;
  double rho = 0.9;
  double q = 0.25;
  double r = 0.5;
  double p0 = 1.0;

  std::size_t length() const { return y.size(); }
  double init_sample(RngStream& rng) const {
    return rng.normal(0.0, std::sqrt(p0));
  }
  double trans_sample(double xprev, RngStream& rng) const {
    return rng.normal(rho * xprev, std::sqrt(q));
  }
  double trans_logdensity(double x, double xprev) const {
    return normal_logpdf(x, rho * xprev, q);
  }
  double obs_logdensity(std::size_t t, double x) const {
    return normal_logpdf(y[t], x, r);
  }
};

double kalman_loglik(const LinearGaussian& m) {
  double mean = 0.0, var = m.p0, ll = 0.0;
  for (std::size_t t = 0; t < m.y.size(); ++t) {
    if (t > 0) {
      mean = m.rho * mean;
      var = m.rho * m.rho * var + m.q;
    }
    const double s = var + m.r;
    ll += normal_logpdf(m.y[t], mean, s);
    const double k = var / s;
    mean += k * (m.y[t] - mean);
    var *= 1.0 - k;
  }
  return ll;
}

}  // namespace

TEST_CASE("systematic strata hand case") {
  // Weights (0.75, 0.25), u = 0.4, 4 draws: points 0.1, 0.35, 0.6, 0.85.
  const std::vector<double> w = {0.75, 0.25};
  const std::vector<int> idx = systematic_indices(w, 0.4, 4);
  CHECK(idx == std::vector<int>{0, 0, 0, 1});
}

TEST_CASE("systematic offspring counts are floor or ceil of N W") {
  const std::vector<double> w = {0.42, 0.13, 0.08, 0.37};
  RngStream rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const std::vector<int> idx = systematic_indices(w, rng.uniform(), 100);
    std::vector<int> counts(w.size(), 0);
    for (int j : idx) ++counts[j];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double expect = 100.0 * w[i];
      CHECK(counts[i] >= static_cast<int>(std::floor(expect)));
      CHECK(counts[i] <= static_cast<int>(std::ceil(expect)));
    }
  }
}

TEST_CASE("systematic marginal probabilities") {
  const std::vector<double> w = {0.6, 0.1, 0.3};
  RngStream rng(2);
  std::vector<double> counts(w.size(), 0.0);
  const int reps = 20000;
  for (int rep = 0; rep < reps; ++rep)
    for (int j : systematic_indices(w, rng.uniform(), 3))
      counts[j] += 1.0 / 3.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    CHECK(counts[i] / reps == doctest::Approx(w[i]).epsilon(0.02));
}

TEST_CASE("bootstrap filter matches the Kalman likelihood") {
  LinearGaussian m;
  m.y = {0.5, -0.2, 0.9, 0.1, -0.7};
  const double exact = kalman_loglik(m);
  const RngStream root(3);
  const int reps = 400;
  std::vector<double> ratio(reps);
  for (int rep = 0; rep < reps; ++rep) {
    RngStream rng = root.substream(rep, 0, 0, RngStream::Role::Filter);
    ratio[rep] = std::exp(bootstrap_filter(m, 200, 1.0, rng).loglik - exact);
  }
  const double mean = mean_of(ratio);
  const double se = std::sqrt(sample_variance(ratio) / reps);
  CHECK(std::fabs(mean - 1.0) < 5.0 * se);
}

TEST_CASE("tempering scales the observation weights") {
  LinearGaussian m;
  m.y = {0.5, -0.2, 0.9};
  // At a = 0 every particle has weight 1, so the estimate is exactly 0.
  RngStream rng(4);
  const FilterState fs = bootstrap_filter(m, 50, 0.0, rng);
  CHECK(fs.loglik == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fs.temperature == 0.0);
}

TEST_CASE("log-weight clipping drops far-underflowed particles only") {
  std::vector<double> logw = {0.0, -650.0, -800.0};
  detail::clip_log_weights(logw);
  CHECK(logw[0] == 0.0);
  CHECK(logw[1] == -650.0);
  CHECK(logw[2] == kNegInf);
}

TEST_CASE("fully degenerate step raises with the time index") {
  struct Degenerate : LinearGaussian {
    double obs_logdensity(std::size_t t, double) const {
      return t == 1 ? kNegInf : 0.0;
    }
  };
  Degenerate m;
  m.y = {0.0, 0.0, 0.0};
  RngStream rng(5);
  try {
    (void)bootstrap_filter(m, 10, 1.0, rng);
    FAIL("expected FilterDegenerateError");
  } catch (const FilterDegenerateError& e) {
    CHECK(e.time_index == 1);
  }
}

TEST_CASE("conditional SMC keeps the reference in the last slot") {
  LinearGaussian m;
  m.y = {0.5, -0.2, 0.9, 0.1};
  Trajectory ref;
  ref.states = {0.3, 0.1, -0.4, 0.2};
  ref.indices = {4, 4, 4, 4};
  RngStream rng(6);
  const FilterState fs = conditional_smc(m, 5, 1.0, ref, rng);
  for (std::size_t t = 0; t < 4; ++t)
    CHECK(fs.particles[t][4] == ref.states[t]);
  for (std::size_t t = 0; t + 1 < 4; ++t) CHECK(fs.ancestors[t][4] == 4);
}

TEST_CASE("conditional SMC with one particle reproduces the reference") {
  LinearGaussian m;
  m.y = {0.5, -0.2};
  Trajectory ref;
  ref.states = {0.3, 0.1};
  ref.indices = {0, 0};
  RngStream rng(7);
  const FilterState fs = conditional_smc(m, 1, 1.0, ref, rng);
  RngStream rng2(8);
  const Trajectory out = backward_simulate(fs, m, rng2);
  CHECK(out.states == ref.states);
}

TEST_CASE("backward simulation matches enumerated path probabilities") {
  LinearGaussian m;
  m.y = {0.4, -0.6};
  RngStream frng(9);
  const FilterState fs = bootstrap_filter(m, 2, 1.0, frng);

  // P(J1 = i, J2 = j) = Wtilde2_j * w1_i f(x2_j | x1_i) / sum_l w1_l f(x2_j | x1_l)
  double probs[2][2];
  for (int j = 0; j < 2; ++j) {
    double denom[2];
    for (int i = 0; i < 2; ++i)
      denom[i] = std::exp(fs.log_weights[0][i]) *
                 std::exp(m.trans_logdensity(fs.particles[1][j],
                                             fs.particles[0][i]));
    for (int i = 0; i < 2; ++i)
      probs[i][j] =
          fs.norm_weights[1][j] * denom[i] / (denom[0] + denom[1]);
  }

  const int n = 40000;
  double counts[2][2] = {{0, 0}, {0, 0}};
  const RngStream root(10);
  for (int it = 0; it < n; ++it) {
    RngStream rng = root.substream(it, 0, 0, RngStream::Role::Generic);
    const Trajectory tr = backward_simulate(fs, m, rng);
    counts[tr.indices[0]][tr.indices[1]] += 1.0;
  }
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double se = std::sqrt(probs[i][j] * (1.0 - probs[i][j]) / n);
      CHECK(std::fabs(counts[i][j] / n - probs[i][j]) < 4.0 * se + 1e-12);
    }
}

TEST_CASE("filter argument validation") {
  LinearGaussian m;
  m.y = {0.1, 0.2};
  RngStream rng(11);
  CHECK_THROWS_AS((void)bootstrap_filter(m, 1, 1.0, rng),
                  std::invalid_argument);
  Trajectory short_ref;
  short_ref.states = {0.1};
  short_ref.indices = {0};
  CHECK_THROWS_AS((void)conditional_smc(m, 3, 1.0, short_ref, rng),
                  std::invalid_argument);
}
