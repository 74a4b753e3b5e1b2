#include <doctest.h>

#include <cmath>
#include <vector>

#include "aisil/hmc.hpp"
#include "aisil/math_util.hpp"

using namespace aisil;

namespace {

// Diagonal Gaussian target N(mean, diag(var)).
struct GaussianTarget {
  std::vector<double> mean;
  std::vector<double> var;

  double log_density(const std::vector<double>& x) const {
    double lp = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j)
      lp += normal_logpdf(x[j], mean[j], var[j]);
    return lp;
  }
  void gradient(const std::vector<double>& x, std::vector<double>& g) const {
    g.resize(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
      g[j] = -(x[j] - mean[j]) / var[j];
  }
};

double hamiltonian(const GaussianTarget& t, const std::vector<double>& x,
                   const std::vector<double>& r,
                   const std::vector<double>& mass) {
  double k = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) k += r[j] * r[j] / mass[j];
  return -t.log_density(x) + 0.5 * k;
}

}  // namespace

TEST_CASE("leapfrog is reversible") {
  const GaussianTarget target{{0.5, -1.0, 2.0}, {1.0, 0.3, 2.5}};
  const std::vector<double> mass = {1.0, 2.0, 0.7};
  const std::vector<double> x0 = {0.1, 0.2, -0.3};
  const std::vector<double> r0 = {0.4, -0.5, 0.6};

  LeapfrogResult fwd = leapfrog(target, x0, r0, mass, 0.05, 30);
  REQUIRE(!fwd.diverged);
  for (double& v : fwd.r) v = -v;
  LeapfrogResult back = leapfrog(target, fwd.x, fwd.r, mass, 0.05, 30);
  REQUIRE(!back.diverged);
  for (std::size_t j = 0; j < x0.size(); ++j) {
    CHECK(back.x[j] == doctest::Approx(x0[j]).epsilon(1e-10));
    CHECK(-back.r[j] == doctest::Approx(r0[j]).epsilon(1e-10));
  }
}

TEST_CASE("leapfrog energy error shrinks quadratically in the step size") {
  const GaussianTarget target{{0.0, 0.0}, {1.0, 0.5}};
  const std::vector<double> mass = {1.0, 1.0};
  const std::vector<double> x0 = {1.2, -0.7};
  const std::vector<double> r0 = {0.3, 0.9};
  const double h0 = hamiltonian(target, x0, r0, mass);

  auto energy_error = [&](double eps, std::size_t steps) {
    const LeapfrogResult out = leapfrog(target, x0, r0, mass, eps, steps);
    return std::fabs(hamiltonian(target, out.x, out.r, mass) - h0);
  };
  // Same integration length, halved step size.
  const double e1 = energy_error(0.2, 10);
  const double e2 = energy_error(0.1, 20);
  CHECK(e1 / e2 > 2.0);
  CHECK(e1 / e2 < 8.0);
}

TEST_CASE("divergent trajectory is rejected and leaves x unchanged") {
  struct Spiky {
    double log_density(const std::vector<double>& x) const {
      return -std::exp(4.0 * x[0] * x[0]);
    }
    void gradient(const std::vector<double>& x, std::vector<double>& g) const {
      g = {-8.0 * x[0] * std::exp(4.0 * x[0] * x[0])};
    }
  };
  const Spiky target;
  std::vector<double> x = {2.5};
  const std::vector<double> x_before = x;
  HmcConfig cfg;
  cfg.step_size = 5.0;
  cfg.leapfrog_steps = 50;
  RngStream rng(1);
  const bool accepted =
      hmc_step_with_momentum(target, x, {1.0}, {1.0}, cfg, rng);
  CHECK(!accepted);
  CHECK(x == x_before);
}

TEST_CASE("hmc_step samples a Gaussian target") {
  const GaussianTarget target{{3.0}, {4.0}};
  const std::vector<double> mass = {0.25};
  HmcConfig cfg;
  cfg.step_size = 0.5;
  cfg.leapfrog_steps = 20;
  RngStream rng(2);
  std::vector<double> x = {0.0};
  double m1 = 0.0, m2 = 0.0;
  const int burn = 500, keep = 20000;
  for (int i = 0; i < burn + keep; ++i) {
    hmc_step(target, x, mass, cfg, rng);
    if (i >= burn) {
      m1 += x[0];
      m2 += x[0] * x[0];
    }
  }
  m1 /= keep;
  m2 /= keep;
  CHECK(m1 == doctest::Approx(3.0).epsilon(0.02));
  CHECK(m2 - m1 * m1 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("step size adaptation moves toward the target rate") {
  const double eps = 0.1;
  CHECK(adapt_step_size(eps, 0.9, 0.65, 1) > eps);
  CHECK(adapt_step_size(eps, 0.2, 0.65, 1) < eps);
  CHECK(adapt_step_size(eps, 0.65, 0.65, 3) == doctest::Approx(eps));
  // Gain decays with the stage index.
  const double early = adapt_step_size(eps, 0.9, 0.65, 1);
  const double late = adapt_step_size(eps, 0.9, 0.65, 10);
  CHECK(early > late);
  CHECK(late > eps);
  // Clamping.
  CHECK(adapt_step_size(1e-8, 0.0, 0.65, 1) == doctest::Approx(1e-8));
  CHECK(adapt_step_size(10.0, 1.0, 0.65, 1) == doctest::Approx(10.0));
}

TEST_CASE("sv mass diagonal") {
  const std::vector<double> m = sv_mass_diagonal(0.9, 0.04, 0.5, 5);
  REQUIRE(m.size() == 5);
  CHECK(m[0] == doctest::Approx(0.25 + 1.0 / 0.04));
  CHECK(m[4] == doctest::Approx(0.25 + 1.0 / 0.04));
  for (int t = 1; t < 4; ++t)
    CHECK(m[t] == doctest::Approx(0.25 + 1.81 / 0.04));
}
