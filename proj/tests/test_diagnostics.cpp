#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "aisil/diagnostics.hpp"

using namespace aisil;

namespace {

// Filter model whose likelihood estimate is the same for every particle
// configuration: constant observation density.
struct ConstantLik {
  std::size_t T = 4;
  std::size_t length() const { return T; }
  double init_sample(RngStream& rng) const { return rng.normal(); }
  double trans_sample(double x, RngStream& rng) const {
    return 0.5 * x + rng.normal();
  }
  double trans_logdensity(double x, double xprev) const {
    return normal_logpdf(x, 0.5 * xprev, 1.0);
  }
  double obs_logdensity(std::size_t, double) const { return -1.25; }
};

}  // namespace

TEST_CASE("variance harness reports zero for a constant likelihood") {
  const ConstantLik m;
  const auto report =
      diag::pf_variance_harness(m, {10, 50}, 30, 1.0, RngStream(1));
  REQUIRE(report.rows.size() == 2);
  for (const auto& row : report.rows) {
    CHECK(row.degenerate == 0);
    CHECK(row.variance == doctest::Approx(0.0).epsilon(1e-12));
    for (double ll : row.logliks) CHECK(ll == doctest::Approx(-5.0));
  }
}

TEST_CASE("variance harness is worker-invariant") {
  struct Noisy : ConstantLik {
    double obs_logdensity(std::size_t t, double x) const {
      return normal_logpdf(0.3, x, 1.0 + static_cast<double>(t));
    }
  };
  const Noisy m;
  const auto a = diag::pf_variance_harness(m, {20}, 40, 1.0, RngStream(2), 1);
  const auto b = diag::pf_variance_harness(m, {20}, 40, 1.0, RngStream(2), 4);
  CHECK(a.rows[0].logliks == b.rows[0].logliks);
}

TEST_CASE("aggregate of a single run passes through") {
  diag::RunSummary r;
  r.param_names = {"a", "b"};
  r.post_mean = {1.0, 2.0};
  r.post_sd = {0.1, 0.2};
  r.log_z = -5.0;
  r.ladder_length = 12;
  const auto agg = diag::aggregate_runs({r});
  CHECK(agg.pooled_mean == r.post_mean);
  CHECK(agg.between_run_sd == std::vector<double>{0.0, 0.0});
  CHECK(agg.mean_log_z == -5.0);
  CHECK(agg.log_z_sd == 0.0);
  CHECK(agg.mean_stages == 12.0);
}

TEST_CASE("identical runs have zero between-run spread") {
  diag::RunSummary r;
  r.param_names = {"a"};
  r.post_mean = {1.5};
  r.post_sd = {0.3};
  r.log_z = -7.5;
  r.ladder_length = 9;
  const auto agg = diag::aggregate_runs({r, r, r});
  CHECK(agg.between_run_sd[0] == doctest::Approx(0.0));
  CHECK(agg.log_z_sd == doctest::Approx(0.0));
  CHECK(agg.run_count == 3);
}

TEST_CASE("aggregate rejects inconsistent parameter sets") {
  diag::RunSummary a, b;
  a.param_names = {"x"};
  a.post_mean = {0.0};
  a.post_sd = {1.0};
  b.param_names = {"y"};
  b.post_mean = {0.0};
  b.post_sd = {1.0};
  CHECK_THROWS_AS((void)diag::aggregate_runs({a, b}), std::invalid_argument);
  CHECK_THROWS_AS((void)diag::aggregate_runs({}), std::invalid_argument);
}

TEST_CASE("chi-square tail probabilities match tabled values") {
  CHECK(diag::chi_square_sf(3.841458820694124, 1) ==
        doctest::Approx(0.05).epsilon(1e-9));
  CHECK(diag::chi_square_sf(18.307038053275146, 10) ==
        doctest::Approx(0.05).epsilon(1e-9));
  CHECK(diag::chi_square_sf(23.209251158954356, 10) ==
        doctest::Approx(0.01).epsilon(1e-9));
  CHECK(diag::chi_square_sf(0.0, 5) == 1.0);
}

TEST_CASE("enumerated grid target is a probability vector") {
  const diag::GridToyModel toy;
  for (double a : {0.0, 0.4, 1.0}) {
    const auto p = diag::enumerate_grid_target(toy, a);
    CHECK(p.size() == toy.cell_count());
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-12));
    for (double x : p) CHECK(x > 0.0);
  }
}

TEST_CASE("identity kernel passes the invariance harness trivially") {
  const diag::GridToyModel toy;
  const auto v = diag::kernel_invariance_harness(
      toy, 0.6, 20000,
      [](const diag::GridToyModel&, std::size_t&, std::vector<std::size_t>&,
         RngStream&) {},
      RngStream(3));
  CHECK(v.p_value > 0.01);
}

TEST_CASE("pg move on the grid toy preserves the target") {
  const diag::GridToyModel toy;
  const auto v = diag::kernel_invariance_harness(
      toy, 0.6, 20000,
      [](const diag::GridToyModel& t, std::size_t& th,
         std::vector<std::size_t>& path, RngStream& r) {
        diag::grid_pg_move(t, th, path, 0.6, 2, r);
      },
      RngStream(4));
  CHECK(v.p_value > 0.01);
}

TEST_CASE("broken kernel is caught by the harness") {
  const diag::GridToyModel toy;
  const auto v = diag::kernel_invariance_harness(
      toy, 0.6, 20000,
      [](const diag::GridToyModel& t, std::size_t& th,
         std::vector<std::size_t>& path, RngStream& r) {
        diag::grid_broken_move(t, th, path, 0.6, 2, r);
      },
      RngStream(5));
  CHECK(v.p_value < 0.001);
}

TEST_CASE("two-sample bin test separates distinct distributions") {
  RngStream rng(6);
  std::vector<double> a(5000), b(5000), c(5000);
  for (auto& x : a) x = rng.normal();
  for (auto& x : b) x = rng.normal();
  for (auto& x : c) x = rng.normal() + 0.2;
  CHECK(diag::two_sample_bin_test(a, b).p_value > 0.01);
  CHECK(diag::two_sample_bin_test(a, c).p_value < 1e-6);
}

TEST_CASE("kde integrates to one") {
  RngStream rng(7);
  std::vector<double> draws(5000);
  for (auto& x : draws) x = rng.normal(1.0, 2.0);
  const auto dens = diag::kde_export(draws, -9.0, 11.0, 400);
  double integral = 0.0;
  for (std::size_t i = 1; i < dens.size(); ++i)
    integral += 0.5 * (dens[i].density + dens[i - 1].density) *
                (dens[i].x - dens[i - 1].x);
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("kde of a single draw peaks at the draw") {
  const auto dens = diag::kde_export({0.0});
  double best_x = 1e9, best_d = -1.0, integral = 0.0;
  for (std::size_t i = 0; i < dens.size(); ++i) {
    if (dens[i].density > best_d) {
      best_d = dens[i].density;
      best_x = dens[i].x;
    }
    if (i > 0)
      integral += 0.5 * (dens[i].density + dens[i - 1].density) *
                  (dens[i].x - dens[i - 1].x);
  }
  CHECK(std::fabs(best_x) < 1e-3);
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("kde tracks a known density") {
  RngStream rng(8);
  std::vector<double> draws(100000);
  for (auto& x : draws) x = rng.normal();
  const auto dens = diag::kde_export(draws, -4.0, 4.0, 200);
  double worst = 0.0;
  for (const auto& p : dens) {
    const double truth =
        std::exp(-0.5 * p.x * p.x) / std::sqrt(2.0 * M_PI);
    worst = std::max(worst, std::fabs(p.density - truth));
  }
  CHECK(worst < 0.02);
}
