#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "aisil/cloud.hpp"
#include "aisil/sv.hpp"

using namespace aisil;

namespace {

sv::Model tiny_model() { return sv::Model({0.3, -0.5, 0.8, 0.1}); }

}  // namespace

TEST_CASE("init_cloud gives uniform weights and cached likelihoods") {
  const sv::Model model = tiny_model();
  const RngStream rng(1);
  const auto cloud = init_cloud(model, 50, rng);
  REQUIRE(cloud.size() == 50);
  const std::vector<double> w = cloud.weights();
  for (double x : w) CHECK(x == doctest::Approx(0.02).epsilon(1e-12));
  for (std::size_t i = 0; i < cloud.size(); ++i)
    CHECK(cloud.cached_loglik[i] ==
          doctest::Approx(model.loglik(cloud.thetas[i], cloud.states[i])));
}

TEST_CASE("init_cloud draws theta from the prior") {
  const sv::Model model = tiny_model();
  const RngStream rng(2);
  const auto cloud = init_cloud(model, 10000, rng);

  // mu is uniform on (-10, 10): Kolmogorov-Smirnov against the exact CDF.
  std::vector<double> mu(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) mu[i] = cloud.thetas[i].mu;
  std::sort(mu.begin(), mu.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double cdf = (mu[i] + 10.0) / 20.0;
    const double lo = static_cast<double>(i) / static_cast<double>(mu.size());
    const double hi =
        static_cast<double>(i + 1) / static_cast<double>(mu.size());
    ks = std::max({ks, std::fabs(cdf - lo), std::fabs(cdf - hi)});
  }
  // 0.1% critical value 1.95 / sqrt(n).
  CHECK(ks < 1.95 / std::sqrt(static_cast<double>(mu.size())));

  // (phi+1)/2 ~ Beta(100, 1.5): mean 2*100/101.5 - 1.
  double phi_mean = 0.0, tau2_mean = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    phi_mean += cloud.thetas[i].phi;
    tau2_mean += cloud.thetas[i].tau2;
  }
  phi_mean /= static_cast<double>(cloud.size());
  tau2_mean /= static_cast<double>(cloud.size());
  CHECK(phi_mean == doctest::Approx(200.0 / 101.5 - 1.0).epsilon(0.001));
  // tau2 ~ IG(5, 0.25): mean 0.25 / 4.
  CHECK(tau2_mean == doctest::Approx(0.0625).epsilon(0.05));
}

TEST_CASE("log_tempered_target is affine in the temperature") {
  const sv::Model model = tiny_model();
  RngStream rng(3);
  const sv::Theta th = model.prior_sample(rng);
  const auto x = model.state_prior_sample(th, rng);
  const double at0 = log_tempered_target(model, th, x, 0.0);
  const double ll = model.loglik(th, x);
  for (double a : {0.1, 0.33, 0.5, 0.999, 1.0})
    CHECK(log_tempered_target(model, th, x, a) ==
          doctest::Approx(at0 + a * ll).epsilon(1e-12));
  CHECK(at0 == doctest::Approx(model.state_prior_logdensity(th, x) +
                               model.prior_logdensity(th)));
}

TEST_CASE("log_tempered_target is -inf outside the prior support") {
  const sv::Model model = tiny_model();
  const sv::Theta bad{11.0, 0.5, 0.1};  // mu outside (-10, 10)
  const std::vector<double> x = {0.0, 0.0, 0.0, 0.0};
  CHECK(log_tempered_target(model, bad, x, 0.5) == kNegInf);
  const sv::Theta bad2{0.0, 1.5, 0.1};
  CHECK(log_tempered_target(model, bad2, x, 0.5) == kNegInf);
  const sv::Theta bad3{0.0, 0.5, -0.1};
  CHECK(log_tempered_target(model, bad3, x, 0.5) == kNegInf);
}

TEST_CASE("weights require normalization first") {
  ParticleCloud<int, int> cloud;
  cloud.thetas = {1, 2};
  cloud.states = {1, 2};
  cloud.log_weights = {-1.0, -2.0};
  cloud.cached_loglik = {0.0, 0.0};
  CHECK_THROWS_AS((void)cloud.weights(), std::logic_error);
  cloud.normalize();
  const auto w = cloud.weights();
  CHECK(w[0] + w[1] == doctest::Approx(1.0));
  CHECK(w[0] / w[1] == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("normalize rejects a fully degenerate cloud") {
  ParticleCloud<int, int> cloud;
  cloud.thetas = {1, 2};
  cloud.states = {1, 2};
  cloud.log_weights = {kNegInf, kNegInf};
  cloud.cached_loglik = {0.0, 0.0};
  CHECK_THROWS_AS(cloud.normalize(), std::runtime_error);
}

TEST_CASE("init_cloud needs at least two particles") {
  const sv::Model model = tiny_model();
  const RngStream rng(4);
  CHECK_THROWS_AS((void)init_cloud(model, 1, rng), std::invalid_argument);
}

TEST_CASE("init_cloud is independent of call order") {
  const sv::Model model = tiny_model();
  const RngStream rng(5);
  const auto a = init_cloud(model, 20, rng);
  const auto b = init_cloud(model, 20, rng);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.thetas[i].mu == b.thetas[i].mu);
    CHECK(a.states[i] == b.states[i]);
  }
}
