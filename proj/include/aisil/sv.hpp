#pragma once

#include <cstddef>
#include <vector>

#include "aisil/cloud.hpp"
#include "aisil/filter.hpp"
#include "aisil/hmc.hpp"
#include "aisil/math_util.hpp"
#include "aisil/rng.hpp"

namespace aisil::sv {

// Priors: mu uniform on (-10, 10); (phi+1)/2 ~ Beta(a0, b0); tau2 ~
// IG(v0/2, s0/2) with density proportional to x^{-a-1} exp(-b/x).
struct Prior {
  double mu_lo = -10.0;
  double mu_hi = 10.0;
  double v0 = 10.0;
  double s0 = 0.5;
  double a0 = 100.0;
  double b0 = 1.5;
};

struct Theta {
  double mu = 0.0;
  double phi = 0.0;
  double tau2 = 1.0;
};

using StatePath = std::vector<double>;

double prior_logdensity(const Theta& theta, const Prior& prior);
Theta prior_sample(const Prior& prior, RngStream& rng);

// Normalized log-densities of the individual parameter priors; the factor
// model composes these for its zero-mean volatility series.
double phi_prior_logdensity(double phi, const Prior& prior);
double tau2_prior_logdensity(double tau2, const Prior& prior);

// log N(x1; mu, tau2/(1-phi^2)) + sum_t log N(x_t; mu+phi(x_{t-1}-mu), tau2)
double state_logdensity(const Theta& theta, const StatePath& x);
StatePath state_sample(const Theta& theta, std::size_t T, RngStream& rng);

// sum_t log N(y_t; 0, exp(x_t))
double measurement_loglik(const StatePath& x, const std::vector<double>& y);

// Gradient of a * log p(y|x) + log p(x|theta) with respect to x.
std::vector<double> latent_gradient(const Theta& theta, const StatePath& x,
                                    const std::vector<double>& y, double a);

// Exact Gibbs draw for mu (truncated normal on the prior support).
double sample_mu(const StatePath& x, const Theta& theta, const Prior& prior,
                 RngStream& rng);

struct PhiDraw {
  double phi;
  bool accepted;
};

// Independence MH for phi from the conjugate-style truncated-normal
// proposal, falling back to a reflected random walk when the proposal
// variance formula is non-positive.  `mu` may be 0 for zero-mean (factor
// log-volatility) series.
PhiDraw sample_phi(const StatePath& x, double mu, double tau2,
                   double phi_current, const Prior& prior, RngStream& rng);

// Exact inverse-gamma Gibbs draw for tau2.
double sample_tau2(const StatePath& x, double mu, double phi,
                   const Prior& prior, RngStream& rng);

// State-space model wrapper over a fixed data series.
class Model {
 public:
  using Theta = sv::Theta;
  using State = StatePath;

  Model(std::vector<double> y, Prior prior = {});

  double prior_logdensity(const Theta& th) const {
    return sv::prior_logdensity(th, prior_);
  }
  double state_prior_logdensity(const Theta& th, const State& x) const {
    return state_logdensity(th, x);
  }
  double loglik(const Theta& th, const State& x) const {
    (void)th;
    return measurement_loglik(x, y_);
  }
  Theta prior_sample(RngStream& rng) const { return sv::prior_sample(prior_, rng); }
  State state_prior_sample(const Theta& th, RngStream& rng) const {
    return state_sample(th, y_.size(), rng);
  }

  const std::vector<double>& data() const { return y_; }
  const Prior& prior() const { return prior_; }
  std::size_t length() const { return y_.size(); }

 private:
  std::vector<double> y_;
  Prior prior_;
};

// HMC target for the latent volatilities at temperature a.
class LatentTarget {
 public:
  LatentTarget(const std::vector<double>& y, const Theta& theta, double a)
      : y_(&y), theta_(theta), a_(a) {}

  double log_density(const StatePath& x) const {
    double ll = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t)
      ll += normal_logpdf((*y_)[t], 0.0, std::exp(x[t]));
    return a_ * ll + state_logdensity(theta_, x);
  }
  void gradient(const StatePath& x, std::vector<double>& grad) const {
    grad = latent_gradient(theta_, x, *y_, a_);
  }

 private:
  const std::vector<double>* y_;
  Theta theta_;
  double a_;
};

// Bootstrap-filter view of the SV model for a fixed theta.
class FilterAdapter {
 public:
  FilterAdapter(const std::vector<double>& y, const Theta& theta)
      : y_(&y), theta_(theta) {}

  std::size_t length() const { return y_->size(); }
  double init_sample(RngStream& rng) const {
    const double sd =
        std::sqrt(theta_.tau2 / (1.0 - theta_.phi * theta_.phi));
    return rng.normal(theta_.mu, sd);
  }
  double trans_sample(double xprev, RngStream& rng) const {
    return rng.normal(theta_.mu + theta_.phi * (xprev - theta_.mu),
                      std::sqrt(theta_.tau2));
  }
  double trans_logdensity(double x, double xprev) const {
    return normal_logpdf(x, theta_.mu + theta_.phi * (xprev - theta_.mu),
                         theta_.tau2);
  }
  double obs_logdensity(std::size_t t, double x) const {
    return normal_logpdf((*y_)[t], 0.0, std::exp(x));
  }

 private:
  const std::vector<double>* y_;
  Theta theta_;
};

// Alg.-2 Markov move: HMC on the latent path, then the mu/phi/tau2
// conditionals.  Step size is shared across particles within a stage and
// adapted at stage barriers from the mean acceptance.
class HmcKernel {
 public:
  HmcKernel(const Model& model, HmcConfig cfg) : model_(&model), cfg_(cfg) {}

  double move(Theta& theta, StatePath& x, double a, RngStream& rng) const;
  void end_stage(std::size_t stage, double accept_rate) {
    cfg_.step_size = adapt_step_size(cfg_.step_size, accept_rate,
                                     cfg_.target_accept, stage);
  }
  const HmcConfig& config() const { return cfg_; }

 private:
  const Model* model_;
  HmcConfig cfg_;
};

// Alg.-4 Markov move: parameter conditionals given the retained trajectory,
// then conditional SMC and backward simulation to refresh the path.
class PgKernel {
 public:
  PgKernel(const Model& model, std::size_t n_particles)
      : model_(&model), n_particles_(n_particles) {}

  double move(Theta& theta, StatePath& x, double a, RngStream& rng) const;
  void end_stage(std::size_t, double) {}

 private:
  const Model* model_;
  std::size_t n_particles_;
};

}  // namespace aisil::sv
