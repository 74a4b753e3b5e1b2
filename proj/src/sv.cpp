#include "aisil/sv.hpp"

#include <cmath>
#include <stdexcept>

namespace aisil::sv {

namespace {

// phi-dependent part of the Beta((phi+1)/2; a0, b0) prior log-density.
double phi_prior_logpdf(double phi, const Prior& prior) {
  if (!(phi > -1.0 && phi < 1.0)) return kNegInf;
  return (prior.a0 - 1.0) * std::log1p(phi) +
         (prior.b0 - 1.0) * std::log1p(-phi);
}

// Exact conditional log-target for phi given the path (up to a constant):
// prior + stationary-variance terms + AR residuals.
double phi_conditional_logtarget(double phi, const StatePath& x, double mu,
                                 double tau2, const Prior& prior) {
  if (!(phi > -1.0 && phi < 1.0)) return kNegInf;
  const double c1 = x[0] - mu;
  double lt = phi_prior_logpdf(phi, prior) + 0.5 * std::log1p(-phi * phi) -
              (1.0 - phi * phi) * c1 * c1 / (2.0 * tau2);
  for (std::size_t t = 1; t < x.size(); ++t) {
    const double r = (x[t] - mu) - phi * (x[t - 1] - mu);
    lt -= r * r / (2.0 * tau2);
  }
  return lt;
}

double reflect_into(double v, double lo, double hi) {
  const double span = hi - lo;
  while (v < lo || v > hi) {
    if (v < lo) v = 2.0 * lo - v;
    if (v > hi) v = 2.0 * hi - v;
  }
  (void)span;
  return v;
}

}  // namespace

double phi_prior_logdensity(double phi, const Prior& prior) {
  if (!(phi > -1.0 && phi < 1.0)) return kNegInf;
  return phi_prior_logpdf(phi, prior) -
         (std::lgamma(prior.a0) + std::lgamma(prior.b0) -
          std::lgamma(prior.a0 + prior.b0)) -
         (prior.a0 + prior.b0 - 1.0) * std::log(2.0);
}

double tau2_prior_logdensity(double tau2, const Prior& prior) {
  if (!(tau2 > 0.0)) return kNegInf;
  const double a = prior.v0 / 2.0, b = prior.s0 / 2.0;
  return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(tau2) -
         b / tau2;
}

double prior_logdensity(const Theta& theta, const Prior& prior) {
  if (!(theta.mu > prior.mu_lo && theta.mu < prior.mu_hi)) return kNegInf;
  const double lmu = -std::log(prior.mu_hi - prior.mu_lo);
  return lmu + phi_prior_logdensity(theta.phi, prior) +
         tau2_prior_logdensity(theta.tau2, prior);
}

Theta prior_sample(const Prior& prior, RngStream& rng) {
  Theta th;
  th.mu = prior.mu_lo + (prior.mu_hi - prior.mu_lo) * rng.uniform();
  const double g1 = rng.gamma(prior.a0);
  const double g2 = rng.gamma(prior.b0);
  th.phi = 2.0 * (g1 / (g1 + g2)) - 1.0;
  th.tau2 = rng.inverse_gamma(prior.v0 / 2.0, prior.s0 / 2.0);
  return th;
}

double state_logdensity(const Theta& theta, const StatePath& x) {
  const double var1 = theta.tau2 / (1.0 - theta.phi * theta.phi);
  double lp = normal_logpdf(x[0], theta.mu, var1);
  for (std::size_t t = 1; t < x.size(); ++t)
    lp += normal_logpdf(x[t], theta.mu + theta.phi * (x[t - 1] - theta.mu),
                        theta.tau2);
  return lp;
}

StatePath state_sample(const Theta& theta, std::size_t T, RngStream& rng) {
  if (T < 2) throw std::invalid_argument("state_sample: T < 2");
  StatePath x(T);
  const double sd1 = std::sqrt(theta.tau2 / (1.0 - theta.phi * theta.phi));
  x[0] = rng.normal(theta.mu, sd1);
  const double sd = std::sqrt(theta.tau2);
  for (std::size_t t = 1; t < T; ++t)
    x[t] = rng.normal(theta.mu + theta.phi * (x[t - 1] - theta.mu), sd);
  return x;
}

double measurement_loglik(const StatePath& x, const std::vector<double>& y) {
  double ll = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t)
    ll += normal_logpdf(y[t], 0.0, std::exp(x[t]));
  return ll;
}

std::vector<double> latent_gradient(const Theta& theta, const StatePath& x,
                                    const std::vector<double>& y, double a) {
  const std::size_t T = x.size();
  const double mu = theta.mu, phi = theta.phi, tau2 = theta.tau2;
  std::vector<double> g(T);
  // Measurement term is a(-0.5 + 0.5 y_t^2 exp(-x_t)) at every t.
  for (std::size_t t = 0; t < T; ++t)
    g[t] = a * (-0.5 + 0.5 * y[t] * y[t] * std::exp(-x[t]));
  g[0] += -(1.0 - phi * phi) / tau2 * (x[0] - mu) +
          phi / tau2 * (x[1] - mu - phi * (x[0] - mu));
  for (std::size_t t = 1; t + 1 < T; ++t)
    g[t] += phi / tau2 * (x[t + 1] - mu - phi * (x[t] - mu)) -
            (x[t] - mu - phi * (x[t - 1] - mu)) / tau2;
  g[T - 1] += -(x[T - 1] - mu - phi * (x[T - 2] - mu)) / tau2;
  return g;
}

double sample_mu(const StatePath& x, const Theta& theta, const Prior& prior,
                 RngStream& rng) {
  const std::size_t T = x.size();
  const double phi = theta.phi, tau2 = theta.tau2;
  const double var_mu =
      tau2 / (1.0 - phi * phi +
              static_cast<double>(T - 1) * (1.0 - phi) * (1.0 - phi));
  double s = x[0] * (1.0 - phi * phi);
  for (std::size_t t = 1; t < T; ++t)
    s += (1.0 - phi) * (x[t] - phi * x[t - 1]);
  const double mean_mu = var_mu * s / tau2;
  return truncated_normal(mean_mu, std::sqrt(var_mu), prior.mu_lo, prior.mu_hi,
                          rng);
}

PhiDraw sample_phi(const StatePath& x, double mu, double tau2,
                   double phi_current, const Prior& prior, RngStream& rng) {
  const std::size_t T = x.size();
  double denom = 0.0, cross = 0.0;
  for (std::size_t t = 1; t < T; ++t) {
    const double cp = x[t - 1] - mu;
    denom += cp * cp;
    cross += (x[t] - mu) * cp;
  }
  denom -= (x[0] - mu) * (x[0] - mu);

  if (denom > 0.0) {
    const double var_phi = tau2 / denom;
    const double mean_phi = var_phi * cross / tau2;
    const double phi_star =
        truncated_normal(mean_phi, std::sqrt(var_phi), -1.0, 1.0, rng);
    // The Gaussian part of the conditional cancels against the proposal,
    // leaving the prior and the stationary-variance Jacobian.
    const double log_ratio =
        phi_prior_logpdf(phi_star, prior) +
        0.5 * std::log1p(-phi_star * phi_star) -
        phi_prior_logpdf(phi_current, prior) -
        0.5 * std::log1p(-phi_current * phi_current);
    if (log_ratio >= 0.0 || rng.uniform() < std::exp(log_ratio))
      return {phi_star, true};
    return {phi_current, false};
  }

  // Non-positive proposal variance: reflected random walk with the full
  // MH correction against the exact conditional.
  const double phi_star =
      reflect_into(phi_current + 0.01 * rng.normal(), -1.0, 1.0);
  const double log_ratio =
      phi_conditional_logtarget(phi_star, x, mu, tau2, prior) -
      phi_conditional_logtarget(phi_current, x, mu, tau2, prior);
  if (log_ratio >= 0.0 || rng.uniform() < std::exp(log_ratio))
    return {phi_star, true};
  return {phi_current, false};
}

double sample_tau2(const StatePath& x, double mu, double phi,
                   const Prior& prior, RngStream& rng) {
  const std::size_t T = x.size();
  const double c1 = x[0] - mu;
  double s1 = prior.s0 + (1.0 - phi * phi) * c1 * c1;
  for (std::size_t t = 1; t < T; ++t) {
    const double r = (x[t] - mu) - phi * (x[t - 1] - mu);
    s1 += r * r;
  }
  const double v1 = prior.v0 + static_cast<double>(T);
  return rng.inverse_gamma(v1 / 2.0, s1 / 2.0);
}

Model::Model(std::vector<double> y, Prior prior)
    : y_(std::move(y)), prior_(prior) {
  if (y_.size() < 2) throw std::invalid_argument("sv::Model: series needs T >= 2");
}

double HmcKernel::move(Theta& theta, StatePath& x, double a,
                       RngStream& rng) const {
  const LatentTarget target(model_->data(), theta, a);
  const std::vector<double> mass =
      sv_mass_diagonal(theta.phi, theta.tau2, a, x.size());
  const bool accepted = hmc_step(target, x, mass, cfg_, rng);

  theta.mu = sample_mu(x, theta, model_->prior(), rng);
  theta.phi =
      sample_phi(x, theta.mu, theta.tau2, theta.phi, model_->prior(), rng).phi;
  theta.tau2 = sample_tau2(x, theta.mu, theta.phi, model_->prior(), rng);
  return accepted ? 1.0 : 0.0;
}

double PgKernel::move(Theta& theta, StatePath& x, double a,
                      RngStream& rng) const {
  theta.mu = sample_mu(x, theta, model_->prior(), rng);
  const PhiDraw pd =
      sample_phi(x, theta.mu, theta.tau2, theta.phi, model_->prior(), rng);
  theta.phi = pd.phi;
  theta.tau2 = sample_tau2(x, theta.mu, theta.phi, model_->prior(), rng);

  const FilterAdapter filter(model_->data(), theta);
  Trajectory ref;
  ref.states = x;
  ref.indices.assign(x.size(), static_cast<int>(n_particles_) - 1);
  const FilterState fs = conditional_smc(filter, n_particles_, a, ref, rng);
  x = backward_simulate(fs, filter, rng).states;
  return pd.accepted ? 1.0 : 0.0;
}

}  // namespace aisil::sv
