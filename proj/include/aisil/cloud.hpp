#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "aisil/math_util.hpp"
#include "aisil/rng.hpp"

namespace aisil {

// Weighted collection of M (theta, state) particles approximating the
// current tempered target.  States are opaque to the engine; the model
// alone interprets them.
template <class Theta, class State>
struct ParticleCloud {
  std::vector<Theta> thetas;
  std::vector<State> states;
  std::vector<double> log_weights;  // log of normalized weights when `normalized`
  std::vector<double> cached_loglik;  // log p(y | theta_i, x_i)
  bool normalized = false;

  std::size_t size() const { return thetas.size(); }

  // Log-sum-exp normalization; weights become exp(log_weights) summing to 1.
  void normalize() {
    const double lse = log_sum_exp(log_weights);
    if (!std::isfinite(lse))
      throw std::runtime_error("ParticleCloud: all weights are zero");
    for (double& lw : log_weights) lw -= lse;
    normalized = true;
  }

  std::vector<double> weights() const {
    if (!normalized)
      throw std::logic_error("ParticleCloud: weights not normalized");
    std::vector<double> w(log_weights.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i]);
    return w;
  }

  void set_uniform_weights() {
    const double lw = -std::log(static_cast<double>(size()));
    for (double& x : log_weights) x = lw;
    normalized = true;
  }
};

// State-space model contract shared by the samplers.  `State` is a
// model-defined latent block; all densities are log-scale.
template <class M>
concept StateSpaceModel = requires(const M m, const typename M::Theta th,
                                   const typename M::State st, RngStream rng) {
  typename M::Theta;
  typename M::State;
  { m.prior_logdensity(th) } -> std::convertible_to<double>;
  { m.state_prior_logdensity(th, st) } -> std::convertible_to<double>;
  { m.loglik(th, st) } -> std::convertible_to<double>;
  { m.prior_sample(rng) } -> std::convertible_to<typename M::Theta>;
  { m.state_prior_sample(th, rng) } -> std::convertible_to<typename M::State>;
};

// log eta_a(theta, x) = a log p(y|theta,x) + log p(x|theta) + log p(theta).
// Returns -inf outside the prior support.
template <StateSpaceModel M>
double log_tempered_target(const M& model, const typename M::Theta& theta,
                           const typename M::State& state, double a) {
  const double lp = model.prior_logdensity(theta);
  if (lp == kNegInf) return kNegInf;
  return a * model.loglik(theta, state) +
         model.state_prior_logdensity(theta, state) + lp;
}

// Alg. 1 step 1: thetas from the prior, states from p(x|theta), equal weights.
template <StateSpaceModel M>
ParticleCloud<typename M::Theta, typename M::State> init_cloud(
    const M& model, std::size_t m_particles, const RngStream& rng) {
  if (m_particles < 2) throw std::invalid_argument("init_cloud: M < 2");
  ParticleCloud<typename M::Theta, typename M::State> cloud;
  cloud.thetas.reserve(m_particles);
  cloud.states.reserve(m_particles);
  for (std::size_t i = 0; i < m_particles; ++i) {
    RngStream s = rng.substream(0, i, 0, RngStream::Role::PriorInit);
    cloud.thetas.push_back(model.prior_sample(s));
    cloud.states.push_back(model.state_prior_sample(cloud.thetas.back(), s));
  }
  cloud.log_weights.assign(m_particles, 0.0);
  cloud.cached_loglik.assign(m_particles, 0.0);
  for (std::size_t i = 0; i < m_particles; ++i)
    cloud.cached_loglik[i] = model.loglik(cloud.thetas[i], cloud.states[i]);
  cloud.set_uniform_weights();
  return cloud;
}

}  // namespace aisil
