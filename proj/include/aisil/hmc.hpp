#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <vector>

#include "aisil/rng.hpp"

namespace aisil {

// Log-density target for HMC over a latent vector.  gradient() writes
// d log_density / d x into `grad`.
template <class T>
concept HmcTarget = requires(const T t, const std::vector<double>& x,
                             std::vector<double>& grad) {
  { t.log_density(x) } -> std::convertible_to<double>;
  { t.gradient(x, grad) };
};

struct HmcConfig {
  std::size_t leapfrog_steps = 100;
  double step_size = 0.01;
  double target_accept = 0.65;
  double divergence_threshold = 1000.0;  // |dH| beyond this auto-rejects
};

struct LeapfrogResult {
  std::vector<double> x;
  std::vector<double> r;
  bool diverged = false;
};

// Alg.-style leapfrog over L steps: half kick on the first step, full drift
// each step, half kick on the last.  `mass_diag` is the diagonal mass matrix.
template <HmcTarget T>
LeapfrogResult leapfrog(const T& target, std::vector<double> x,
                        std::vector<double> r,
                        const std::vector<double>& mass_diag, double eps,
                        std::size_t steps) {
  const std::size_t d = x.size();
  std::vector<double> grad(d);
  LeapfrogResult out;

  auto kick = [&](double scale) -> bool {
    target.gradient(x, grad);
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(grad[j])) return false;
      r[j] += scale * eps * grad[j];
    }
    return true;
  };

  for (std::size_t i = 1; i <= steps; ++i) {
    if (i == 1 && !kick(0.5)) {
      out.diverged = true;
      break;
    }
    for (std::size_t j = 0; j < d; ++j) x[j] += eps * r[j] / mass_diag[j];
    if (!kick(i == steps ? 0.5 : 1.0)) {
      out.diverged = true;
      break;
    }
  }
  out.x = std::move(x);
  out.r = std::move(r);
  return out;
}

namespace detail {
inline double kinetic_energy(const std::vector<double>& r,
                             const std::vector<double>& mass_diag) {
  double k = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) k += r[j] * r[j] / mass_diag[j];
  return 0.5 * k;
}
}  // namespace detail

// Single HMC update with an externally supplied initial momentum; used by
// hmc_step and by tests that need to pin the momentum.
template <HmcTarget T>
bool hmc_step_with_momentum(const T& target, std::vector<double>& x,
                            std::vector<double> r,
                            const std::vector<double>& mass_diag,
                            const HmcConfig& cfg, RngStream& rng) {
  const double h0 =
      -target.log_density(x) + detail::kinetic_energy(r, mass_diag);
  LeapfrogResult prop = leapfrog(target, x, std::move(r), mass_diag,
                                 cfg.step_size, cfg.leapfrog_steps);
  if (prop.diverged) return false;
  const double h1 =
      -target.log_density(prop.x) + detail::kinetic_energy(prop.r, mass_diag);
  const double dh = h1 - h0;
  if (!std::isfinite(dh) || std::fabs(dh) > cfg.divergence_threshold)
    return false;
  if (dh <= 0.0 || rng.uniform() < std::exp(-dh)) {
    x = std::move(prop.x);
    return true;
  }
  return false;
}

// Full HMC step: refresh momentum r ~ N(0, M), integrate, MH-accept.
// On reject x is left unchanged.
template <HmcTarget T>
bool hmc_step(const T& target, std::vector<double>& x,
              const std::vector<double>& mass_diag, const HmcConfig& cfg,
              RngStream& rng) {
  std::vector<double> r(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    r[j] = std::sqrt(mass_diag[j]) * rng.normal();
  return hmc_step_with_momentum(target, x, std::move(r), mass_diag, cfg, rng);
}

// Robbins-Monro update of log(step size) from the cloud-averaged acceptance
// rate, gain c0 / stage.  The step size is frozen within a stage and updated
// at stage barriers.
inline double adapt_step_size(double eps, double observed_rate,
                              double target_rate, std::size_t stage,
                              double gain0 = 1.0) {
  const double gain = gain0 / static_cast<double>(std::max<std::size_t>(stage, 1));
  double log_eps = std::log(eps) + gain * (observed_rate - target_rate);
  return std::clamp(std::exp(log_eps), 1e-8, 10.0);
}

// Diagonal of the AR(1) latent-state precision plus the tempered measurement
// curvature: 0.5 a + (1 + phi^2)/tau2 at interior times, 0.5 a + 1/tau2 at
// the endpoints.
inline std::vector<double> sv_mass_diagonal(double phi, double tau2, double a,
                                            std::size_t T) {
  std::vector<double> m(T, 0.5 * a + (1.0 + phi * phi) / tau2);
  m.front() = 0.5 * a + 1.0 / tau2;
  m.back() = 0.5 * a + 1.0 / tau2;
  return m;
}

}  // namespace aisil
