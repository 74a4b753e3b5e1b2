#pragma once

#include <cstddef>
#include <vector>

#include "aisil/cloud.hpp"
#include "aisil/filter.hpp"
#include "aisil/hmc.hpp"
#include "aisil/rng.hpp"
#include "aisil/sv.hpp"

namespace aisil::factor {

// Parameters of the K-factor SV model: per-series AR volatility parameters,
// per-factor AR volatility parameters (zero level), and the S x K loading
// matrix with beta_sk = 0 for k > s (diagonal unrestricted).
struct Theta {
  std::vector<sv::Theta> idio;             // size S; (mu, phi, tau2)
  std::vector<sv::Theta> fac;              // size K; mu fixed at 0
  std::vector<std::vector<double>> beta;   // S rows of length K

  std::size_t series_count() const { return idio.size(); }
  std::size_t factor_count() const { return fac.size(); }
};

// Latent block: idiosyncratic log-volatilities h, factor log-volatilities
// lambda, and the latent factors f, all stored series-major (rows of length T).
struct State {
  std::vector<std::vector<double>> h;       // S x T
  std::vector<std::vector<double>> lambda;  // K x T
  std::vector<std::vector<double>> f;       // K x T
};

// Number of unrestricted loadings in row s (0-based): min(s+1, K).
inline std::size_t free_loadings(std::size_t s, std::size_t K) {
  return std::min(s + 1, K);
}

class Model {
 public:
  using Theta = factor::Theta;
  using State = factor::State;

  // `returns` is row-major T x S as loaded from disk.
  Model(const std::vector<std::vector<double>>& returns, std::size_t n_factors,
        sv::Prior prior = {}, double loading_prior_var = 1.0);

  double prior_logdensity(const Theta& th) const;
  double state_prior_logdensity(const Theta& th, const State& st) const;
  double loglik(const Theta& th, const State& st) const;
  Theta prior_sample(RngStream& rng) const;
  State state_prior_sample(const Theta& th, RngStream& rng) const;

  std::size_t series_count() const { return y_.size(); }
  std::size_t factor_count() const { return n_factors_; }
  std::size_t length() const { return T_; }
  const std::vector<double>& series(std::size_t s) const { return y_[s]; }
  const sv::Prior& prior() const { return prior_; }
  double loading_prior_var() const { return loading_prior_var_; }

  // Residual series y_s - beta_s f for a fixed (beta, f).
  std::vector<double> residual_series(std::size_t s, const Theta& th,
                                      const State& st) const;

 private:
  std::vector<std::vector<double>> y_;  // S x T
  std::size_t n_factors_;
  std::size_t T_;
  sv::Prior prior_;
  double loading_prior_var_;
};

// a * sum log N(y_st; beta_s f_t, e^h) + sum log N(f_kt; 0, e^lambda)
// + AR log-priors for all h and lambda paths + log p(theta).  The factor
// density p(f | lambda) carries no tempering exponent.
double tempered_logdensity(const Model& model, const Theta& th,
                           const State& st, double a);

// Gradient of the h_s block (measurement residual y_st - beta_s f_t).
std::vector<double> idio_gradient(const Model& model, std::size_t s,
                                  const Theta& th, const State& st, double a);

// Gradient of the lambda_k block ("observations" f_kt, zero mean).  The
// measurement term carries the tempering exponent as in the printed
// formulas; see tempered_logdensity for the divergence note.
std::vector<double> factor_vol_gradient(const Theta& th, const State& st,
                                        std::size_t k, double a);

// Exact Gibbs draw of the z_s unrestricted loadings in row s.
std::vector<double> sample_beta_row(std::size_t z, const State& st,
                                    const std::vector<double>& y_s,
                                    std::size_t s_row_h, double a,
                                    double loading_prior_var, RngStream& rng);

// Exact K-variate Gibbs draw of f_t.
std::vector<double> sample_factors_at(const Theta& th, const State& st,
                                      std::size_t t,
                                      const std::vector<std::vector<double>>& y,
                                      double a, RngStream& rng);

// Alg.-5 move: parameter conditionals, loadings, factors, then HMC on each
// h_s and lambda_k path with per-series diagonal mass.
class HmcKernel {
 public:
  HmcKernel(const Model& model, HmcConfig cfg) : model_(&model), cfg_(cfg) {}

  double move(Theta& theta, State& st, double a, RngStream& rng) const;
  void end_stage(std::size_t stage, double accept_rate) {
    cfg_.step_size = adapt_step_size(cfg_.step_size, accept_rate,
                                     cfg_.target_accept, stage);
  }
  const HmcConfig& config() const { return cfg_; }

 private:
  const Model* model_;
  HmcConfig cfg_;
};

// Alg.-6 move: parameter conditionals, loadings, factors, then independent
// CSMC + backward simulation for each of the S idiosyncratic filters
// (tempered) and K factor filters (untempered observation density).
class PgKernel {
 public:
  PgKernel(const Model& model, std::size_t n_particles)
      : model_(&model), n_particles_(n_particles) {}

  double move(Theta& theta, State& st, double a, RngStream& rng) const;
  void end_stage(std::size_t, double) {}

 private:
  const Model* model_;
  std::size_t n_particles_;
};

}  // namespace aisil::factor
