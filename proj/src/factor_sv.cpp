#include "aisil/factor_sv.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "aisil/math_util.hpp"

namespace aisil::factor {

namespace {

// Draw from N(mean, P^{-1}) given the precision matrix P, via LLT with a
// small jitter on the diagonal.
Eigen::VectorXd precision_normal(const Eigen::MatrixXd& precision,
                                 const Eigen::VectorXd& linear,
                                 RngStream& rng) {
  const Eigen::Index d = precision.rows();
  Eigen::MatrixXd p = precision;
  p.diagonal().array() += 1e-10;
  Eigen::LLT<Eigen::MatrixXd> llt(p);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("precision_normal: Cholesky failed");
  const Eigen::VectorXd mean = llt.solve(linear);
  Eigen::VectorXd z(d);
  for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
  return mean + llt.matrixU().solve(z);
}

sv::Theta factor_theta(const sv::Theta& fac) {
  return {0.0, fac.phi, fac.tau2};
}

}  // namespace

Model::Model(const std::vector<std::vector<double>>& returns,
             std::size_t n_factors, sv::Prior prior, double loading_prior_var)
    : n_factors_(n_factors),
      T_(returns.size()),
      prior_(prior),
      loading_prior_var_(loading_prior_var) {
  if (T_ < 2) throw std::invalid_argument("factor::Model: series needs T >= 2");
  const std::size_t S = returns.front().size();
  if (S == 0) throw std::invalid_argument("factor::Model: no series");
  if (n_factors_ > S)
    throw std::invalid_argument("factor::Model: more factors than series");
  for (const auto& row : returns)
    if (row.size() != S)
      throw std::invalid_argument("factor::Model: ragged return matrix");
  y_.assign(S, std::vector<double>(T_));
  for (std::size_t t = 0; t < T_; ++t)
    for (std::size_t s = 0; s < S; ++s) y_[s][t] = returns[t][s];
}

double Model::prior_logdensity(const Theta& th) const {
  const std::size_t S = series_count(), K = n_factors_;
  if (th.idio.size() != S || th.fac.size() != K || th.beta.size() != S)
    return kNegInf;
  double lp = 0.0;
  for (std::size_t s = 0; s < S; ++s)
    lp += sv::prior_logdensity(th.idio[s], prior_);
  for (std::size_t k = 0; k < K; ++k)
    lp += sv::phi_prior_logdensity(th.fac[k].phi, prior_) +
          sv::tau2_prior_logdensity(th.fac[k].tau2, prior_);
  for (std::size_t s = 0; s < S; ++s) {
    const std::size_t z = free_loadings(s, K);
    for (std::size_t k = 0; k < z; ++k)
      lp += normal_logpdf(th.beta[s][k], 0.0, loading_prior_var_);
  }
  return lp;
}

double Model::state_prior_logdensity(const Theta& th, const State& st) const {
  const std::size_t S = series_count(), K = n_factors_;
  double lp = 0.0;
  for (std::size_t s = 0; s < S; ++s)
    lp += sv::state_logdensity(th.idio[s], st.h[s]);
  for (std::size_t k = 0; k < K; ++k) {
    lp += sv::state_logdensity(factor_theta(th.fac[k]), st.lambda[k]);
    for (std::size_t t = 0; t < T_; ++t)
      lp += normal_logpdf(st.f[k][t], 0.0, std::exp(st.lambda[k][t]));
  }
  return lp;
}

double Model::loglik(const Theta& th, const State& st) const {
  const std::size_t S = series_count(), K = n_factors_;
  double ll = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t t = 0; t < T_; ++t) {
      double mean = 0.0;
      for (std::size_t k = 0; k < K; ++k) mean += th.beta[s][k] * st.f[k][t];
      ll += normal_logpdf(y_[s][t], mean, std::exp(st.h[s][t]));
    }
  }
  return ll;
}

Model::Theta Model::prior_sample(RngStream& rng) const {
  const std::size_t S = series_count(), K = n_factors_;
  Theta th;
  th.idio.resize(S);
  th.fac.resize(K);
  th.beta.assign(S, std::vector<double>(K, 0.0));
  for (std::size_t s = 0; s < S; ++s) th.idio[s] = sv::prior_sample(prior_, rng);
  for (std::size_t k = 0; k < K; ++k) {
    th.fac[k] = sv::prior_sample(prior_, rng);
    th.fac[k].mu = 0.0;
  }
  const double sd = std::sqrt(loading_prior_var_);
  for (std::size_t s = 0; s < S; ++s) {
    const std::size_t z = free_loadings(s, K);
    for (std::size_t k = 0; k < z; ++k) th.beta[s][k] = sd * rng.normal();
  }
  return th;
}

Model::State Model::state_prior_sample(const Theta& th, RngStream& rng) const {
  const std::size_t S = series_count(), K = n_factors_;
  State st;
  st.h.resize(S);
  st.lambda.resize(K);
  st.f.assign(K, std::vector<double>(T_));
  for (std::size_t s = 0; s < S; ++s)
    st.h[s] = sv::state_sample(th.idio[s], T_, rng);
  for (std::size_t k = 0; k < K; ++k) {
    st.lambda[k] = sv::state_sample(factor_theta(th.fac[k]), T_, rng);
    for (std::size_t t = 0; t < T_; ++t)
      st.f[k][t] = rng.normal(0.0, std::exp(0.5 * st.lambda[k][t]));
  }
  return st;
}

std::vector<double> Model::residual_series(std::size_t s, const Theta& th,
                                           const State& st) const {
  std::vector<double> r = y_[s];
  for (std::size_t k = 0; k < n_factors_; ++k) {
    const double b = th.beta[s][k];
    if (b == 0.0) continue;
    for (std::size_t t = 0; t < T_; ++t) r[t] -= b * st.f[k][t];
  }
  return r;
}

double tempered_logdensity(const Model& model, const Theta& th,
                           const State& st, double a) {
  const double lp = model.prior_logdensity(th);
  if (lp == kNegInf) return kNegInf;
  return a * model.loglik(th, st) + model.state_prior_logdensity(th, st) + lp;
}

std::vector<double> idio_gradient(const Model& model, std::size_t s,
                                  const Theta& th, const State& st, double a) {
  return sv::latent_gradient(th.idio[s], st.h[s],
                             model.residual_series(s, th, st), a);
}

std::vector<double> factor_vol_gradient(const Theta& th, const State& st,
                                        std::size_t k, double a) {
  sv::Theta fk = th.fac[k];
  fk.mu = 0.0;
  return sv::latent_gradient(fk, st.lambda[k], st.f[k], a);
}

std::vector<double> sample_beta_row(std::size_t z, const State& st,
                                    const std::vector<double>& y_s,
                                    std::size_t s_row_h, double a,
                                    double loading_prior_var, RngStream& rng) {
  const std::size_t T = y_s.size();
  const auto zi = static_cast<Eigen::Index>(z);
  Eigen::MatrixXd precision =
      Eigen::MatrixXd::Identity(zi, zi) / loading_prior_var;
  Eigen::VectorXd linear = Eigen::VectorXd::Zero(zi);
  for (std::size_t t = 0; t < T; ++t) {
    const double w = a * std::exp(-st.h[s_row_h][t]);
    Eigen::VectorXd ft(zi);
    for (std::size_t k = 0; k < z; ++k) ft[static_cast<Eigen::Index>(k)] = st.f[k][t];
    precision.noalias() += w * ft * ft.transpose();
    linear.noalias() += w * y_s[t] * ft;
  }
  const Eigen::VectorXd draw = precision_normal(precision, linear, rng);
  return {draw.data(), draw.data() + z};
}

std::vector<double> sample_factors_at(const Theta& th, const State& st,
                                      std::size_t t,
                                      const std::vector<std::vector<double>>& y,
                                      double a, RngStream& rng) {
  const std::size_t S = y.size();
  const std::size_t K = th.fac.size();
  const auto ki = static_cast<Eigen::Index>(K);
  Eigen::MatrixXd precision = Eigen::MatrixXd::Zero(ki, ki);
  Eigen::VectorXd linear = Eigen::VectorXd::Zero(ki);
  for (std::size_t k = 0; k < K; ++k)
    precision(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) =
        std::exp(-st.lambda[k][t]);
  for (std::size_t s = 0; s < S; ++s) {
    const double w = a * std::exp(-st.h[s][t]);
    Eigen::VectorXd bs(ki);
    for (std::size_t k = 0; k < K; ++k)
      bs[static_cast<Eigen::Index>(k)] = th.beta[s][k];
    precision.noalias() += w * bs * bs.transpose();
    linear.noalias() += w * y[s][t] * bs;
  }
  const Eigen::VectorXd draw = precision_normal(precision, linear, rng);
  return {draw.data(), draw.data() + K};
}

namespace {

// Shared opening of both move kernels: parameter conditionals for every
// volatility series, then the loading rows, then the factors.
double update_parameters(const Model& model, Theta& th, State& st, double a,
                         RngStream& rng, std::size_t& phi_accepts,
                         std::size_t& phi_draws) {
  const std::size_t S = model.series_count(), K = model.factor_count();
  const sv::Prior& prior = model.prior();

  for (std::size_t s = 0; s < S; ++s) {
    sv::Theta& p = th.idio[s];
    p.mu = sv::sample_mu(st.h[s], p, prior, rng);
    const sv::PhiDraw pd =
        sv::sample_phi(st.h[s], p.mu, p.tau2, p.phi, prior, rng);
    p.phi = pd.phi;
    phi_accepts += pd.accepted ? 1 : 0;
    ++phi_draws;
    p.tau2 = sv::sample_tau2(st.h[s], p.mu, p.phi, prior, rng);
  }
  for (std::size_t k = 0; k < K; ++k) {
    sv::Theta& p = th.fac[k];
    const sv::PhiDraw pd =
        sv::sample_phi(st.lambda[k], 0.0, p.tau2, p.phi, prior, rng);
    p.phi = pd.phi;
    phi_accepts += pd.accepted ? 1 : 0;
    ++phi_draws;
    p.tau2 = sv::sample_tau2(st.lambda[k], 0.0, p.phi, prior, rng);
  }

  if (K > 0) {
    for (std::size_t s = 0; s < S; ++s) {
      const std::size_t z = free_loadings(s, K);
      const std::vector<double> row = sample_beta_row(
          z, st, model.series(s), s, a, model.loading_prior_var(), rng);
      for (std::size_t k = 0; k < z; ++k) th.beta[s][k] = row[k];
    }
    std::vector<std::vector<double>> y_rows(S);
    for (std::size_t s = 0; s < S; ++s) y_rows[s] = model.series(s);
    for (std::size_t t = 0; t < model.length(); ++t) {
      const std::vector<double> ft =
          sample_factors_at(th, st, t, y_rows, a, rng);
      for (std::size_t k = 0; k < K; ++k) st.f[k][t] = ft[k];
    }
  }
  return 0.0;
}

}  // namespace

double HmcKernel::move(Theta& theta, State& st, double a,
                       RngStream& rng) const {
  std::size_t phi_accepts = 0, phi_draws = 0;
  update_parameters(*model_, theta, st, a, rng, phi_accepts, phi_draws);

  const std::size_t S = model_->series_count(), K = model_->factor_count();
  const std::size_t T = model_->length();
  std::size_t hmc_accepts = 0;
  for (std::size_t s = 0; s < S; ++s) {
    const std::vector<double> resid = model_->residual_series(s, theta, st);
    const sv::LatentTarget target(resid, theta.idio[s], a);
    const std::vector<double> mass =
        sv_mass_diagonal(theta.idio[s].phi, theta.idio[s].tau2, a, T);
    if (hmc_step(target, st.h[s], mass, cfg_, rng)) ++hmc_accepts;
  }
  for (std::size_t k = 0; k < K; ++k) {
    sv::Theta fk = theta.fac[k];
    fk.mu = 0.0;
    const sv::LatentTarget target(st.f[k], fk, a);
    const std::vector<double> mass = sv_mass_diagonal(fk.phi, fk.tau2, a, T);
    if (hmc_step(target, st.lambda[k], mass, cfg_, rng)) ++hmc_accepts;
  }
  return static_cast<double>(hmc_accepts) / static_cast<double>(S + K);
}

double PgKernel::move(Theta& theta, State& st, double a,
                      RngStream& rng) const {
  std::size_t phi_accepts = 0, phi_draws = 0;
  update_parameters(*model_, theta, st, a, rng, phi_accepts, phi_draws);

  const std::size_t S = model_->series_count(), K = model_->factor_count();
  const std::size_t T = model_->length();
  for (std::size_t s = 0; s < S; ++s) {
    const std::vector<double> resid = model_->residual_series(s, theta, st);
    const sv::FilterAdapter filter(resid, theta.idio[s]);
    Trajectory ref;
    ref.states = st.h[s];
    ref.indices.assign(T, static_cast<int>(n_particles_) - 1);
    const FilterState fs = conditional_smc(filter, n_particles_, a, ref, rng);
    st.h[s] = backward_simulate(fs, filter, rng).states;
  }
  for (std::size_t k = 0; k < K; ++k) {
    sv::Theta fk = theta.fac[k];
    fk.mu = 0.0;
    // The factor density enters the target without a tempering exponent, so
    // the factor-volatility filters run at temperature 1.
    const sv::FilterAdapter filter(st.f[k], fk);
    Trajectory ref;
    ref.states = st.lambda[k];
    ref.indices.assign(T, static_cast<int>(n_particles_) - 1);
    const FilterState fs = conditional_smc(filter, n_particles_, 1.0, ref, rng);
    st.lambda[k] = backward_simulate(fs, filter, rng).states;
  }
  return static_cast<double>(phi_accepts) / static_cast<double>(phi_draws);
}

}  // namespace aisil::factor
