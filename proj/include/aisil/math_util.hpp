#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "aisil/rng.hpp"

namespace aisil {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

inline double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// In-place: log-weights -> normalized weights summing to 1.  Returns the
// log of the normalizing sum.
inline double normalize_log_weights(std::span<double> logw) {
  const double lse = log_sum_exp(logw);
  if (!std::isfinite(lse)) return lse;
  for (double& x : logw) x = std::exp(x - lse);
  return lse;
}

inline double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + d * d / var);
}

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z * 0.7071067811865475244008443621048);
}

// Wichura's AS 241 (PPND16): inverse of the standard normal CDF,
// accurate to ~1e-16 across the full support.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("normal_quantile: p outside (0,1)");
  const double q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

// Exact truncated-normal draw by inverse CDF.  The interval is reflected so
// the bulk of the probability mass is computed from the lower tail, which
// keeps the draw stable when the truncation region sits deep in one tail.
inline double truncated_normal(double mean, double sd, double lo, double hi,
                               RngStream& rng) {
  if (!(lo < hi)) throw std::invalid_argument("truncated_normal: lo >= hi");
  double a = (lo - mean) / sd;
  double b = (hi - mean) / sd;
  bool flipped = false;
  if (a > 0.0 && b > 0.0) {
    std::swap(a, b);
    a = -a;
    b = -b;
    flipped = true;
  }
  const double Fa = normal_cdf(a);
  const double Fb = normal_cdf(b);
  const double u = rng.uniform_pos();
  double p = Fa + u * (Fb - Fa);
  p = std::clamp(p, std::numeric_limits<double>::min(),
                 1.0 - std::numeric_limits<double>::epsilon());
  double z = normal_quantile(p);
  if (flipped) z = -z;
  return std::clamp(mean + sd * z, lo, hi);
}

inline double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_variance(std::span<const double> v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace aisil
