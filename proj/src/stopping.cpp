#include "tfinf/stopping.hpp"

#include <cmath>
#include <stdexcept>

namespace tfinf {

double stopping_series(double x, double S_r2) {
  const double t = x / std::sqrt(S_r2);
  if (t < 0.75) {
    // theta-transformed form; the direct alternating series needs ~1/t^2
    // terms here while this one converges immediately
    const double pi = 3.14159265358979323846;
    double cdf = 0.0;
    for (int k = 1; k <= 10000; k += 2) {
      const double term = std::exp(-k * k * pi * pi / (8.0 * t * t));
      cdf += term;
      if (term < 1e-14) break;
    }
    cdf *= std::sqrt(2.0 * pi) / t;
    return 0.5 * (1.0 - cdf);
  }
  const double q = 2.0 * t * t;
  double sum = 0.0;
  for (int i = 1; i <= 10000; ++i) {
    const double term = std::exp(-q * static_cast<double>(i) * i);
    sum += (i % 2 == 1) ? term : -term;
    if (term < 1e-14) break;
  }
  return sum;
}

double threshold_x_alpha(double S_r2, double alpha) {
  if (!(S_r2 > 0.0)) throw std::invalid_argument("S_r2 must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  const double target = alpha / 2.0;
  // series is strictly decreasing in x from 1/2 at x=0+ toward 0
  double lo = 1e-8;
  double hi = 10.0 * std::sqrt(S_r2);
  int guard = 0;
  while (stopping_series(hi, S_r2) > target) {
    hi *= 2.0;
    if (++guard > 60) throw std::runtime_error("stopping threshold bracket failed");
  }
  guard = 0;
  while (stopping_series(lo, S_r2) < target) {
    lo *= 0.5;
    if (++guard > 60) throw std::runtime_error("stopping threshold bracket failed");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (stopping_series(mid, S_r2) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

StopCheck stopping_check(int r, const Vec& a, const BandedCholesky& chol,
                         double sigma, double alpha) {
  StopCheck out;
  out.k = static_cast<int>(a.size());
  if (out.k <= r) {
    out.fired = true;
    out.vacuous = true;
    return out;
  }
  out.S_r2 = chol.inverse_diagonal(out.k - 1);
  out.x_alpha = threshold_x_alpha(out.S_r2, alpha);
  out.threshold = sigma * out.x_alpha * std::pow(static_cast<double>(out.k - r), (2.0 * r + 1.0) / 2.0);
  out.stat = out.k > 0 ? a.cwiseAbs().maxCoeff() : 0.0;
  out.fired = out.stat <= out.threshold;
  return out;
}

}  // namespace tfinf
