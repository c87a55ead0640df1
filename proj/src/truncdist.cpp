#include "tfinf/truncdist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tfinf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kLogHalf = -0.69314718055994530942;

// scaled complementary error function erfcx(t) = exp(t^2) erfc(t) for large t,
// by the classical continued fraction (Lentz)
double erfcx_cf(double t) {
  // sqrt(pi) erfcx(t) = 1/(t + (1/2)/(t + 1/(t + (3/2)/(t + ...))))
  const double tiny = 1e-300;
  double f = tiny, C = f, D = 0.0;
  for (int j = 1; j <= 200; ++j) {
    const double a = j == 1 ? 1.0 : 0.5 * (j - 1);
    D = t + a * D;
    if (D == 0.0) D = tiny;
    C = t + a / C;
    if (C == 0.0) C = tiny;
    D = 1.0 / D;
    const double delta = C * D;
    f *= delta;
    if (j > 1 && std::abs(delta - 1.0) < 1e-17) break;
  }
  return f / std::sqrt(M_PI);
}

// log of the regularized incomplete beta I_z(a, b) via Lentz's continued
// fraction in the directly convergent regime, complemented otherwise
double betacf(double a, double b, double z) {
  const double tiny = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * z / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * z / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * z / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h;
}

double log_beta_inc(double a, double b, double z) {
  if (z <= 0.0) return -kInf;
  if (z >= 1.0) return 0.0;
  // inclusive threshold: z > t implies 1-z < (b+1)/(a+b+2), so the
  // complement call takes the direct branch and the recursion terminates
  if (z <= (a + 1.0) / (a + b + 2.0)) {
    const double log_front = a * std::log(z) + b * std::log1p(-z) -
                             (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
    return log_front + std::log(betacf(a, b, z) / a);
  }
  const double log_comp = log_beta_inc(b, a, 1.0 - z);
  return std::log1p(-std::exp(log_comp));
}

double logdiff(double la, double lb) {
  // log(exp(la) - exp(lb)) for la >= lb
  if (lb >= la) return -kInf;
  return la + std::log1p(-std::exp(lb - la));
}

double fam_log_sf(double x, bool is_t, int d) {
  return is_t ? log_t_sf(x, d) : log_normal_sf(x);
}

double fam_sf(double x, bool is_t, int d) { return is_t ? t_sf(x, d) : normal_sf(x); }

// log-mass of (a, b) for the standardized family; *tail_gap reports the
// log-scale separation used in the subtraction (precision sentinel)
double interval_log_mass(double a, double b, bool is_t, int d, double* tail_gap) {
  *tail_gap = kInf;
  if (a >= b) return -kInf;
  if (a == -kInf && b == kInf) return 0.0;
  if (a == -kInf) return fam_log_sf(-b, is_t, d);
  if (b == kInf) return fam_log_sf(a, is_t, d);
  if (a >= 0.0) {
    const double la = fam_log_sf(a, is_t, d), lb = fam_log_sf(b, is_t, d);
    *tail_gap = la - lb;
    return logdiff(la, lb);
  }
  if (b <= 0.0) {
    const double la = fam_log_sf(-b, is_t, d), lb = fam_log_sf(-a, is_t, d);
    *tail_gap = la - lb;
    return logdiff(la, lb);
  }
  // straddles the center: ordinary arithmetic is well conditioned
  return std::log1p(-(fam_sf(b, is_t, d) + fam_sf(-a, is_t, d)));
}

double logsumexp(const std::vector<double>& v) {
  double mx = -kInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == -kInf) return -kInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

double trunc_cdf(double x, double mu, bool is_t, int d, const TruncationSet& set,
                 bool* clamped) {
  if (set.empty()) throw std::invalid_argument("empty truncation set");
  double z = x;
  bool cl = false;
  if (!set.contains(z)) {
    z = set.clamp(z);
    cl = true;
  }
  if (clamped) *clamped = cl;

  std::vector<double> masses(set.intervals.size());
  std::vector<double> gaps(set.intervals.size());
  for (size_t i = 0; i < set.intervals.size(); ++i)
    masses[i] = interval_log_mass(set.intervals[i].lo - mu, set.intervals[i].hi - mu,
                                  is_t, d, &gaps[i]);
  const double logden = logsumexp(masses);
  if (!std::isfinite(logden))
    throw std::runtime_error("truncation set mass below working precision");
  size_t dominant = 0;
  for (size_t i = 1; i < masses.size(); ++i)
    if (masses[i] > masses[dominant]) dominant = i;
  if (gaps[dominant] < 1e-13)
    throw std::runtime_error("truncation set mass below working precision");

  std::vector<double> below;
  double gap;
  for (size_t i = 0; i < set.intervals.size(); ++i) {
    const auto& iv = set.intervals[i];
    if (iv.hi <= z) {
      below.push_back(masses[i]);
    } else if (iv.lo < z) {
      below.push_back(interval_log_mass(iv.lo - mu, z - mu, is_t, d, &gap));
    }
  }
  const double lognum = logsumexp(below);
  if (lognum == -kInf) return 0.0;
  return std::min(1.0, std::exp(lognum - logden));
}

double invert_mean(double obs, bool is_t, int d, const TruncationSet& set, double target) {
  if (!(target > 0.0 && target < 1.0))
    throw std::invalid_argument("inversion target must lie in (0,1)");
  auto cdf = [&](double mu) { return trunc_cdf(obs, mu, is_t, d, set, nullptr); };
  // the cdf at the observed value decreases as the mean grows
  double lo = obs - 1.0, hi = obs + 1.0, step = 1.0;
  while (cdf(lo) < target) {
    lo -= step;
    step *= 2.0;
    if (std::abs(lo) > 1e6) throw std::runtime_error("mean inversion bracket diverged");
  }
  step = 1.0;
  while (cdf(hi) > target) {
    hi += step;
    step *= 2.0;
    if (std::abs(hi) > 1e6) throw std::runtime_error("mean inversion bracket diverged");
  }
  int guard = 0;
  while (hi - lo > 1e-8 && ++guard < 500) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TruncationSet TruncationSet::whole() {
  TruncationSet s;
  s.add(-kInf, kInf);
  return s;
}

TruncationSet TruncationSet::interval(double lo, double hi) {
  TruncationSet s;
  s.add(lo, hi);
  return s;
}

TruncationSet TruncationSet::two_ray(double left, double right) {
  TruncationSet s;
  s.add(-kInf, left);
  s.add(right, kInf);
  return s;
}

void TruncationSet::add(double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("interval ends out of order");
  if (!intervals.empty() && !(intervals.back().hi < lo))
    throw std::invalid_argument("intervals must be disjoint and ordered");
  intervals.push_back({lo, hi});
}

bool TruncationSet::contains(double x) const {
  for (const auto& iv : intervals)
    if (iv.lo <= x && x <= iv.hi) return true;
  return false;
}

double TruncationSet::clamp(double x) const {
  double best = 0.0, dist = kInf;
  for (const auto& iv : intervals) {
    for (double end : {iv.lo, iv.hi}) {
      if (!std::isfinite(end)) continue;
      if (std::abs(x - end) < dist) {
        dist = std::abs(x - end);
        best = end;
      }
    }
  }
  if (dist == kInf) throw std::invalid_argument("cannot clamp to an unbounded set");
  return best;
}

double log_normal_sf(double x) {
  if (x <= 8.0) return std::log(0.5 * std::erfc(x / kSqrt2));
  return std::log(0.5 * erfcx_cf(x / kSqrt2)) - 0.5 * x * x;
}

double normal_sf(double x) {
  if (x < -8.0) return 1.0 - std::exp(log_normal_sf(-x));
  return 0.5 * std::erfc(x / kSqrt2);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile needs p in (0,1)");
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (1.0 - normal_sf(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double log_t_sf(double x, int d) {
  if (d < 1) throw std::invalid_argument("degrees of freedom must be >= 1");
  if (x < 0.0) return std::log1p(-std::exp(log_t_sf(-x, d)));
  const double z = d / (d + x * x);
  return kLogHalf + log_beta_inc(0.5 * d, 0.5, z);
}

double t_sf(double x, int d) {
  if (x < 0.0) return 1.0 - t_sf(-x, d);
  return std::exp(log_t_sf(x, d));
}

double t_quantile(double p, int d) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile needs p in (0,1)");
  double lo = -2.0, hi = 2.0;
  while (1.0 - t_sf(lo, d) > p) lo *= 2.0;
  while (1.0 - t_sf(hi, d) < p) hi *= 2.0;
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (1.0 - t_sf(mid, d) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double tn_cdf(double z, double mu, const TruncationSet& set, bool* clamped) {
  return trunc_cdf(z, mu, false, 0, set, clamped);
}

double tt_cdf(double t, double mu, int d, const TruncationSet& set, bool* clamped) {
  if (d < 1) throw std::invalid_argument("degrees of freedom must be >= 1");
  return trunc_cdf(t, mu, true, d, set, clamped);
}

double invert_mean_tn(double z_obs, const TruncationSet& set, double target) {
  return invert_mean(z_obs, false, 0, set, target);
}

double invert_mean_tt(double t_obs, int d, const TruncationSet& set, double target) {
  return invert_mean(t_obs, true, d, set, target);
}

}  // namespace tfinf
