#pragma once

#include <vector>

namespace tfinf {

struct Interval {
  double lo;
  double hi;
};

// Ordered union of disjoint intervals; ends may be infinite.
struct TruncationSet {
  std::vector<Interval> intervals;

  static TruncationSet whole();
  static TruncationSet interval(double lo, double hi);
  // (-inf, left] U [right, inf)
  static TruncationSet two_ray(double left, double right);

  void add(double lo, double hi);  // must stay ordered and disjoint
  bool empty() const { return intervals.empty(); }
  bool contains(double x) const;
  double clamp(double x) const;  // nearest endpoint for out-of-set x
};

// log of the standard normal upper tail, continued-fraction branch past 8
double log_normal_sf(double x);
double normal_sf(double x);
double normal_quantile(double p);

// log upper tail of the standard t with d degrees of freedom
double log_t_sf(double x, int d);
double t_sf(double x, int d);
double t_quantile(double p, int d);

// P(X <= z | X in set) for X ~ N(mu, 1).  Out-of-set z is clamped to the
// nearest endpoint; *clamped reports it when non-null.  Throws when the set
// mass is below working precision even in log space.
double tn_cdf(double z, double mu, const TruncationSet& set, bool* clamped = nullptr);

// same under a standard t with d degrees of freedom shifted by mu
double tt_cdf(double t, double mu, int d, const TruncationSet& set, bool* clamped = nullptr);

// Unique mu with tn_cdf(z_obs, mu, set) = target; the cdf is strictly
// decreasing in mu.  Bracketed bisection to 1e-8; throws if the bracket
// passes 1e6 (boundary-adjacent z_obs).
double invert_mean_tn(double z_obs, const TruncationSet& set, double target);
double invert_mean_tt(double t_obs, int d, const TruncationSet& set, double target);

}  // namespace tfinf
