#pragma once

#include "tfinf/diffops.hpp"

namespace tfinf {

// Positive root x of  sum_{i>=1} (-1)^{i+1} exp(-2 i^2 x^2 / S_r2) = alpha/2,
// found by bisection.  With S_r2 = 1 this is the classical Kolmogorov
// statistic quantile (x ~ 1.3581 at alpha = 0.05).
double threshold_x_alpha(double S_r2, double alpha);

// Evaluates the alternating series at x (exposed for the threshold tests).
double stopping_series(double x, double S_r2);

struct StopCheck {
  bool fired = false;
  bool vacuous = false;   // too few interior coordinates for a residual test
  double stat = 0.0;      // max_t |interior dual coefficient a_t|
  double threshold = 0.0; // sigma * x_alpha * (k - r)^{(2r+1)/2}
  double x_alpha = 0.0;
  double S_r2 = 0.0;
  int k = 0;
};

// Termination test at one path state.  `a` is the interior least-squares
// dual (G^{-1} D_int y) and chol the Gram factor over the same rows; the
// threshold scales by the trailing diagonal of the inverse Gram.
StopCheck stopping_check(int r, const Vec& a, const BandedCholesky& chol,
                         double sigma, double alpha);

}  // namespace tfinf
