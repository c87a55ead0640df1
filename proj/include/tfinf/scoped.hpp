#pragma once

#include "tfinf/dualpath.hpp"
#include "tfinf/inference.hpp"

namespace tfinf {

// Conditioning summary for the spike statistic at one detected change point.
// The truncation set is measured along the contrast line y(g) = v + g eta /
// ||eta||^2 by re-running the detector, so it is exact for the stated event
// up to bisection tolerance.  v_minus / v_plus are the edges of the gap on
// the side the statistic contacts (statistic units, matching set); both are
// zero when the line never leaves the event.  lambda and u_rest record the
// dual state at the target's joining knot for diagnostics.
struct ScopedBounds {
  TruncationSet set;
  double v_minus = 0.0;
  double v_plus = 0.0;
  double lambda = 0.0;    // knot at which the target row joined the boundary
  Vec u_rest;             // dual at that knot, target coordinate removed
  int dof = 0;            // 0 for the normal pivot
  double scale = 0.0;     // sigma ||eta|| or sigma_hat ||eta||
  double sigma_hat2 = 0.0;  // pooled split estimate when computed
  int probes = 0;         // detector re-runs spent locating the event
};

// Robust sigma from the (r+1)-th differences of y: MAD about the median,
// scaled by 1.4826 for normal consistency and divided by the stencil norm
// (sqrt(2) for r = 0).  Needs n >= r + 3.
double mad_sigma(const Vec& y, int r);

// Inference for the spike contrast at the j-th detected change point,
// conditioning on tau_hat_j being among the detected locations (global) or
// on the triple {tau_hat_{j-1}, tau_hat_j, tau_hat_{j+1}} with end sentinels
// skipped (local).  Variance modes: Known uses cfg.sigma; Mad treats
// cfg.sigma as a plug-in estimate; Pooled estimates sigma^2 from the
// two-segment split at the target, over the whole signal (d = n - 2) for
// global and within the window (tau_hat_{j-1}, tau_hat_{j+1}] for local
// (d = window length - 2), switching to the t pivot.
InferenceResult global_inference(const DetectionResult& det, int j,
                                 const Vec& y, const InferenceConfig& cfg,
                                 ScopedBounds* bounds = nullptr);
InferenceResult local_inference(const DetectionResult& det, int j,
                                const Vec& y, const InferenceConfig& cfg,
                                ScopedBounds* bounds = nullptr);

// Closed-form cap on the two-sided CI length at level alpha, on the eta^T f
// scale.  Normal pivot: always valid.  t pivot: needs dof >= 3 and holds
// when the reported tail condition is true.
struct LengthBound {
  double bound = 0.0;
  bool condition = false;
};

LengthBound ci_length_upper_bound(const ScopedBounds& b, double alpha);

}  // namespace tfinf
