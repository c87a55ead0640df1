#pragma once

#include <string>
#include <vector>

#include "tfinf/dualpath.hpp"
#include "tfinf/polyhedron.hpp"
#include "tfinf/truncdist.hpp"

namespace tfinf {

enum class ContrastKind { Spike, Segment, Window, Custom };
enum class MethodTag { Poly, Global, Local };
enum class VarianceMode { Known, Pooled, Mad };

const char* contrast_kind_name(ContrastKind kind);
const char* method_tag_name(MethodTag tag);
const char* variance_mode_name(VarianceMode mode);

// Linear functional eta^T f tested at one detected change point.  Spike is
// the difference-operator row at the dual location; segment differences the
// averages of the two adjacent segments; window differences h-point averages
// on either side of the primal location.
struct Contrast {
  ContrastKind kind = ContrastKind::Custom;
  int j = -1;         // index into the detection's change-point list
  int tau_dual = 0;   // 1-based
  int tau_primal = 0; // 1-based
  int sign = 0;       // detected sign, drives one-sided direction
  Vec eta;
};

Contrast build_contrast(const DetectionResult& det, ContrastKind kind, int j,
                        int h = -1);

// Statistics held fixed by the conditioning.  v is the component of y
// orthogonal to eta; w is the squared norm of the residual-plus-eta part,
// w = sigma_hat^2 (d + T^2 + 2 c T) at the observed T.
struct NuisanceStats {
  Vec v;                 // (I - P_eta) y
  double w = 0.0;        // ||(I - P + P_eta) y||^2
  double sigma_hat2 = 0.0;
  double sigma_hat = 0.0;
  int d = 0;             // n - (J + 1)
  double c = 0.0;        // eta^T (I - P) y / (sigma_hat ||eta||)
  double eta_norm = 0.0;
  bool eta_in_model = false;  // eta inside the segment-polynomial span
};

NuisanceStats nuisance_stats(const Vec& y, const Vec& eta,
                             const std::vector<int>& tau_primal, int r);

// Truncation interval for Z = eta^T y / (sigma ||eta||): each polyhedron row
// is linear in Z once v is fixed, so the event is an interval.  zero_slack
// is the worst slack among rows with no Z component (+inf when none).
struct ZBounds {
  double lo = 0.0;
  double hi = 0.0;
  double zero_slack = 0.0;
};

ZBounds z_truncation_bounds(const Polyhedron& poly, const Vec& eta,
                            double sigma, const Vec& v);

// Truncation interval for T = eta^T y / (sigma_hat ||eta||): each row becomes
// a quadratic in t after substituting w for the data norm; the connected
// component of the intersection containing t_obs is returned.
Interval t_truncation_bounds(const Polyhedron& poly, const Vec& eta,
                             const NuisanceStats& ns, double t_obs);

double two_sided_pvalue(double null_cdf);
double one_sided_pvalue(double null_cdf, int direction);

struct CiBounds {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_diverged = false;  // inversion ran off the bracket; end left unbounded
  bool hi_diverged = false;
};

// Pivot inversion on the eta^T f scale.  direction 0 gives the two-sided
// interval at levels alpha/2 and 1 - alpha/2; +1 gives [L, inf) at level
// alpha, -1 the mirror.  dof 0 selects the normal pivot.
CiBounds confidence_interval(double stat, int dof, const TruncationSet& set,
                             double scale, double alpha, int direction = 0);

struct InferenceResult {
  MethodTag method = MethodTag::Poly;
  VarianceMode vmode = VarianceMode::Known;
  ContrastKind kind = ContrastKind::Custom;
  int j = -1;
  int tau_dual = 0;
  int tau_primal = 0;
  int sign = 0;
  double statistic = 0.0;  // Z or T
  int dof = 0;             // 0 for the normal statistic
  double scale = 0.0;      // sigma ||eta|| or sigma_hat ||eta||
  double estimate = 0.0;   // eta^T y
  TruncationSet set;
  double p_two = 1.0;
  double p_one = 1.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool clamped = false;
  std::vector<std::string> warnings;
};

struct InferenceConfig {
  VarianceMode vmode = VarianceMode::Known;
  double sigma = 1.0;  // known sigma, or the plug-in estimate for Mad
  double alpha = 0.05;
  bool one_sided = false;
};

InferenceResult poly_inference(const DetectionResult& det,
                               const Polyhedron& poly, const Vec& y,
                               const Contrast& ct, const InferenceConfig& cfg);

}  // namespace tfinf
