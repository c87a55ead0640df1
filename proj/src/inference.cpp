#include "tfinf/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tfinf/diffops.hpp"

namespace tfinf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Bounds are functions of y only through v, so a row with no statistic
// component must already hold on the data; anything worse than tolerance
// noise means the polyhedron and the contrast disagree about y.
constexpr double kSlackTol = 1e-8;

// Hairline notches cut by two-ray rows; the event is a single interval and
// these are floating-point artifacts.
constexpr double kSliverWidth = 1e-10;

}  // namespace

const char* contrast_kind_name(ContrastKind kind) {
  switch (kind) {
    case ContrastKind::Spike: return "spike";
    case ContrastKind::Segment: return "segment";
    case ContrastKind::Window: return "window";
    case ContrastKind::Custom: return "custom";
  }
  return "?";
}

const char* method_tag_name(MethodTag tag) {
  switch (tag) {
    case MethodTag::Poly: return "poly";
    case MethodTag::Global: return "global";
    case MethodTag::Local: return "local";
  }
  return "?";
}

const char* variance_mode_name(VarianceMode mode) {
  switch (mode) {
    case VarianceMode::Known: return "known";
    case VarianceMode::Pooled: return "pooled";
    case VarianceMode::Mad: return "mad";
  }
  return "?";
}

Contrast build_contrast(const DetectionResult& det, ContrastKind kind, int j,
                        int h) {
  const int J = static_cast<int>(det.tau_dual.size());
  if (j < 0 || j >= J) throw std::invalid_argument("change-point index out of range");
  const int n = det.record.D.n;

  Contrast ct;
  ct.kind = kind;
  ct.j = j;
  ct.tau_dual = det.tau_dual[j];
  ct.tau_primal = det.tau_primal[j];
  ct.sign = det.sign[j];
  ct.eta = Vec::Zero(n);

  if (kind == ContrastKind::Spike) {
    ct.eta = det.record.D.row(ct.tau_dual - 1);
    return ct;
  }

  // segment and window work on the primal partition with sentinels 0 and n;
  // neighbors are the primal positions of the adjacent detections
  const int tau = ct.tau_primal;
  const int prev = j > 0 ? det.tau_primal[j - 1] : 0;
  const int next = j + 1 < J ? det.tau_primal[j + 1] : n;

  if (kind == ContrastKind::Segment) {
    const int left = tau - prev;
    const int right = next - tau;
    for (int i = prev; i < tau; ++i) ct.eta[i] = -1.0 / left;
    for (int i = tau; i < next; ++i) ct.eta[i] = 1.0 / right;
    return ct;
  }
  if (kind == ContrastKind::Window) {
    if (h < 1) throw std::invalid_argument("window contrast needs a positive half-width");
    if (tau - h < prev || tau + h > next)
      throw std::invalid_argument("window overruns a neighboring change point or the data boundary");
    for (int i = tau - h; i < tau; ++i) ct.eta[i] = -1.0 / h;
    for (int i = tau; i < tau + h; ++i) ct.eta[i] = 1.0 / h;
    return ct;
  }
  throw std::invalid_argument("custom contrasts are assembled by the caller");
}

NuisanceStats nuisance_stats(const Vec& y, const Vec& eta,
                             const std::vector<int>& tau_primal, int r) {
  const int n = static_cast<int>(y.size());
  const int J = static_cast<int>(tau_primal.size());
  NuisanceStats ns;
  ns.d = n - (J + 1);
  if (ns.d < 1) throw std::invalid_argument("no residual degrees of freedom left by the segments");
  ns.eta_norm = eta.norm();
  if (ns.eta_norm == 0.0) throw std::invalid_argument("contrast must be nonzero");

  BlockProjection P = BlockProjection::build(tau_primal, n, r);
  const Vec res = P.residual(y);
  ns.sigma_hat2 = res.squaredNorm() / ns.d;
  ns.sigma_hat = std::sqrt(ns.sigma_hat2);

  const double g = eta.dot(y) / (ns.eta_norm * ns.eta_norm);
  ns.v = y - g * eta;
  ns.w = (res + g * eta).squaredNorm();
  ns.c = ns.sigma_hat > 0.0 ? eta.dot(res) / (ns.sigma_hat * ns.eta_norm) : 0.0;
  ns.eta_in_model = P.residual(eta).norm() <= 1e-8 * ns.eta_norm;
  return ns;
}

ZBounds z_truncation_bounds(const Polyhedron& poly, const Vec& eta,
                            double sigma, const Vec& v) {
  if (poly.rows.empty()) throw std::invalid_argument("polyhedron has no rows");
  if (sigma <= 0.0) throw std::invalid_argument("sigma must be positive");
  const double eta_norm = eta.norm();
  if (eta_norm == 0.0) throw std::invalid_argument("contrast must be nonzero");

  ZBounds zb{-kInf, kInf, kInf};
  for (const PolyRow& row : poly.rows) {
    const double rho = row.coeff.dot(eta) / eta_norm;
    const double av = row.coeff.dot(v);
    if (std::abs(rho) <= 1e-11 * row.coeff.norm()) {
      zb.zero_slack = std::min(zb.zero_slack, av - row.q);
      continue;
    }
    const double bound = (row.q - av) / (sigma * rho);
    if (rho > 0.0)
      zb.lo = std::max(zb.lo, bound);
    else
      zb.hi = std::min(zb.hi, bound);
  }
  if (zb.zero_slack < -kSlackTol * std::max(1.0, std::abs(zb.zero_slack)))
    throw std::runtime_error("inconsistent conditioning: a statistic-free polyhedron row is violated");
  if (zb.lo > zb.hi + kSlackTol * (1.0 + std::abs(zb.lo)))
    throw std::runtime_error("inconsistent conditioning: empty truncation interval");
  if (zb.lo > zb.hi) zb.lo = zb.hi = 0.5 * (zb.lo + zb.hi);
  return zb;
}

Interval t_truncation_bounds(const Polyhedron& poly, const Vec& eta,
                             const NuisanceStats& ns, double t_obs) {
  if (poly.rows.empty()) throw std::invalid_argument("polyhedron has no rows");
  if (ns.d < 1) throw std::invalid_argument("t bounds need at least one degree of freedom");
  if (!(ns.sigma_hat > 0.0)) throw std::runtime_error("degenerate variance: residual is exactly zero");

  struct Span {
    double lo, hi;
  };
  std::vector<Span> feas{{-kInf, kInf}};
  std::vector<Span> next;

  auto keep_interval = [&](double lo, double hi) {
    for (Span& s : feas) {
      s.lo = std::max(s.lo, lo);
      s.hi = std::min(s.hi, hi);
      if (s.lo <= s.hi) next.push_back(s);
    }
    feas.swap(next);
    next.clear();
  };
  auto keep_complement = [&](double r1, double r2) {  // t <= r1 or t >= r2
    for (const Span& s : feas) {
      if (s.lo <= r1) next.push_back({s.lo, std::min(s.hi, r1)});
      if (s.hi >= r2) next.push_back({std::max(s.lo, r2), s.hi});
    }
    feas.swap(next);
    next.clear();
  };

  for (const PolyRow& row : poly.rows) {
    const double a = row.coeff.dot(ns.v) - row.q;
    const double rho = row.coeff.dot(eta) / ns.eta_norm;
    const double b = 2.0 * ns.c * a + ns.w * rho / ns.sigma_hat;
    const double g = a * ns.d;

    if (std::abs(a) < 1e-12) {
      if (std::abs(b) < 1e-12) {
        if (g < -kSlackTol)
          throw std::runtime_error("inconsistent conditioning: a constant polyhedron row is violated");
        continue;
      }
      if (b > 0.0)
        keep_interval(-g / b, kInf);
      else
        keep_interval(-kInf, -g / b);
      continue;
    }

    double disc = b * b - 4.0 * a * g;
    if (a > 0.0) {
      if (disc <= 0.0) continue;  // parabola opens up and never dips below zero
      const double sq = std::sqrt(disc);
      keep_complement((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a));
    } else {
      if (disc < 0.0) {
        // opening-down row with no real roots is violated everywhere; only
        // rounding on a near-active row can produce this
        if (disc < -1e-10 * std::max(b * b, 4.0 * std::abs(a * g)))
          throw std::runtime_error("inconsistent conditioning: a quadratic polyhedron row is infeasible");
        disc = 0.0;
      }
      const double sq = std::sqrt(disc);
      keep_interval((-b + sq) / (2.0 * a), (-b - sq) / (2.0 * a));
    }
    if (feas.empty())
      throw std::runtime_error("inconsistent conditioning: empty truncation interval");
  }

  std::sort(feas.begin(), feas.end(),
            [](const Span& x, const Span& y) { return x.lo < y.lo; });
  std::vector<Span> merged;
  for (const Span& s : feas) {
    if (!merged.empty() && s.lo - merged.back().hi < kSliverWidth)
      merged.back().hi = std::max(merged.back().hi, s.hi);
    else
      merged.push_back(s);
  }

  const Span* best = nullptr;
  double best_slack = -kInf;
  for (const Span& s : merged) {
    const double slack = std::min(t_obs - s.lo, s.hi - t_obs);
    if (slack > best_slack) {
      best_slack = slack;
      best = &s;
    }
  }
  if (best == nullptr || best_slack < -kSlackTol * (1.0 + std::abs(t_obs)))
    throw std::runtime_error("inconsistent conditioning: observed statistic outside every feasible interval");
  return Interval{best->lo, best->hi};
}

double two_sided_pvalue(double null_cdf) {
  const double p = 2.0 * std::min(null_cdf, 1.0 - null_cdf);
  return std::min(1.0, std::max(0.0, p));
}

double one_sided_pvalue(double null_cdf, int direction) {
  const double p = direction >= 0 ? 1.0 - null_cdf : null_cdf;
  return std::min(1.0, std::max(0.0, p));
}

CiBounds confidence_interval(double stat, int dof, const TruncationSet& set,
                             double scale, double alpha, int direction) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");

  auto invert = [&](double target, double fallback, bool* diverged) {
    try {
      const double mu = dof > 0 ? invert_mean_tt(stat, dof, set, target)
                                : invert_mean_tn(stat, set, target);
      return mu * scale;
    } catch (const std::runtime_error&) {
      *diverged = true;
      return fallback;
    }
  };

  CiBounds ci{-kInf, kInf, false, false};
  if (direction == 0) {
    ci.lo = invert(1.0 - alpha / 2.0, -kInf, &ci.lo_diverged);
    ci.hi = invert(alpha / 2.0, kInf, &ci.hi_diverged);
  } else if (direction > 0) {
    ci.lo = invert(1.0 - alpha, -kInf, &ci.lo_diverged);
  } else {
    ci.hi = invert(alpha, kInf, &ci.hi_diverged);
  }
  return ci;
}

InferenceResult poly_inference(const DetectionResult& det,
                               const Polyhedron& poly, const Vec& y,
                               const Contrast& ct, const InferenceConfig& cfg) {
  InferenceResult res;
  res.method = MethodTag::Poly;
  res.vmode = cfg.vmode;
  res.kind = ct.kind;
  res.j = ct.j;
  res.tau_dual = ct.tau_dual;
  res.tau_primal = ct.tau_primal;
  res.sign = ct.sign;

  const int r = det.record.D.r;
  NuisanceStats ns = nuisance_stats(y, ct.eta, det.tau_primal, r);
  res.estimate = ct.eta.dot(y);
  if (res.sign == 0) res.sign = res.estimate >= 0.0 ? 1 : -1;

  if (cfg.vmode == VarianceMode::Pooled) {
    if (!(ns.sigma_hat > 0.0))
      throw std::runtime_error("degenerate variance: residual is exactly zero");
    res.scale = ns.sigma_hat * ns.eta_norm;
    res.statistic = res.estimate / res.scale;
    res.dof = ns.d;
    const Interval iv = t_truncation_bounds(poly, ct.eta, ns, res.statistic);
    res.set = TruncationSet::interval(iv.lo, iv.hi);
    if (!ns.eta_in_model)
      res.warnings.push_back("contrast lies outside the fitted segment span; t truncation is approximate");
  } else {
    res.scale = cfg.sigma * ns.eta_norm;
    res.statistic = res.estimate / res.scale;
    res.dof = 0;
    const ZBounds zb = z_truncation_bounds(poly, ct.eta, cfg.sigma, ns.v);
    res.set = TruncationSet::interval(zb.lo, zb.hi);
    const double slack = std::min(res.statistic - zb.lo, zb.hi - res.statistic);
    if (slack < -kSlackTol * (1.0 + std::abs(res.statistic)))
      throw std::runtime_error("inconsistent conditioning: observed statistic outside the truncation interval");
    if (cfg.vmode == VarianceMode::Mad)
      res.warnings.push_back("scale estimate treated as known sigma");
  }

  bool clamped = false;
  const double cdf = res.dof > 0
                         ? tt_cdf(res.statistic, 0.0, res.dof, res.set, &clamped)
                         : tn_cdf(res.statistic, 0.0, res.set, &clamped);
  res.clamped = clamped;
  if (clamped) res.warnings.push_back("statistic clamped to the truncation boundary");
  res.p_two = two_sided_pvalue(cdf);
  res.p_one = one_sided_pvalue(cdf, res.sign);

  const int direction = cfg.one_sided ? res.sign : 0;
  const CiBounds ci =
      confidence_interval(res.statistic, res.dof, res.set, res.scale, cfg.alpha, direction);
  res.ci_lo = ci.lo;
  res.ci_hi = ci.hi;
  if (ci.lo_diverged || ci.hi_diverged)
    res.warnings.push_back("confidence bound did not converge; truncation end left unbounded");
  return res;
}

}  // namespace tfinf
