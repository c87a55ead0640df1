#include "tfinf/scoped.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tfinf/diffops.hpp"
#include "tfinf/truncdist.hpp"

namespace tfinf {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double median_of(std::vector<double> v) {
  const size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + m, v.end());
  const double hi = v[m];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + m);
  return 0.5 * (lo + hi);
}

// Detector membership test along the contrast line.  A point g belongs to
// the event when the path run on v + g eta / ||eta||^2 reports every
// required dual coordinate; failed runs count as outside.
struct LineDetector {
  const Vec& v;
  const Vec& eta;
  double eta_norm2;
  int r;
  const PathConfig& config;
  const std::vector<int>& required;
  int probes = 0;

  bool operator()(double g) {
    ++probes;
    Vec yg = v + (g / eta_norm2) * eta;
    try {
      DetectionResult d = run_path(yg, r, config);
      for (int want : required) {
        bool got = false;
        for (int td : d.tau_dual)
          if (td == want) got = true;
        if (!got) return false;
      }
      return true;
    } catch (...) {
      return false;
    }
  }
};

// One direction of the line search: the edge of the event component holding
// g_obs, then the near edge of the next component further out.  Expansion
// doubles the step; anything past 2^14 initial steps is treated as no edge,
// which only mistakes mass far in the pivot tail.
struct RaySearch {
  double near = 0.0;
  double far = 0.0;
  bool exited = false;
  bool refound = false;
};

RaySearch search_direction(LineDetector& det, double g_obs, double step0,
                           int dir) {
  RaySearch out;
  double in_pt = g_obs, out_pt = g_obs, step = step0;
  for (int it = 0; it < 14; ++it) {
    out_pt = in_pt + dir * step;
    if (!det(out_pt)) {
      out.exited = true;
      break;
    }
    in_pt = out_pt;
    step *= 2.0;
  }
  if (!out.exited) return out;
  for (int it = 0; it < 46; ++it) {
    const double mid = 0.5 * (in_pt + out_pt);
    (det(mid) ? in_pt : out_pt) = mid;
  }
  out.near = 0.5 * (in_pt + out_pt);

  double back = out_pt, fwd = out_pt;
  step = step0;
  for (int it = 0; it < 14; ++it) {
    fwd = back + dir * step;
    if (det(fwd)) {
      out.refound = true;
      break;
    }
    back = fwd;
    step *= 2.0;
  }
  if (!out.refound) return out;
  for (int it = 0; it < 46; ++it) {
    const double mid = 0.5 * (back + fwd);
    (det(mid) ? fwd : back) = mid;
  }
  out.far = 0.5 * (back + fwd);
  return out;
}

struct MeasuredEvent {
  TruncationSet raw;  // g = eta^T y units
  double gap_lo = 0.0, gap_hi = 0.0;  // contact-side gap edges, g units
  bool whole = false;
  int probes = 0;
};

MeasuredEvent measure_event(const Vec& y, const Vec& eta, int r,
                            const PathConfig& config,
                            const std::vector<int>& required,
                            int contact_sign, double step0) {
  const double eta_norm2 = eta.squaredNorm();
  const double g_obs = eta.dot(y);
  const Vec v = y - (g_obs / eta_norm2) * eta;
  LineDetector det{v, eta, eta_norm2, r, config, required};

  const RaySearch down = search_direction(det, g_obs, step0, -1);
  const RaySearch up = search_direction(det, g_obs, step0, +1);

  MeasuredEvent ev;
  const double comp_lo = down.exited ? down.near : -kInf;
  const double comp_hi = up.exited ? up.near : kInf;
  const double slip = 1e-12 * (1.0 + std::abs(g_obs));
  if (down.refound && down.far < comp_lo - slip) ev.raw.add(-kInf, down.far);
  ev.raw.add(comp_lo, comp_hi);
  if (up.refound && up.far > comp_hi + slip) ev.raw.add(up.far, kInf);
  ev.whole = !down.exited && !up.exited;

  if (contact_sign >= 0) {
    if (down.exited) {
      ev.gap_hi = comp_lo;
      ev.gap_lo = down.refound ? down.far : -kInf;
    }
  } else {
    if (up.exited) {
      ev.gap_lo = comp_hi;
      ev.gap_hi = up.refound ? up.far : kInf;
    }
  }
  ev.probes = det.probes;
  return ev;
}

InferenceResult scoped_infer(const DetectionResult& det, int j, const Vec& y,
                             const InferenceConfig& cfg, ScopedBounds* bounds,
                             bool local) {
  const int J = static_cast<int>(det.tau_dual.size());
  if (j < 0 || j >= J) throw std::invalid_argument("unknown change point index");
  const PathRecord& rec = det.record;
  const DifferenceOperator& D = rec.D;
  const int n = D.n, r = D.r;
  const int tau0 = det.tau_dual[j] - 1;

  InferenceResult res;
  res.method = local ? MethodTag::Local : MethodTag::Global;
  res.vmode = cfg.vmode;
  res.kind = ContrastKind::Spike;
  res.j = j;
  res.tau_dual = det.tau_dual[j];
  res.tau_primal = det.tau_primal[j];
  res.sign = det.sign[j];

  const Vec eta = D.row(tau0);
  const double eta_norm = D.row_norm();
  res.estimate = eta.dot(y);

  std::vector<int> required;
  int win_lo = 0, win_hi = n - r, delta = det.tau_dual[j];
  if (local) {
    if (j > 0) {
      win_lo = det.tau_dual[j - 1];
      required.push_back(det.tau_dual[j - 1]);
    }
    required.push_back(det.tau_dual[j]);
    if (j + 1 < J) {
      win_hi = det.tau_dual[j + 1];
      required.push_back(det.tau_dual[j + 1]);
    }
    delta = det.tau_dual[j] - win_lo;
    const int len = win_hi - win_lo;
    if (len - 2 <= 0 || delta < 1 || delta > len - r - 1)
      throw std::invalid_argument("segment too short for local inference");
  } else {
    required.push_back(det.tau_dual[j]);
  }

  double sigma_for_scale = cfg.sigma;
  double sigma_hat2 = 0.0;
  int dof = 0;
  if (cfg.vmode == VarianceMode::Pooled) {
    if (local) {
      const int len = win_hi - win_lo;
      const Vec y_win = y.segment(win_lo, len);
      const BlockProjection split = BlockProjection::build({delta}, len, r);
      dof = len - 2;
      sigma_hat2 = split.residual(y_win).squaredNorm() / dof;
    } else {
      const BlockProjection split =
          BlockProjection::build({det.tau_primal[j]}, n, r);
      dof = n - 2;
      sigma_hat2 = split.residual(y).squaredNorm() / dof;
    }
    sigma_for_scale = std::sqrt(sigma_hat2);
  } else if (cfg.vmode == VarianceMode::Mad) {
    res.warnings.push_back("scale estimate treated as known sigma");
  }

  const double scale = sigma_for_scale * eta_norm;
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");
  res.scale = scale;
  res.dof = dof;
  res.statistic = res.estimate / scale;

  const MeasuredEvent ev =
      measure_event(y, eta, r, rec.config, required, res.sign, scale);

  TruncationSet set;
  for (const auto& iv : ev.raw.intervals) set.add(iv.lo / scale, iv.hi / scale);
  res.set = set;
  if (ev.whole)
    res.warnings.push_back(
        "conditioning event spans the whole contrast line; no truncation applied");

  bool clamped = false;
  const double cdf = dof > 0 ? tt_cdf(res.statistic, 0.0, dof, set, &clamped)
                             : tn_cdf(res.statistic, 0.0, set, &clamped);
  res.p_two = two_sided_pvalue(cdf);
  res.p_one = one_sided_pvalue(cdf, res.sign);
  res.clamped = clamped;
  if (clamped)
    res.warnings.push_back("statistic clamped to the truncation boundary");

  const CiBounds ci = confidence_interval(res.statistic, dof, set, scale,
                                          cfg.alpha, cfg.one_sided ? res.sign : 0);
  res.ci_lo = ci.lo;
  res.ci_hi = ci.hi;
  if (ci.lo_diverged || ci.hi_diverged)
    res.warnings.push_back(
        "confidence bound did not converge; truncation end left unbounded");

  if (bounds) {
    bounds->set = set;
    bounds->v_minus = ev.gap_lo / scale;
    bounds->v_plus = ev.gap_hi / scale;
    const PathState& fin = rec.state_after(det.steps);
    bounds->lambda = 0.0;
    for (const auto& blk : fin.blocks)
      if (blk.tau == tau0) bounds->lambda = blk.lambda_join;
    const Vec u = dual_at(rec, bounds->lambda);
    bounds->u_rest = Vec(u.size() - 1);
    for (int i = 0, k = 0; i < u.size(); ++i)
      if (i != tau0) bounds->u_rest[k++] = u[i];
    bounds->dof = dof;
    bounds->scale = scale;
    bounds->sigma_hat2 = sigma_hat2;
    bounds->probes = ev.probes;
  }
  return res;
}

}  // namespace

double mad_sigma(const Vec& y, int r) {
  const int n = static_cast<int>(y.size());
  if (n < r + 3)
    throw std::invalid_argument("mad_sigma needs at least r + 3 observations");
  const DifferenceOperator D = DifferenceOperator::build(n, r);
  const Vec d = D.apply(y);
  std::vector<double> w(d.data(), d.data() + d.size());
  const double med = median_of(w);
  for (double& x : w) x = std::abs(x - med);
  return median_of(std::move(w)) * 1.4826 / D.row_norm();
}

InferenceResult global_inference(const DetectionResult& det, int j,
                                 const Vec& y, const InferenceConfig& cfg,
                                 ScopedBounds* bounds) {
  return scoped_infer(det, j, y, cfg, bounds, false);
}

InferenceResult local_inference(const DetectionResult& det, int j,
                                const Vec& y, const InferenceConfig& cfg,
                                ScopedBounds* bounds) {
  return scoped_infer(det, j, y, cfg, bounds, true);
}

LengthBound ci_length_upper_bound(const ScopedBounds& b, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must be in (0, 1)");
  const double gap = b.v_plus - b.v_minus;
  LengthBound out;
  if (b.dof == 0) {
    out.bound = b.scale * (2.0 * normal_quantile(1.0 - 0.5 * alpha) + gap);
    out.condition = true;
    return out;
  }
  if (b.dof < 3)
    throw std::invalid_argument("length bound needs at least 3 degrees of freedom");
  out.bound = b.scale * (2.0 * t_quantile(1.0 - 0.5 * alpha, b.dof) + gap);
  const double x = 0.5 * gap;
  const double lhs = std::log(alpha) + log_t_sf(x, b.dof);
  const double rhs = log_t_sf(x - t_quantile(0.5 * alpha, b.dof), b.dof);
  out.condition = lhs >= rhs;
  return out;
}

}  // namespace tfinf
