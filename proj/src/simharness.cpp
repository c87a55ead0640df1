#include "tfinf/simharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

#include "tfinf/polyhedron.hpp"
#include "tfinf/scoped.hpp"
#include "tfinf/truncdist.hpp"

namespace tfinf {
namespace {

// fixed-layout normal draws: Box-Muller on the raw engine words, so the
// stream does not depend on the standard library's distribution internals
void fill_gaussian(std::mt19937_64& eng, Vec& out) {
  const double two_pi = 6.283185307179586476925286766559;
  const int n = static_cast<int>(out.size());
  for (int i = 0; i < n; i += 2) {
    const double u1 = (static_cast<double>(eng() >> 11) + 1.0) * 0x1p-53;
    const double u2 = static_cast<double>(eng() >> 11) * 0x1p-53;
    const double rad = std::sqrt(-2.0 * std::log(u1));
    out[i] = rad * std::cos(two_pi * u2);
    if (i + 1 < n) out[i + 1] = rad * std::sin(two_pi * u2);
  }
}

std::mt19937_64 rep_engine(std::uint64_t seed, int rep) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(rep), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

// index of the correctly detected target, or -1
int match_target(const SimConfig& config, const std::vector<int>& tau_dual) {
  int best = -1, best_dist = config.family == SignalFamily::Linear
                                 ? config.window_h + 1
                                 : 1;
  for (size_t k = 0; k < tau_dual.size(); ++k) {
    const int dist = std::abs(tau_dual[k] - config.target_tau);
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<int>(k);
    }
  }
  return best;
}

struct RepOutcome {
  bool detected = false;
  bool infer_failed = false;
  bool covered = false;
  bool rejected = false;
  bool infinite_ci = false;
  bool whole_line = false;
  double ci_length = 0.0;
};

bool set_spans_line(const TruncationSet& set) {
  return set.intervals.size() == 1 &&
         std::isinf(set.intervals[0].lo) && set.intervals[0].lo < 0 &&
         std::isinf(set.intervals[0].hi) && set.intervals[0].hi > 0;
}

RepOutcome evaluate_rep(const SimConfig& config, const MethodSpec& spec,
                        const Vec& f, int rep) {
  RepOutcome out;
  const Vec y = simulate_draw(config, f, rep);
  DetectionResult det;
  try {
    det = run_path(y, config.order(),
                   PathConfig{-1, StoppingConfig{config.sigma, 0.05}, -1});
  } catch (...) {
    return out;
  }
  const int j = match_target(config, det.tau_dual);
  if (j < 0) return out;
  out.detected = true;

  InferenceConfig cfg;
  cfg.vmode = spec.vmode;
  cfg.alpha = config.alpha;
  cfg.sigma = config.sigma;

  try {
    InferenceResult res;
    if (spec.method == MethodTag::Poly) {
      const Polyhedron poly = build_polyhedron(det.record);
      const ContrastKind kind = config.family == SignalFamily::Linear
                                    ? ContrastKind::Window
                                    : ContrastKind::Spike;
      const Contrast ct = build_contrast(det, kind, j,
                                         kind == ContrastKind::Window
                                             ? config.window_h
                                             : -1);
      if (spec.vmode == VarianceMode::Mad) cfg.sigma = mad_sigma(y, config.order());
      res = poly_inference(det, poly, y, ct, cfg);
      const double target = ct.eta.dot(f);
      out.covered = res.ci_lo <= target && target <= res.ci_hi;
      out.rejected = res.p_two < config.alpha;
    } else {
      if (spec.vmode == VarianceMode::Mad) cfg.sigma = mad_sigma(y, config.order());
      res = spec.method == MethodTag::Global
                ? global_inference(det, j, y, cfg)
                : local_inference(det, j, y, cfg);
      const double target = det.record.D.row(det.tau_dual[j] - 1).dot(f);
      out.covered = res.ci_lo <= target && target <= res.ci_hi;
      out.rejected = res.p_two < config.alpha;
    }
    out.whole_line = set_spans_line(res.set);
    if (std::isfinite(res.ci_lo) && std::isfinite(res.ci_hi))
      out.ci_length = res.ci_hi - res.ci_lo;
    else
      out.infinite_ci = true;
  } catch (...) {
    out.infer_failed = true;
  }
  return out;
}

template <typename Fn>
void parallel_reps(int reps, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, reps));
  if (threads == 1) {
    for (int rep = 0; rep < reps; ++rep) fn(rep);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&]() {
      for (int rep = next.fetch_add(1); rep < reps; rep = next.fetch_add(1))
        fn(rep);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

const char* signal_family_name(SignalFamily family) {
  return family == SignalFamily::Linear ? "linear" : "constant";
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("TFINF_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

Vec generate_signal(const SimConfig& config) {
  if (!(config.delta >= 0.0)) throw std::invalid_argument("delta must be nonnegative");
  if (config.n < 2) throw std::invalid_argument("signal too short");
  for (size_t k = 0; k < config.tau_true.size(); ++k) {
    const int tau = config.tau_true[k];
    if (tau < 1 || tau >= config.n)
      throw std::invalid_argument("change point outside the signal");
    if (k > 0 && tau <= config.tau_true[k - 1])
      throw std::invalid_argument("change points must be ascending");
  }
  Vec f(config.n);
  if (config.family == SignalFamily::Constant) {
    int seg = 0;
    size_t next = 0;
    for (int t = 1; t <= config.n; ++t) {
      if (next < config.tau_true.size() &&
          t > config.tau_true[next]) {
        ++seg;
        ++next;
      }
      f[t - 1] = (seg % 2 == 1) ? config.delta : 0.0;
    }
  } else {
    double value = 0.5 * config.delta;  // f_1 of the first rising block
    double slope = config.delta;
    size_t next = 0;
    for (int t = 1; t <= config.n; ++t) {
      if (t > 1) value += slope;
      if (next < config.tau_true.size() && t == config.tau_true[next]) {
        slope = -slope;
        ++next;
      }
      f[t - 1] = value;
    }
  }
  return f;
}

Vec simulate_draw(const SimConfig& config, const Vec& f, int rep) {
  std::mt19937_64 eng = rep_engine(config.seed, rep);
  Vec noise(config.n);
  fill_gaussian(eng, noise);
  return f + config.sigma * noise;
}

double SimCell::power() const {
  return detected > 0 ? rejected / static_cast<double>(detected) : 0.0;
}

double SimCell::coverage() const {
  return detected > 0 ? covered / static_cast<double>(detected) : 0.0;
}

double SimCell::mean_ci_length() const {
  const int finite = detected - infinite_ci;
  return finite > 0 ? ci_length_sum / finite : 0.0;
}

SimCell run_cell(const SimConfig& config, const MethodSpec& spec) {
  if (config.reps < 1) throw std::invalid_argument("reps must be positive");
  const Vec f = generate_signal(config);
  std::vector<RepOutcome> outcomes(config.reps);
  parallel_reps(config.reps, resolve_threads(config.threads), [&](int rep) {
    outcomes[rep] = evaluate_rep(config, spec, f, rep);
  });

  SimCell cell;
  cell.family = config.family;
  cell.delta = config.delta;
  cell.spec = spec;
  cell.reps = config.reps;
  for (const RepOutcome& o : outcomes) {
    if (!o.detected) continue;
    if (o.infer_failed) {
      ++cell.infer_failures;
      continue;
    }
    ++cell.detected;
    if (o.covered) ++cell.covered;
    if (o.rejected) ++cell.rejected;
    if (o.infinite_ci)
      ++cell.infinite_ci;
    else
      cell.ci_length_sum += o.ci_length;
    if (o.whole_line) ++cell.whole_line;
  }
  cell.undefined_power = cell.detected == 0;
  return cell;
}

std::vector<SimCell> power_curve(const SimConfig& base,
                                 const std::vector<double>& deltas,
                                 const MethodSpec& spec) {
  std::vector<SimCell> cells;
  for (double d : deltas) {
    SimConfig config = base;
    config.delta = d;
    cells.push_back(run_cell(config, spec));
  }
  return cells;
}

std::vector<SimCell> coverage_study(const SimConfig& base,
                                    const std::vector<double>& deltas,
                                    const std::vector<MethodSpec>& specs) {
  std::vector<SimCell> cells;
  for (double d : deltas) {
    SimConfig config = base;
    config.delta = d;
    for (const MethodSpec& spec : specs) cells.push_back(run_cell(config, spec));
  }
  return cells;
}

QqData pivot_qq(const SimConfig& config, VarianceMode vmode) {
  if (vmode == VarianceMode::Mad)
    throw std::invalid_argument("pivot study supports known and pooled modes");
  const Vec f = generate_signal(config);
  std::vector<double> trunc(config.reps,
                            std::numeric_limits<double>::quiet_NaN());
  std::vector<double> plain(config.reps,
                            std::numeric_limits<double>::quiet_NaN());
  parallel_reps(config.reps, resolve_threads(config.threads), [&](int rep) {
    const Vec y = simulate_draw(config, f, rep);
    DetectionResult det;
    try {
      det = run_path(y, config.order(),
                     PathConfig{-1, StoppingConfig{config.sigma, 0.05}, -1});
    } catch (...) {
      return;
    }
    if (det.tau_dual.empty()) return;
    InferenceConfig cfg;
    cfg.vmode = vmode;
    cfg.sigma = config.sigma;
    cfg.alpha = config.alpha;
    try {
      const Polyhedron poly = build_polyhedron(det.record);
      const Contrast ct = build_contrast(det, ContrastKind::Spike, 0);
      const InferenceResult res = poly_inference(det, poly, y, ct, cfg);
      const double mu = ct.eta.dot(f) / res.scale;
      if (res.dof > 0) {
        trunc[rep] = 1.0 - tt_cdf(res.statistic, mu, res.dof, res.set);
        plain[rep] = t_sf(res.statistic - mu, res.dof);
      } else {
        trunc[rep] = 1.0 - tn_cdf(res.statistic, mu, res.set);
        plain[rep] = normal_sf(res.statistic - mu);
      }
    } catch (...) {
    }
  });

  QqData qq;
  for (int rep = 0; rep < config.reps; ++rep) {
    if (std::isnan(trunc[rep])) continue;
    qq.truncated.push_back(trunc[rep]);
    qq.untruncated.push_back(plain[rep]);
    ++qq.used;
  }
  std::sort(qq.truncated.begin(), qq.truncated.end());
  std::sort(qq.untruncated.begin(), qq.untruncated.end());
  return qq;
}

namespace {

void append_cell(std::string& out, const SimCell& c, bool coverage_layout) {
  char buf[256];
  if (coverage_layout)
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%s,%s,%d,%d,%d,%.10g,%.10g,%d,%d,%d\n",
                  signal_family_name(c.family), c.delta,
                  method_tag_name(c.spec.method),
                  variance_mode_name(c.spec.vmode), c.reps, c.detected,
                  c.covered, c.coverage(), c.mean_ci_length(), c.infinite_ci,
                  c.whole_line, c.infer_failures);
  else
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%s,%s,%d,%d,%d,%.10g,%d\n",
                  signal_family_name(c.family), c.delta,
                  method_tag_name(c.spec.method),
                  variance_mode_name(c.spec.vmode), c.reps, c.detected,
                  c.rejected, c.power(), c.undefined_power ? 1 : 0);
  out += buf;
}

}  // namespace

std::string power_csv(const std::vector<SimCell>& cells) {
  std::string out =
      "family,delta,method,variance,reps,detected,rejected,power,undefined\n";
  for (const SimCell& c : cells) append_cell(out, c, false);
  return out;
}

std::string coverage_csv(const std::vector<SimCell>& cells) {
  std::string out =
      "family,delta,method,variance,reps,detected,covered,coverage,"
      "mean_ci_length,infinite_ci,whole_line,infer_failures\n";
  for (const SimCell& c : cells) append_cell(out, c, true);
  return out;
}

std::string qq_csv(const QqData& qq) {
  std::string out = "index,uniform_quantile,truncated,untruncated\n";
  char buf[160];
  const int m = static_cast<int>(qq.truncated.size());
  for (int i = 0; i < m; ++i) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g\n", i + 1,
                  (i + 1.0) / (m + 1.0), qq.truncated[i], qq.untruncated[i]);
    out += buf;
  }
  return out;
}

}  // namespace tfinf
