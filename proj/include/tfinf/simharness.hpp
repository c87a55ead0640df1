#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tfinf/inference.hpp"

namespace tfinf {

enum class SignalFamily { Constant, Linear };
const char* signal_family_name(SignalFamily family);

// One simulation scenario: block signal on n points with change points at
// tau_true (1-based), noise sigma, and a studied change point target_tau.
// The constant family jumps 0 / delta / 0 / ...; the linear family starts at
// 0.5 delta with per-index slope +delta and flips the slope sign at each
// change point (value-continuous).  Detection order r follows the family.
struct SimConfig {
  SignalFamily family = SignalFamily::Constant;
  double delta = 2.0;
  int n = 500;
  std::vector<int> tau_true = {100, 200, 300, 400};
  double sigma = 1.0;
  int reps = 2000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int window_h = 15;   // window contrast half-width, also the linear hit radius
  int target_tau = 200;
  int threads = 0;     // 0: TFINF_THREADS env var, then hardware count

  int order() const { return family == SignalFamily::Linear ? 1 : 0; }
};

int resolve_threads(int requested);

Vec generate_signal(const SimConfig& config);
// f plus Gaussian noise from an independent per-repetition substream, so
// results do not depend on how repetitions are split across threads
Vec simulate_draw(const SimConfig& config, const Vec& f, int rep);

struct MethodSpec {
  MethodTag method = MethodTag::Poly;
  VarianceMode vmode = VarianceMode::Known;
};

// Aggregates over the repetitions of one (scenario, method) cell.  detected
// counts correct detections of target_tau (exact dual hit for the constant
// family, within window_h for linear); covered / rejected / length refer to
// those repetitions.  whole_line counts truncation sets with both ends
// infinite; infer_failures counts correct detections whose inference threw
// (excluded from the other tallies).
struct SimCell {
  SignalFamily family = SignalFamily::Constant;
  double delta = 0.0;
  MethodSpec spec;
  int reps = 0;
  int detected = 0;
  int covered = 0;
  int rejected = 0;
  int infinite_ci = 0;
  int whole_line = 0;
  int infer_failures = 0;
  double ci_length_sum = 0.0;  // over finite intervals
  bool undefined_power = false;

  double power() const;
  double coverage() const;
  double mean_ci_length() const;
};

SimCell run_cell(const SimConfig& config, const MethodSpec& spec);

std::vector<SimCell> power_curve(const SimConfig& base,
                                 const std::vector<double>& deltas,
                                 const MethodSpec& spec);
std::vector<SimCell> coverage_study(const SimConfig& base,
                                    const std::vector<double>& deltas,
                                    const std::vector<MethodSpec>& specs);

// Survival pivots of the first detected change point at the true contrast
// value, paired with their untruncated counterparts on the same draws; both
// lists come back sorted.  Known variance gives the normal pivot, Pooled the
// t pivot.
struct QqData {
  std::vector<double> truncated;
  std::vector<double> untruncated;
  int used = 0;  // repetitions with a nonempty detection
};

QqData pivot_qq(const SimConfig& config, VarianceMode vmode);

// plain CSV with a header line; numeric formatting is fixed so identical
// inputs serialize identically
std::string power_csv(const std::vector<SimCell>& cells);
std::string coverage_csv(const std::vector<SimCell>& cells);
std::string qq_csv(const QqData& qq);

}  // namespace tfinf
