#pragma once

#include <optional>
#include <vector>

#include "tfinf/diffops.hpp"

namespace tfinf {

// Reach of one detection around its dual coordinate: a join at tau claims
// the augmented range {tau-r_b .. tau+r_a}.
inline int back_reach(int r) { return (r + 2) / 2 - 1; }  // ceil((r+1)/2) - 1
inline int fwd_reach(int r) { return (r + 1) / 2; }       // floor((r+1)/2)

// One detected change point and the augmented coordinates it claims.  A
// block's base is the coordinate whose boundary hit created it; for r >= 1
// the remaining members of the range reach the boundary through later fill
// events that do not count as new detections.  All indices are 0-based rows
// of D.
struct BoundaryBlock {
  int tau = -1;
  int sign = 0;
  double lambda_join = 0.0;
  std::vector<int> owned;  // augmented coordinates claimed by this block
  std::vector<int> bset;   // owned members <= tau
};

struct PathState {
  std::vector<BoundaryBlock> blocks;  // in join order
  // exact active set: coordinates currently pinned at +-lambda
  std::vector<int> boundary;       // ascending
  std::vector<int> boundary_sign;  // aligned with boundary
  std::vector<int> interior;       // complement of boundary; drives the dynamics
  // augmented set: union of block ranges (superset of boundary)
  std::vector<int> augmented;       // ascending
  std::vector<int> augmented_sign;  // block sign per member
  std::vector<int> outside;         // complement of augmented; stopping-rule rows
};

// Recomputes the derived index vectors from blocks plus the pinned list.
void rebuild_state(PathState& st, int m, const std::vector<std::pair<int, int>>& pinned);

enum class EventKind { Join, Leave };

struct PathEvent {
  int step = 1;  // 1-based knot index along the path
  EventKind kind = EventKind::Join;
  double lambda = 0.0;
  int coord = -1;  // coordinate that hit (join) or left (leave) the boundary
  int sign = 0;    // its boundary sign at the event
  int block_tau = -1;          // base of the block the coordinate belongs to
  bool block_created = false;  // join outside the augmented set: new change point
  bool block_removed = false;  // last pinned member left: change point dropped
  PathState after;
};

enum class StopReason { LambdaZero, MaxSteps, StoppingRule };

struct StoppingConfig {
  double sigma = 1.0;
  double alpha = 0.05;
};

struct PathConfig {
  int max_steps = -1;  // total knots; < 0 means the safety cap min(m, 2n)
  std::optional<StoppingConfig> stopping;
  int primal_offset = -1;  // < 0 means fwd_reach(r)
};

// Least-squares system over a row subset with the rest pinned:
// a = G^{-1} D_rows y and b = G^{-1} D_rows D_pinned^T s_pinned, so the
// unpinned dual moves as a - lambda b.
struct InteriorSystem {
  DiffRows S;
  BandedCholesky chol;
  Vec a;
  Vec b;
  Vec boundary_pull;  // D_pinned^T s_pinned, length n
};

InteriorSystem interior_system(const DifferenceOperator& D, const std::vector<int>& rows,
                               const std::vector<int>& pinned,
                               const std::vector<int>& pinned_sign, const Vec& y);

// Leave test ingredients over the pinned coordinates: the multiplier of a
// pinned coordinate is c_i - lambda d_i, so it can leave at c_i / d_i.
struct LeaveSystem {
  std::vector<int> idx;
  std::vector<int> sign;
  Vec c;
  Vec d;
};

LeaveSystem leave_system(const DifferenceOperator& D, const PathState& st,
                         const InteriorSystem& sys, const Vec& y);

struct JoinCandidate {
  int coord = -1;
  int sign = 0;
  double lambda = 0.0;
};

struct LeaveCandidate {
  int coord = -1;
  int sign = 0;
  double lambda = 0.0;
};

std::optional<JoinCandidate> next_join_candidate(const InteriorSystem& sys, double lambda_prev,
                                                 double snap);
std::optional<LeaveCandidate> next_leave_candidate(const LeaveSystem& ls, double lambda_prev,
                                                   double snap);

struct PathRecord {
  DifferenceOperator D;
  Vec y;
  PathConfig config;
  PathState initial;  // empty boundary, full interior
  std::vector<PathEvent> events;
  StopReason reason = StopReason::LambdaZero;
  double snap = 0.0;  // knot comparison tolerance, 1e-9 * lambda_1
  // stopping-rule outcome, if it fired: index of the state (0 = before any
  // event) plus the fired threshold and statistic
  int stop_state = -1;
  double stop_threshold = 0.0;
  double stop_stat = 0.0;
  double stop_x_alpha = 0.0;
  int stop_k = 0;

  const PathState& state_after(int events_done) const;  // 0 = initial state
};

struct DetectionResult {
  std::vector<int> tau_dual;    // 1-based dual change points, ascending
  std::vector<int> tau_primal;  // 1-based primal positions (dual + offset)
  std::vector<int> sign;        // aligned with tau_dual
  int steps = 0;
  StopReason reason = StopReason::LambdaZero;
  PathRecord record;
};

DetectionResult run_path(const Vec& y, int r, const PathConfig& config = {});

// Dual and primal solutions at any lambda in [0, lambda_1].
Vec dual_at(const PathRecord& rec, double lambda);
Vec fitted_at(const PathRecord& rec, double lambda);

}  // namespace tfinf
