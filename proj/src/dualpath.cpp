#include "tfinf/dualpath.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tfinf/stopping.hpp"

namespace tfinf {

namespace {
constexpr double kDenominatorFloor = 1e-12;
}

void rebuild_state(PathState& st, int m, const std::vector<std::pair<int, int>>& pinned) {
  std::vector<int> aug_sign(m, 0);
  for (const auto& blk : st.blocks)
    for (int i : blk.owned) aug_sign[i] = blk.sign;
  std::vector<int> pin_sign(m, 0);
  for (auto& [i, s] : pinned) pin_sign[i] = s;

  st.boundary.clear();
  st.boundary_sign.clear();
  st.interior.clear();
  st.augmented.clear();
  st.augmented_sign.clear();
  st.outside.clear();
  for (int i = 0; i < m; ++i) {
    if (pin_sign[i] != 0) {
      st.boundary.push_back(i);
      st.boundary_sign.push_back(pin_sign[i]);
    } else {
      st.interior.push_back(i);
    }
    if (aug_sign[i] != 0) {
      st.augmented.push_back(i);
      st.augmented_sign.push_back(aug_sign[i]);
    } else {
      st.outside.push_back(i);
    }
  }
}

const PathState& PathRecord::state_after(int events_done) const {
  if (events_done == 0) return initial;
  return events.at(events_done - 1).after;
}

InteriorSystem interior_system(const DifferenceOperator& D, const std::vector<int>& rows,
                               const std::vector<int>& pinned,
                               const std::vector<int>& pinned_sign, const Vec& y) {
  InteriorSystem sys;
  sys.S = DiffRows{&D, rows};
  sys.boundary_pull = Vec::Zero(D.n);
  if (!pinned.empty()) {
    DiffRows P{&D, pinned};
    Vec s(P.count());
    for (int i = 0; i < P.count(); ++i) s[i] = pinned_sign[i];
    sys.boundary_pull = P.apply_transpose(s);
  }
  if (rows.empty()) {
    sys.a = Vec(0);
    sys.b = Vec(0);
    return sys;
  }
  sys.chol = BandedCholesky::factor_gram(sys.S);
  sys.a = sys.chol.solve(sys.S.apply(y));
  if (pinned.empty())
    sys.b = Vec::Zero(sys.S.count());
  else
    sys.b = sys.chol.solve(sys.S.apply(sys.boundary_pull));
  return sys;
}

LeaveSystem leave_system(const DifferenceOperator& D, const PathState& st,
                         const InteriorSystem& sys, const Vec& y) {
  LeaveSystem ls;
  ls.idx = st.boundary;
  ls.sign = st.boundary_sign;
  const int nb = static_cast<int>(ls.idx.size());
  ls.c = Vec(nb);
  ls.d = Vec(nb);
  if (nb == 0) return ls;
  Vec res_c = y;                  // y - D_int^T a
  Vec res_d = sys.boundary_pull;  // D_H^T s_H - D_int^T b
  if (sys.S.count() > 0) {
    res_c -= sys.S.apply_transpose(sys.a);
    res_d -= sys.S.apply_transpose(sys.b);
  }
  DiffRows B{&D, ls.idx};
  Vec bc = B.apply(res_c);
  Vec bd = B.apply(res_d);
  for (int i = 0; i < nb; ++i) {
    ls.c[i] = ls.sign[i] * bc[i];
    ls.d[i] = ls.sign[i] * bd[i];
  }
  return ls;
}

std::optional<JoinCandidate> next_join_candidate(const InteriorSystem& sys, double lambda_prev,
                                                 double snap) {
  std::optional<JoinCandidate> best;
  for (int k = 0; k < sys.S.count(); ++k) {
    for (int s : {+1, -1}) {
      // a genuine join crosses the box boundary from inside, which needs
      // 1 + s*b > 0; a coordinate that just left touches the boundary with
      // the opposite slope and must not be re-pinned at the same lambda
      const double den = s + sys.b[k];
      if (s * den < kDenominatorFloor) continue;
      double v = sys.a[k] / den;
      if (v < snap || v > lambda_prev + snap) continue;
      v = std::min(v, lambda_prev);
      const int coord = sys.S.rows[k];
      if (!best || v > best->lambda + snap ||
          (std::abs(v - best->lambda) <= snap &&
           (coord < best->coord || (coord == best->coord && s > best->sign)))) {
        best = JoinCandidate{coord, s, v};
      }
    }
  }
  return best;
}

std::optional<LeaveCandidate> next_leave_candidate(const LeaveSystem& ls, double lambda_prev,
                                                   double snap) {
  std::optional<LeaveCandidate> best;
  for (int k = 0; k < static_cast<int>(ls.idx.size()); ++k) {
    if (!(ls.c[k] <= 0.0 && ls.d[k] < 0.0)) continue;
    if (std::abs(ls.d[k]) < kDenominatorFloor) continue;
    double v = ls.c[k] / ls.d[k];
    if (v < snap || v > lambda_prev + snap) continue;
    v = std::min(v, lambda_prev);
    if (!best || v > best->lambda + snap ||
        (std::abs(v - best->lambda) <= snap && ls.idx[k] < best->coord)) {
      best = LeaveCandidate{ls.idx[k], ls.sign[k], v};
    }
  }
  return best;
}

namespace {

struct Bookkeeper {
  int m, r;
  std::vector<std::pair<int, int>> pinned;  // (coord, sign), unsorted

  bool is_pinned(int coord) const {
    for (auto& [i, s] : pinned)
      if (i == coord) return true;
    return false;
  }

  // Returns the block index owning `coord`, or -1.
  static int owner(const PathState& st, int coord) {
    for (size_t b = 0; b < st.blocks.size(); ++b) {
      const auto& o = st.blocks[b].owned;
      if (std::find(o.begin(), o.end(), coord) != o.end()) return static_cast<int>(b);
    }
    return -1;
  }

  void join(PathState& st, PathEvent& ev) {
    const int coord = ev.coord;
    pinned.emplace_back(coord, ev.sign);
    int b = owner(st, coord);
    if (b < 0) {
      // new change point: claim the augmented range around the coordinate
      BoundaryBlock blk;
      blk.tau = coord;
      blk.sign = ev.sign;
      blk.lambda_join = ev.lambda;
      const int lo = std::max(0, coord - back_reach(r));
      const int hi = std::min(m - 1, coord + fwd_reach(r));
      std::vector<bool> taken(m, false);
      for (const auto& other : st.blocks)
        for (int i : other.owned) taken[i] = true;
      for (int i = lo; i <= hi; ++i) {
        if (taken[i]) continue;
        blk.owned.push_back(i);
        if (i <= coord) blk.bset.push_back(i);
      }
      st.blocks.push_back(std::move(blk));
      ev.block_created = true;
      ev.block_tau = coord;
    } else {
      ev.block_tau = st.blocks[b].tau;
    }
    rebuild_state(st, m, pinned);
  }

  void leave(PathState& st, PathEvent& ev) {
    const int coord = ev.coord;
    pinned.erase(std::find_if(pinned.begin(), pinned.end(),
                              [&](auto& p) { return p.first == coord; }));
    const int b = owner(st, coord);
    if (b < 0) throw std::logic_error("pinned coordinate belongs to no block");
    ev.block_tau = st.blocks[b].tau;
    bool any_left = false;
    for (int i : st.blocks[b].owned)
      if (is_pinned(i)) any_left = true;
    if (!any_left) {
      // the change point has fully released its boundary contact
      st.blocks.erase(st.blocks.begin() + b);
      ev.block_removed = true;
    }
    rebuild_state(st, m, pinned);
  }
};

}  // namespace

DetectionResult run_path(const Vec& y, int r, const PathConfig& config) {
  const int n = static_cast<int>(y.size());
  if (n < r + 3) throw std::invalid_argument("need at least r + 3 observations");
  DetectionResult out;
  PathRecord& rec = out.record;
  rec.D = DifferenceOperator::build(n, r);
  rec.y = y;
  rec.config = config;
  const int m = rec.D.m;
  const int cap = config.max_steps >= 0 ? config.max_steps : std::min(m, 2 * n);

  Bookkeeper keeper{m, r, {}};
  PathState st;
  rebuild_state(st, m, keeper.pinned);
  rec.initial = st;
  rec.reason = StopReason::LambdaZero;

  double lambda_prev = 0.0;
  bool first = true;
  while (static_cast<int>(rec.events.size()) < cap) {
    if (config.stopping) {
      InteriorSystem sysA = interior_system(rec.D, st.outside, {}, {}, y);
      StopCheck chk = stopping_check(r, sysA.a, sysA.chol, config.stopping->sigma,
                                     config.stopping->alpha);
      if (chk.fired) {
        rec.reason = StopReason::StoppingRule;
        rec.stop_state = static_cast<int>(rec.events.size());
        rec.stop_threshold = chk.threshold;
        rec.stop_stat = chk.stat;
        rec.stop_x_alpha = chk.x_alpha;
        rec.stop_k = chk.k;
        break;
      }
    }

    InteriorSystem sys = interior_system(rec.D, st.interior, st.boundary, st.boundary_sign, y);

    PathEvent ev;
    ev.step = static_cast<int>(rec.events.size()) + 1;
    if (first) {
      // first knot: unconstrained dual, lambda_1 = ||a||_inf
      double lam = 0.0;
      int coord = -1, sign = 0;
      for (int k = 0; k < sys.S.count(); ++k) {
        const double v = std::abs(sys.a[k]);
        if (v > lam) {
          lam = v;
          coord = st.interior[k];
          sign = sys.a[k] > 0 ? +1 : -1;
        }
      }
      if (!(lam > 0.0)) break;  // polynomial input, empty path
      rec.snap = 1e-9 * lam;
      ev.kind = EventKind::Join;
      ev.lambda = lam;
      ev.coord = coord;
      ev.sign = sign;
      keeper.join(st, ev);
      first = false;
    } else {
      auto join = next_join_candidate(sys, lambda_prev, rec.snap);
      LeaveSystem ls = leave_system(rec.D, st, sys, y);
      auto leave = next_leave_candidate(ls, lambda_prev, rec.snap);
      if (!join && !leave) break;  // dual glides to lambda = 0 with no event

      // join wins ties
      const bool take_join = join && (!leave || join->lambda >= leave->lambda - rec.snap);
      if (take_join) {
        ev.kind = EventKind::Join;
        ev.lambda = join->lambda;
        ev.coord = join->coord;
        ev.sign = join->sign;
        keeper.join(st, ev);
      } else {
        ev.kind = EventKind::Leave;
        ev.lambda = leave->lambda;
        ev.coord = leave->coord;
        ev.sign = leave->sign;
        keeper.leave(st, ev);
      }
    }
    ev.after = st;
    lambda_prev = ev.lambda;
    rec.events.push_back(std::move(ev));
  }
  if (static_cast<int>(rec.events.size()) == cap && rec.reason != StopReason::StoppingRule)
    rec.reason = StopReason::MaxSteps;
  out.reason = rec.reason;
  out.steps = static_cast<int>(rec.events.size());

  const int offset = config.primal_offset >= 0 ? config.primal_offset : fwd_reach(r);
  std::vector<std::pair<int, int>> taus;
  for (const auto& blk : st.blocks) taus.emplace_back(blk.tau, blk.sign);
  std::sort(taus.begin(), taus.end());
  for (auto& [tau, sign] : taus) {
    out.tau_dual.push_back(tau + 1);
    out.tau_primal.push_back(tau + 1 + offset);
    out.sign.push_back(sign);
  }
  return out;
}

Vec dual_at(const PathRecord& rec, double lambda) {
  const int m = rec.D.m;
  if (rec.events.empty()) {
    if (lambda != 0.0 && lambda > rec.snap) throw std::out_of_range("lambda above the first knot");
    return interior_system(rec.D, rec.initial.interior, {}, {}, rec.y).a;
  }
  const double lambda1 = rec.events.front().lambda;
  if (lambda < 0.0 || lambda > lambda1 * (1.0 + 1e-12))
    throw std::out_of_range("lambda outside [0, lambda_1]");
  // state governing lambda: after the last event with knot >= lambda
  size_t j = 0;
  while (j + 1 < rec.events.size() && rec.events[j + 1].lambda >= lambda) ++j;
  const PathState& st = rec.events[j].after;
  InteriorSystem sys = interior_system(rec.D, st.interior, st.boundary, st.boundary_sign, rec.y);
  Vec u(m);
  for (size_t i = 0; i < st.boundary.size(); ++i)
    u[st.boundary[i]] = lambda * st.boundary_sign[i];
  for (int k = 0; k < static_cast<int>(st.interior.size()); ++k)
    u[st.interior[k]] = sys.a[k] - lambda * sys.b[k];
  return u;
}

Vec fitted_at(const PathRecord& rec, double lambda) {
  return rec.y - rec.D.apply_transpose(dual_at(rec, lambda));
}

}  // namespace tfinf
