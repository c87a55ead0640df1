#include "tfinf/polyhedron.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "tfinf/stopping.hpp"

namespace tfinf {

namespace {

constexpr double kDenominatorFloor = 1e-12;

// rows of (S S^T)^{-1} S as a dense k x n matrix
Mat pseudo_rows(const DiffRows& S, const BandedCholesky& chol) {
  Mat Sd = S.dense();
  Mat M(S.count(), S.op->n);
  for (int c = 0; c < S.op->n; ++c) M.col(c) = chol.solve(Sd.col(c));
  return M;
}

void append_first_step_rows(Polyhedron& poly, const PathRecord& rec) {
  const PathState& st = rec.initial;
  InteriorSystem sys = interior_system(rec.D, st.interior, {}, {}, rec.y);
  Mat M = pseudo_rows(sys.S, sys.chol);
  const PathEvent& ev = rec.events.front();
  const Vec win = ev.sign * M.row(ev.coord).transpose();
  for (int i = 0; i < rec.D.m; ++i) {
    if (i == ev.coord) continue;
    poly.rows.push_back({win - M.row(i).transpose(), 0.0, RowTag::FirstStep});
    poly.rows.push_back({win + M.row(i).transpose(), 0.0, RowTag::FirstStep});
  }
}

void append_event_rows(Polyhedron& poly, const PathRecord& rec, int e) {
  const PathState& st = rec.state_after(e);
  const PathEvent& ev = rec.events[e];
  const double lambda_prev = rec.events[e - 1].lambda;

  InteriorSystem sys =
      interior_system(rec.D, st.interior, st.boundary, st.boundary_sign, rec.y);
  Mat M = pseudo_rows(sys.S, sys.chol);
  const int k = sys.S.count();

  std::vector<int> sig(k);
  for (int i = 0; i < k; ++i) sig[i] = sys.a[i] >= 0.0 ? +1 : -1;

  for (int i = 0; i < k; ++i)
    poly.rows.push_back({sig[i] * M.row(i).transpose(), 0.0, RowTag::Join});

  auto join = next_join_candidate(sys, lambda_prev, rec.snap);
  LeaveSystem ls = leave_system(rec.D, st, sys, rec.y);
  auto leave = next_leave_candidate(ls, lambda_prev, rec.snap);

  if (ev.kind == EventKind::Join) {
    if (!join || join->coord != ev.coord || join->sign != ev.sign)
      throw std::logic_error("polyhedron replay disagrees with recorded join");
  } else {
    if (!leave || leave->coord != ev.coord)
      throw std::logic_error("polyhedron replay disagrees with recorded leave");
  }

  // ratio comparisons identifying the best join, numerators kept linear in y
  // and denominators constant and positive by construction
  Vec join_num;
  double join_den = 0.0;
  if (join) {
    int pos = -1;
    for (int i = 0; i < k; ++i)
      if (st.interior[i] == join->coord) pos = i;
    join_den = join->sign * (join->sign + sys.b[pos]);
    join_num = join->sign * M.row(pos).transpose();
    for (int i = 0; i < k; ++i) {
      if (st.interior[i] == join->coord) continue;
      const double p = sig[i] * (sig[i] + sys.b[i]);
      const Vec num = sig[i] * M.row(i).transpose();
      if (p >= kDenominatorFloor) {
        poly.rows.push_back({p * join_num - join_den * num, 0.0, RowTag::Join});
      } else if (p <= -kDenominatorFloor) {
        // this coordinate's ratio is nonpositive whenever its sign row
        // holds, so the cleared inequality keeps the winner on top
        poly.rows.push_back({-p * join_num + join_den * num, 0.0, RowTag::Join});
      }
    }
  }

  // leave viability: d is y-free, so only the sign of c needs rows
  const int nb = static_cast<int>(st.boundary.size());
  Mat crow;
  if (nb > 0) {
    DiffRows B{&rec.D, st.boundary};
    Mat Bd = B.dense();
    crow = Bd - (Bd * sys.S.dense().transpose()) * M;
    for (int i = 0; i < nb; ++i) crow.row(i) *= st.boundary_sign[i];
  }
  std::vector<bool> viable(nb, false);
  for (int i = 0; i < nb; ++i) {
    if (!(ls.d[i] <= -kDenominatorFloor)) continue;
    if (ls.c[i] < 0.0) {
      viable[i] = true;
      poly.rows.push_back({-crow.row(i).transpose(), 0.0, RowTag::LeaveSign});
    } else {
      poly.rows.push_back({crow.row(i).transpose(), 0.0, RowTag::LeaveSign});
    }
  }

  Vec leave_num;
  double leave_den = 0.0;
  if (leave) {
    int pos = -1;
    for (int i = 0; i < nb; ++i)
      if (st.boundary[i] == leave->coord) pos = i;
    leave_den = -ls.d[pos];
    leave_num = -crow.row(pos).transpose();
    for (int i = 0; i < nb; ++i) {
      if (i == pos || !viable[i]) continue;
      poly.rows.push_back(
          {-ls.d[i] * leave_num - leave_den * (-crow.row(i).transpose()), 0.0,
           RowTag::LeaveCompare});
    }
  }

  if (join && leave) {
    Vec row = leave_den * join_num - join_den * leave_num;
    if (ev.kind == EventKind::Leave) row = -row;
    poly.rows.push_back({std::move(row), 0.0, RowTag::JoinVsLeave});
  }
}

void append_stopping_rows(Polyhedron& poly, const PathRecord& rec) {
  if (!rec.config.stopping) return;
  const double sigma = rec.config.stopping->sigma;
  const double alpha = rec.config.stopping->alpha;
  const int events = static_cast<int>(rec.events.size());

  const int cap = rec.config.max_steps >= 0 ? rec.config.max_steps
                                            : std::min(rec.D.m, 2 * rec.D.n);
  int last_checked, fired_state = -1;
  switch (rec.reason) {
    case StopReason::StoppingRule:
      fired_state = rec.stop_state;
      last_checked = rec.stop_state;
      break;
    case StopReason::LambdaZero:
      // the state after the last event was tested only if the loop had
      // room to enter one more iteration
      last_checked = events < cap ? events : events - 1;
      break;
    default:  // MaxSteps: the state reached by the cap is never tested
      last_checked = events - 1;
      break;
  }

  const int r = rec.D.r;
  for (int s = 0; s <= last_checked; ++s) {
    const PathState& st = rec.state_after(s);
    InteriorSystem sysA = interior_system(rec.D, st.outside, {}, {}, rec.y);
    StopCheck chk = stopping_check(r, sysA.a, sysA.chol, sigma, alpha);
    if (chk.fired != (s == fired_state))
      throw std::logic_error("polyhedron replay disagrees with recorded stopping decision");
    if (chk.vacuous) continue;  // no data-dependent condition to encode
    Mat M = pseudo_rows(sysA.S, sysA.chol);
    if (s == fired_state) {
      for (int t = 0; t < chk.k; ++t) {
        poly.rows.push_back({M.row(t).transpose(), -chk.threshold, RowTag::Stopping});
        poly.rows.push_back({-M.row(t).transpose(), -chk.threshold, RowTag::Stopping});
      }
    } else {
      // the run continued here, witnessed by its own largest coordinate
      int pos = 0;
      for (int t = 1; t < chk.k; ++t)
        if (std::abs(sysA.a[t]) > std::abs(sysA.a[pos])) pos = t;
      const double s_max = sysA.a[pos] >= 0.0 ? +1.0 : -1.0;
      poly.rows.push_back({s_max * M.row(pos).transpose(), chk.threshold, RowTag::Stopping});
    }
  }
}

}  // namespace

const char* row_tag_name(RowTag tag) {
  switch (tag) {
    case RowTag::FirstStep: return "first-step";
    case RowTag::Join: return "join";
    case RowTag::LeaveSign: return "leave-sign";
    case RowTag::LeaveCompare: return "leave-compare";
    case RowTag::JoinVsLeave: return "join-vs-leave";
    case RowTag::Stopping: return "stopping";
  }
  return "?";
}

Mat Polyhedron::matrix() const {
  Mat A(static_cast<int>(rows.size()), n);
  for (size_t i = 0; i < rows.size(); ++i) A.row(i) = rows[i].coeff.transpose();
  return A;
}

Vec Polyhedron::offsets() const {
  Vec q(static_cast<int>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) q[i] = rows[i].q;
  return q;
}

int Polyhedron::count(RowTag tag) const {
  int c = 0;
  for (const auto& row : rows) c += row.tag == tag;
  return c;
}

Membership Polyhedron::contains(const Vec& y, double tol_scale) const {
  if (static_cast<int>(y.size()) != n)
    throw std::invalid_argument("polyhedron dimension mismatch");
  Membership out;
  out.min_slack = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < rows.size(); ++i) {
    const double slack = rows[i].coeff.dot(y) - rows[i].q;
    if (slack < out.min_slack) {
      out.min_slack = slack;
      out.worst_row = static_cast<int>(i);
    }
  }
  out.inside = out.min_slack >= -tol_scale * y.cwiseAbs().maxCoeff();
  return out;
}

void Polyhedron::write_csv(std::ostream& os) const {
  os << n << "," << rows.size() << "\n";
  os.precision(17);
  for (const auto& row : rows) {
    os << row_tag_name(row.tag) << "," << row.q;
    for (int c = 0; c < n; ++c) os << "," << row.coeff[c];
    os << "\n";
  }
}

Polyhedron Polyhedron::read_csv(std::istream& is) {
  Polyhedron poly;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty polyhedron dump");
  size_t count = 0;
  {
    std::istringstream head(line);
    char comma;
    if (!(head >> poly.n >> comma >> count))
      throw std::runtime_error("bad polyhedron header");
  }
  for (size_t i = 0; i < count; ++i) {
    if (!std::getline(is, line)) throw std::runtime_error("truncated polyhedron dump");
    std::istringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    PolyRow row;
    bool known = false;
    for (RowTag tag : {RowTag::FirstStep, RowTag::Join, RowTag::LeaveSign,
                       RowTag::LeaveCompare, RowTag::JoinVsLeave, RowTag::Stopping})
      if (field == row_tag_name(tag)) {
        row.tag = tag;
        known = true;
      }
    if (!known) throw std::runtime_error("unknown row tag: " + field);
    std::getline(ss, field, ',');
    row.q = std::stod(field);
    row.coeff = Vec(poly.n);
    for (int c = 0; c < poly.n; ++c) {
      if (!std::getline(ss, field, ',')) throw std::runtime_error("short polyhedron row");
      row.coeff[c] = std::stod(field);
    }
    poly.rows.push_back(std::move(row));
  }
  return poly;
}

Polyhedron build_polyhedron(const PathRecord& rec) {
  Polyhedron poly;
  poly.n = rec.D.n;
  if (!rec.events.empty()) {
    append_first_step_rows(poly, rec);
    for (int e = 1; e < static_cast<int>(rec.events.size()); ++e)
      append_event_rows(poly, rec, e);
  }
  append_stopping_rows(poly, rec);
  return poly;
}

}  // namespace tfinf
