#pragma once

#include <iosfwd>
#include <vector>

#include "tfinf/dualpath.hpp"

namespace tfinf {

enum class RowTag { FirstStep, Join, LeaveSign, LeaveCompare, JoinVsLeave, Stopping };
const char* row_tag_name(RowTag tag);

struct PolyRow {
  Vec coeff;
  double q = 0.0;
  RowTag tag = RowTag::FirstStep;
};

struct Membership {
  bool inside = false;
  double min_slack = 0.0;
  int worst_row = -1;  // -1 when there are no rows
};

// Affine representation {y : A y >= q} of one recorded detection run.
// Path rows all have q = 0; only stopping-rule rows carry offsets.
struct Polyhedron {
  int n = 0;
  std::vector<PolyRow> rows;

  Mat matrix() const;
  Vec offsets() const;
  int count(RowTag tag) const;
  Membership contains(const Vec& y, double tol_scale = 1e-8) const;

  // header "n,rowcount" then one line per row: tag, q, coefficients
  void write_csv(std::ostream& os) const;
  static Polyhedron read_csv(std::istream& is);
};

// Walks the recorded events and re-derives every decision as affine rows:
// argmax pairs for the first knot; sign, ratio-comparison, leave-viability,
// leave-comparison and join-vs-leave rows for each later event; threshold
// rows for every stopping-rule check the run performed.  Throws logic_error
// if a replayed decision disagrees with the record.
Polyhedron build_polyhedron(const PathRecord& rec);

}  // namespace tfinf
