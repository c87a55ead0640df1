#pragma once

#include <Eigen/Dense>
#include <vector>

namespace tfinf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Discrete difference operator of order r+1 on a length-n grid.
// D has m = n - r - 1 rows; row i carries the same stencil at columns
// i .. i+r+1 (0-based), so only the stencil is stored.  The stencil is
// built by repeated first differencing: (-1,1) convolved r times.
struct DifferenceOperator {
  int n = 0;
  int r = 0;
  int m = 0;
  std::vector<double> stencil;  // length r + 2

  static DifferenceOperator build(int n, int r);

  double row_norm() const;             // l2 norm of any row
  Vec apply(const Vec& y) const;       // D y, length m
  Vec apply_transpose(const Vec& u) const;  // D^T u, length n
  Vec row(int i) const;                // dense row i, length n
  Mat dense() const;                   // full m x n matrix (small-problem use)
};

// A sorted subset of rows of D.  The detectors work with the rows outside
// the active set, so everything downstream (Gram solves, polyhedra) is
// phrased against this view.
struct DiffRows {
  const DifferenceOperator* op = nullptr;
  std::vector<int> rows;  // ascending, 0-based row indices into op

  int count() const { return static_cast<int>(rows.size()); }
  Vec apply(const Vec& y) const;            // D_rows y
  Vec apply_transpose(const Vec& u) const;  // D_rows^T u
  Mat dense() const;
};

// Cholesky factorization of the banded SPD Gram matrix G = S S^T where S is
// a row subset of D.  After dropping rows the surviving Gram is still banded
// with at most r+1 superdiagonals in compacted indexing, so the factor is
// stored packed: f(d, j) = L(j + d, j) for d = 0..band.
class BandedCholesky {
 public:
  static BandedCholesky factor_gram(const DiffRows& S);

  Vec solve(const Vec& rhs) const;      // G^{-1} rhs
  double inverse_diagonal(int k) const; // (G^{-1})_{kk}
  int size() const { return size_; }

 private:
  int size_ = 0;
  int band_ = 0;
  Mat f_;
};

Vec gram_solve(const DiffRows& S, const Vec& rhs);  // (S S^T)^{-1} rhs
Vec gram_apply(const DiffRows& S, const Vec& y);    // (S S^T)^{-1} S y

// Polynomial regression design on one segment (lo, hi] of a 1-based index
// range, using the scaled grid t_i = i / n.  Q spans the fitted subspace;
// segments too short for a degree-r fit fall back to the identity
// projection (Q left empty, identity flag set).
struct SegmentDesign {
  int lo = 0;  // exclusive
  int hi = 0;  // inclusive
  bool identity = false;
  Mat X;  // (hi - lo) x (r + 1) raw design
  Mat Q;  // orthonormal basis of col(X)

  static SegmentDesign build(int lo, int hi, int n, int r);
};

// Block-diagonal projection onto per-segment polynomial fits.  Change points
// are 1-based primal positions; segment j covers (p_j, p_{j+1}] with
// sentinels p_0 = 0, p_{J+1} = n.
struct BlockProjection {
  int n = 0;
  int rank = 0;
  std::vector<SegmentDesign> segs;

  static BlockProjection build(const std::vector<int>& changepoints, int n, int r);

  Vec apply(const Vec& v) const;     // P v
  Vec residual(const Vec& v) const;  // (I - P) v
};

}  // namespace tfinf
