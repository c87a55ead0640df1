#include "tfinf/diffops.hpp"

#include <cmath>
#include <stdexcept>

namespace tfinf {

namespace {
constexpr double kConditionGuard = 1e12;
}

DifferenceOperator DifferenceOperator::build(int n, int r) {
  if (r < 0) throw std::invalid_argument("difference order must be nonnegative");
  if (n < r + 2) throw std::invalid_argument("need n >= r + 2 grid points");
  DifferenceOperator D;
  D.n = n;
  D.r = r;
  D.m = n - r - 1;
  D.stencil = {-1.0, 1.0};
  for (int k = 0; k < r; ++k) {
    std::vector<double> next(D.stencil.size() + 1, 0.0);
    // row i of the composed operator is row i+1 minus row i of the previous
    // one; with Toeplitz rows that is a shift-and-subtract of the stencil
    for (size_t j = 0; j < next.size(); ++j) {
      double v = 0.0;
      if (j > 0) v += D.stencil[j - 1];
      if (j < D.stencil.size()) v -= D.stencil[j];
      next[j] = v;
    }
    D.stencil = std::move(next);
  }
  return D;
}

double DifferenceOperator::row_norm() const {
  double s = 0.0;
  for (double v : stencil) s += v * v;
  return std::sqrt(s);
}

Vec DifferenceOperator::apply(const Vec& y) const {
  Vec out(m);
  const int w = r + 2;
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < w; ++j) s += stencil[j] * y[i + j];
    out[i] = s;
  }
  return out;
}

Vec DifferenceOperator::apply_transpose(const Vec& u) const {
  Vec out = Vec::Zero(n);
  const int w = r + 2;
  for (int i = 0; i < m; ++i) {
    const double ui = u[i];
    for (int j = 0; j < w; ++j) out[i + j] += stencil[j] * ui;
  }
  return out;
}

Vec DifferenceOperator::row(int i) const {
  Vec out = Vec::Zero(n);
  for (int j = 0; j < r + 2; ++j) out[i + j] = stencil[j];
  return out;
}

Mat DifferenceOperator::dense() const {
  Mat D = Mat::Zero(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < r + 2; ++j) D(i, i + j) = stencil[j];
  return D;
}

Vec DiffRows::apply(const Vec& y) const {
  const int w = op->r + 2;
  Vec out(count());
  for (int a = 0; a < count(); ++a) {
    double s = 0.0;
    for (int j = 0; j < w; ++j) s += op->stencil[j] * y[rows[a] + j];
    out[a] = s;
  }
  return out;
}

Vec DiffRows::apply_transpose(const Vec& u) const {
  const int w = op->r + 2;
  Vec out = Vec::Zero(op->n);
  for (int a = 0; a < count(); ++a) {
    const double ua = u[a];
    for (int j = 0; j < w; ++j) out[rows[a] + j] += op->stencil[j] * ua;
  }
  return out;
}

Mat DiffRows::dense() const {
  Mat D = Mat::Zero(count(), op->n);
  for (int a = 0; a < count(); ++a)
    for (int j = 0; j < op->r + 2; ++j) D(a, rows[a] + j) = op->stencil[j];
  return D;
}

BandedCholesky BandedCholesky::factor_gram(const DiffRows& S) {
  const auto& op = *S.op;
  const int k = S.count();
  const int band = op.r + 1;

  // stencil autocorrelation: Gram entries depend only on the row offset
  std::vector<double> corr(band + 1, 0.0);
  for (int d = 0; d <= band; ++d)
    for (size_t j = 0; j + d < op.stencil.size(); ++j)
      corr[d] += op.stencil[j + d] * op.stencil[j];

  BandedCholesky C;
  C.size_ = k;
  C.band_ = band;
  C.f_ = Mat::Zero(band + 1, std::max(k, 1));

  auto gram = [&](int a, int b) {  // a >= b
    const int delta = S.rows[a] - S.rows[b];
    return delta <= band ? corr[delta] : 0.0;
  };

  double dmin = 0.0, dmax = 0.0;
  for (int j = 0; j < k; ++j) {
    for (int d = 0; d <= band; ++d) {
      const int i = j + d;
      if (i >= k) break;
      double s = gram(i, j);
      const int l0 = std::max(0, i - band);
      for (int l = l0; l < j; ++l) s -= C.f_(i - l, l) * C.f_(j - l, l);
      if (d == 0) {
        if (s <= 0.0) throw std::runtime_error("gram matrix not positive definite");
        const double diag = std::sqrt(s);
        if (j == 0) {
          dmin = dmax = diag;
        } else {
          dmin = std::min(dmin, diag);
          dmax = std::max(dmax, diag);
        }
        C.f_(0, j) = diag;
      } else {
        C.f_(d, j) = s / C.f_(0, j);
      }
    }
  }
  if (k > 0 && (dmax / dmin) * (dmax / dmin) > kConditionGuard)
    throw std::runtime_error("gram matrix ill conditioned");
  return C;
}

Vec BandedCholesky::solve(const Vec& rhs) const {
  Vec z(size_);
  for (int i = 0; i < size_; ++i) {
    double s = rhs[i];
    const int l0 = std::max(0, i - band_);
    for (int l = l0; l < i; ++l) s -= f_(i - l, l) * z[l];
    z[i] = s / f_(0, i);
  }
  Vec x(size_);
  for (int i = size_ - 1; i >= 0; --i) {
    double s = z[i];
    const int j1 = std::min(size_ - 1, i + band_);
    for (int j = i + 1; j <= j1; ++j) s -= f_(j - i, i) * x[j];
    x[i] = s / f_(0, i);
  }
  return x;
}

double BandedCholesky::inverse_diagonal(int k) const {
  // (G^{-1})_{kk} = || L^{-1} e_k ||^2; forward substitution from index k
  Vec w = Vec::Zero(size_);
  for (int i = k; i < size_; ++i) {
    double s = (i == k) ? 1.0 : 0.0;
    const int l0 = std::max(k, i - band_);
    for (int l = l0; l < i; ++l) s -= f_(i - l, l) * w[l];
    w[i] = s / f_(0, i);
  }
  double out = 0.0;
  for (int i = k; i < size_; ++i) out += w[i] * w[i];
  return out;
}

Vec gram_solve(const DiffRows& S, const Vec& rhs) {
  return BandedCholesky::factor_gram(S).solve(rhs);
}

Vec gram_apply(const DiffRows& S, const Vec& y) {
  return BandedCholesky::factor_gram(S).solve(S.apply(y));
}

SegmentDesign SegmentDesign::build(int lo, int hi, int n, int r) {
  if (!(0 <= lo && lo < hi && hi <= n)) throw std::invalid_argument("bad segment bounds");
  SegmentDesign seg;
  seg.lo = lo;
  seg.hi = hi;
  const int len = hi - lo;
  seg.X = Mat(len, r + 1);
  for (int i = 0; i < len; ++i) {
    const double t = static_cast<double>(lo + 1 + i) / n;
    double p = 1.0;
    for (int c = 0; c <= r; ++c) {
      seg.X(i, c) = p;
      p *= t;
    }
  }
  if (len <= r + 1) {
    // saturated fit: the projection is the identity on this segment
    seg.identity = true;
    return seg;
  }
  Eigen::ColPivHouseholderQR<Mat> qr(seg.X);
  const int rank = static_cast<int>(qr.rank());
  seg.Q = qr.householderQ() * Mat::Identity(len, rank);
  return seg;
}

BlockProjection BlockProjection::build(const std::vector<int>& changepoints, int n, int r) {
  BlockProjection P;
  P.n = n;
  int prev = 0;
  auto push = [&](int lo, int hi) {
    auto seg = SegmentDesign::build(lo, hi, n, r);
    P.rank += seg.identity ? (hi - lo) : static_cast<int>(seg.Q.cols());
    P.segs.push_back(std::move(seg));
  };
  for (int cp : changepoints) {
    if (cp <= prev || cp >= n) throw std::invalid_argument("change points must be ascending interior positions");
    push(prev, cp);
    prev = cp;
  }
  push(prev, n);
  return P;
}

Vec BlockProjection::apply(const Vec& v) const {
  Vec out(n);
  for (const auto& seg : segs) {
    const int len = seg.hi - seg.lo;
    if (seg.identity) {
      out.segment(seg.lo, len) = v.segment(seg.lo, len);
    } else {
      out.segment(seg.lo, len) = seg.Q * (seg.Q.transpose() * v.segment(seg.lo, len));
    }
  }
  return out;
}

Vec BlockProjection::residual(const Vec& v) const {
  return v - apply(v);
}

}  // namespace tfinf
