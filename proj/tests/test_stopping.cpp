#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "tfinf/stopping.hpp"

using namespace tfinf;

namespace {

// direct alternating sum in long double; trustworthy once x/sqrt(S) is large
// enough that the terms decay within a few thousand iterations
double series_oracle(double x, double S_r2) {
  const long double t = static_cast<long double>(x) / std::sqrt(static_cast<long double>(S_r2));
  const long double q = 2.0L * t * t;
  long double sum = 0.0L;
  for (int i = 1; i <= 200000; ++i) {
    const long double term = std::exp(-q * static_cast<long double>(i) * i);
    sum += (i % 2 == 1) ? term : -term;
    if (term < 1e-22L) break;
  }
  return static_cast<double>(sum);
}

double brute_quantile(double S_r2, double alpha) {
  long double lo = 1e-6L, hi = 20.0L * std::sqrt(static_cast<long double>(S_r2));
  for (int it = 0; it < 200; ++it) {
    const long double mid = 0.5L * (lo + hi);
    if (series_oracle(static_cast<double>(mid), S_r2) > alpha / 2.0)
      lo = mid;
    else
      hi = mid;
  }
  return static_cast<double>(0.5L * (lo + hi));
}

}  // namespace

TEST_CASE("series matches a long double evaluation on both branches") {
  for (double S : {0.25, 1.0, 7.3}) {
    const double root = std::sqrt(S);
    // direct branch
    for (double t : {0.8, 1.0, 1.3581, 2.0, 3.0})
      CHECK(stopping_series(t * root, S) == doctest::Approx(series_oracle(t * root, S)).epsilon(1e-12));
    // theta branch, where the oracle still converges
    for (double t : {0.45, 0.6, 0.7, 0.7499})
      CHECK(stopping_series(t * root, S) == doctest::Approx(series_oracle(t * root, S)).epsilon(1e-12));
  }
}

TEST_CASE("series is continuous across the branch switch and saturates at small x") {
  // the function has slope about -0.84 here, so the gap over 2e-5 should be
  // the genuine decrease and nothing extra
  const double below = stopping_series(0.74999, 1.0);
  const double above = stopping_series(0.75001, 1.0);
  CHECK(below > above);  // decreasing in x
  CHECK(below - above < 5e-5);
  // far below the switch the value flattens at 1/2
  CHECK(stopping_series(0.05, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  // far out only the first term survives
  CHECK(stopping_series(4.0, 1.0) == doctest::Approx(std::exp(-32.0)).epsilon(1e-10));
}

TEST_CASE("threshold root reproduces the classical quantile") {
  const double x = threshold_x_alpha(1.0, 0.05);
  CHECK(x == doctest::Approx(1.3581).epsilon(1e-3));
  CHECK(x == doctest::Approx(brute_quantile(1.0, 0.05)).epsilon(1e-9));
}

TEST_CASE("threshold root solves the equation and is monotone in alpha") {
  for (double S : {0.5, 1.0, 4.2}) {
    double prev = 1e300;
    for (double alpha : {0.01, 0.05, 0.10, 0.50, 0.90}) {
      const double x = threshold_x_alpha(S, alpha);
      CHECK(stopping_series(x, S) == doctest::Approx(alpha / 2.0).epsilon(1e-10));
      CHECK(x < prev);
      prev = x;
    }
  }
}

TEST_CASE("threshold root scales as the square root of the variance factor") {
  const double base = threshold_x_alpha(1.0, 0.05);
  for (double c : {0.3, 2.0, 11.0})
    CHECK(threshold_x_alpha(c * c, 0.05) == doctest::Approx(c * base).epsilon(1e-9));
  CHECK_THROWS(threshold_x_alpha(-1.0, 0.05));
  CHECK_THROWS(threshold_x_alpha(1.0, 0.0));
}

TEST_CASE("check is vacuous when fewer coordinates remain than the order") {
  auto D = DifferenceOperator::build(3, 1);  // single row
  DiffRows rows{&D, {0}};
  auto chol = BandedCholesky::factor_gram(rows);
  Vec a(1);
  a << 5.0;
  auto chk = stopping_check(1, a, chol, 1.0, 0.05);
  CHECK(chk.fired);
  CHECK(chk.vacuous);
}

TEST_CASE("check fires immediately on constant data") {
  const int n = 10;
  auto D = DifferenceOperator::build(n, 0);
  DiffRows rows{&D, {}};
  for (int i = 0; i < D.m; ++i) rows.rows.push_back(i);
  auto chol = BandedCholesky::factor_gram(rows);
  Vec y = Vec::Constant(n, 3.0);
  Vec a = gram_apply(rows, y);
  auto chk = stopping_check(0, a, chol, 1.0, 0.05);
  CHECK(chk.fired);
  CHECK_FALSE(chk.vacuous);
  CHECK(chk.stat == doctest::Approx(0.0));
  CHECK(chk.k == D.m);
}

TEST_CASE("check matches a dense reconstruction of every reported field") {
  std::mt19937_64 eng(31);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int r : {0, 1, 2}) {
    const int n = 17;
    auto D = DifferenceOperator::build(n, r);
    DiffRows rows{&D, {}};
    for (int i = 0; i < D.m; ++i) rows.rows.push_back(i);
    auto chol = BandedCholesky::factor_gram(rows);
    Vec y(n);
    for (int i = 0; i < n; ++i) y[i] = g(eng);
    Vec a = gram_apply(rows, y);
    const double sigma = 0.8, alpha = 0.05;
    auto chk = stopping_check(r, a, chol, sigma, alpha);

    Mat Dd = rows.dense();
    Mat Ginv = (Dd * Dd.transpose()).inverse();
    CHECK(chk.k == D.m);
    CHECK(chk.S_r2 == doctest::Approx(Ginv(D.m - 1, D.m - 1)).epsilon(1e-10));
    CHECK(chk.x_alpha == doctest::Approx(threshold_x_alpha(chk.S_r2, alpha)).epsilon(1e-12));
    CHECK(chk.threshold ==
          doctest::Approx(sigma * chk.x_alpha * std::pow(D.m - r, r + 0.5)).epsilon(1e-12));
    CHECK(chk.stat == doctest::Approx(a.cwiseAbs().maxCoeff()));
    CHECK(chk.fired == (chk.stat <= chk.threshold));
  }
}

TEST_CASE("check is monotone in the noise scale") {
  const int n = 12;
  auto D = DifferenceOperator::build(n, 0);
  DiffRows rows{&D, {}};
  for (int i = 0; i < D.m; ++i) rows.rows.push_back(i);
  auto chol = BandedCholesky::factor_gram(rows);
  std::mt19937_64 eng(32);
  std::normal_distribution<double> g(0.0, 1.0);
  Vec y(n);
  for (int i = 0; i < n; ++i) y[i] = g(eng);
  Vec a = gram_apply(rows, y);
  CHECK_FALSE(stopping_check(0, a, chol, 1e-6, 0.05).fired);
  CHECK(stopping_check(0, a, chol, 1e6, 0.05).fired);
}

TEST_CASE("trailing inverse diagonal has the known closed form at order zero") {
  // for the order-zero Gram (tridiagonal 2,-1) the inverse diagonal is
  // i(m+1-i)/(m+1), so the trailing entry is m/(m+1)
  for (int n : {5, 9, 30}) {
    auto D = DifferenceOperator::build(n, 0);
    DiffRows rows{&D, {}};
    for (int i = 0; i < D.m; ++i) rows.rows.push_back(i);
    auto chol = BandedCholesky::factor_gram(rows);
    CHECK(chol.inverse_diagonal(D.m - 1) ==
          doctest::Approx(static_cast<double>(D.m) / (D.m + 1)).epsilon(1e-12));
  }
}
