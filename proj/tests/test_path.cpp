#include <doctest.h>

#include <cmath>

#include "stgnrde/error.hpp"
#include "stgnrde/path.hpp"
#include "test_util.hpp"

using namespace stgnrde;

namespace {

// Natural spline second derivatives from the full (n+1)x(n+1) system solved
// by dense Gaussian elimination with partial pivoting.
std::vector<double> dense_second_derivatives(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  a[0][0] = 1.0;
  a[n - 1][n - 1] = 1.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
    a[i][i - 1] = h0;
    a[i][i] = 2.0 * (h0 + h1);
    a[i][i + 1] = h1;
    a[i][n] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[p][c])) p = r;
    std::swap(a[c], a[p]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = a[i][n] / a[i][i];
  return m;
}

}  // namespace

TEST_SUITE("path") {

TEST_CASE("spline interpolates the knots and matches a dense-solve oracle") {
  const std::size_t T = 9;
  auto vals = testutil::random_values(T * 2, 5, -3.0, 3.0);
  RawSeries s = RawSeries::dense(1, T, 2, vals);
  SplinePath p = fit_spline(s);
  for (std::size_t t = 0; t < T; ++t) {
    auto v = p.eval(0, static_cast<double>(t));
    CHECK(v[0] == doctest::Approx(vals[t * 2]).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(vals[t * 2 + 1]).epsilon(1e-12));
  }
  std::vector<double> x(T), y(T);
  for (std::size_t t = 0; t < T; ++t) {
    x[t] = static_cast<double>(t);
    y[t] = vals[t * 2];
  }
  auto m = dense_second_derivatives(x, y);
  for (std::size_t t = 0; t < T; ++t) {
    CHECK(p.eval_derivative(0, x[t], 2)[0] == doctest::Approx(m[t]).scale(1.0).epsilon(1e-10));
  }
}

TEST_CASE("natural boundary and C2 continuity") {
  auto vals = testutil::random_values(7, 6);
  SplinePath p = fit_spline(RawSeries::dense(1, 7, 1, vals));
  CHECK(std::fabs(p.eval_derivative(0, 0.0, 2)[0]) < 1e-12);
  CHECK(std::fabs(p.eval_derivative(0, 6.0, 2)[0]) < 1e-12);
  for (double k = 1.0; k < 6.0; k += 1.0) {
    for (int order = 0; order <= 2; ++order) {
      double left = p.eval_derivative(0, k - 1e-9, order)[0];
      double right = p.eval_derivative(0, k + 1e-9, order)[0];
      CHECK(std::fabs(left - right) < 1e-6);
    }
  }
}

TEST_CASE("linear data is reproduced exactly") {
  std::vector<double> vals;
  for (int t = 0; t < 6; ++t) vals.push_back(2.0 * t - 1.0);
  SplinePath p = fit_spline(RawSeries::dense(1, 6, 1, vals));
  for (double t = 0.0; t <= 5.0; t += 0.37) CHECK(p.eval(0, t)[0] == doctest::Approx(2.0 * t - 1.0).epsilon(1e-12));
}

TEST_CASE("time channel is appended and rescaled to [0, 1]") {
  SplinePath p = fit_spline(RawSeries::dense(2, 5, 1, testutil::random_values(10, 7)));
  CHECK(p.path_channels() == 2);
  CHECK(p.eval(1, 0.0).back() == 0.0);
  CHECK(p.eval(1, 4.0).back() == 1.0);
  CHECK(p.eval(1, 1.0).back() == doctest::Approx(0.25));
}

TEST_CASE("missing interior points are interpolated over") {
  std::vector<double> vals = {0, 1, 100, 3, 4};
  RawSeries s = RawSeries::dense(1, 5, 1, vals);
  s.mask[2] = 0;
  SplinePath p = fit_spline(s);
  CHECK(p.spline(0).knots.size() == 4);
  CHECK(p.eval(0, 2.0)[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("fit errors name the node") {
  RawSeries s = RawSeries::dense(2, 4, 1, std::vector<double>(8, 1.0));
  s.mask[4] = 0;  // node 1, first timestep
  try {
    fit_spline(s);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("node 1") != std::string::npos);
  }
  RawSeries one = RawSeries::dense(1, 3, 1, {1, 2, 3});
  one.mask = {1, 0, 0};
  CHECK_THROWS_AS(fit_spline(one), DataError);
}

TEST_CASE("evaluation outside the domain raises DomainError") {
  SplinePath p = fit_spline(RawSeries::dense(1, 4, 1, {1, 2, 3, 4}));
  CHECK_THROWS_AS(p.eval(0, -0.1), DomainError);
  CHECK_THROWS_AS(p.eval(0, 3.1), DomainError);
  CHECK_THROWS_AS(sample_chords(p, 0, 1.0, 3.5, 2), DomainError);
}

TEST_CASE("sample_chords returns substeps + 1 points including endpoints") {
  SplinePath p = fit_spline(RawSeries::dense(1, 5, 1, {0, 1, 4, 9, 16}));
  auto pts = sample_chords(p, 0, 1.0, 3.0, 4);
  REQUIRE(pts.size() == 5);
  CHECK(pts.front()[0] == doctest::Approx(1.0));
  CHECK(pts.back()[0] == doctest::Approx(9.0));
  CHECK(pts[2][1] == doctest::Approx(0.5));
}

}
