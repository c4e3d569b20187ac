#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "dmid/affine.hpp"
#include "doctest.h"

using namespace dmid;

namespace {

Mat random_spd(int n, std::mt19937_64& rng, double cond_floor = 0.1) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  return A * A.transpose() + cond_floor * Mat::Identity(n, n);
}

Mat random_invertible(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Mat D(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) D(i, j) = g(rng);
    Eigen::JacobiSVD<Mat> svd(D);
    const auto& sv = svd.singularValues();
    // keep the charts well conditioned so congruence stays representable
    if (sv(n - 1) > 1e-12 && sv(0) / sv(n - 1) < 100.0) return D;
  }
}

}  // namespace

TEST_CASE("symmetrized accepts symmetric, rejects asymmetric") {
  Mat S{{1.0, 2.0}, {2.0, 5.0}};
  CHECK((symmetrized(S) - S).norm() == doctest::Approx(0.0));
  Mat A{{1.0, 2.0}, {2.0 + 1e-12, 5.0}};
  CHECK_NOTHROW(symmetrized(A));
  Mat B{{1.0, 2.0}, {3.0, 5.0}};
  CHECK_THROWS(symmetrized(B));
}

TEST_CASE("pd guard and singular-metric error payload") {
  CHECK(metric_is_pd(Mat::Identity(3, 3)));
  Mat nearly = Mat::Identity(2, 2);
  nearly(1, 1) = 1e-9;  // ratio below 1e-8 guard
  CHECK_FALSE(metric_is_pd(nearly));
  try {
    require_pd(nearly);
    FAIL("expected SingularMetricError");
  } catch (const SingularMetricError& e) {
    CHECK(e.lambda_min == doctest::Approx(1e-9));
    CHECK(e.lambda_max == doctest::Approx(1.0));
  }
}

TEST_CASE("dual_norm_sq closed forms") {
  CHECK(dual_norm_sq(Mat::Identity(2, 2), Vec{{3, 4}}) == doctest::Approx(25.0));
  Mat M = Vec{{4, 1}}.asDiagonal();
  CHECK(dual_norm_sq(M, Vec{{2, 0}}) == doctest::Approx(1.0));
  CHECK(dual_norm_sq(Mat::Identity(3, 3), Vec::Zero(3)) == doctest::Approx(0.0));
  CHECK_THROWS_AS(dual_norm_sq(Mat::Zero(2, 2), Vec{{1, 0}}), SingularMetricError);
}

TEST_CASE("dual norm matches explicit inverse on random instances") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int n = 2; n <= 8; ++n) {
    for (int rep = 0; rep < 20; ++rep) {
      Mat M = random_spd(n, rng);
      Vec f(n);
      for (int i = 0; i < n; ++i) f(i) = g(rng);
      const double expect = f.dot(M.inverse() * f);
      CHECK(dual_norm_sq(M, f) == doctest::Approx(expect).epsilon(1e-10));
    }
  }
}

TEST_CASE("dual norm congruence invariance, dims 2-8") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int n = 2; n <= 8; ++n) {
    for (int rep = 0; rep < 20; ++rep) {
      Mat M = random_spd(n, rng);
      Mat D = random_invertible(n, rng);
      Vec f(n);
      for (int i = 0; i < n; ++i) f(i) = g(rng);
      const Mat Dinv = D.inverse();
      const Mat Mprime = symmetrized(Dinv.transpose() * M * Dinv);
      const Vec fprime = Dinv.transpose() * f;
      const double a = dual_norm_sq(M, f);
      const double b = dual_norm_sq(Mprime, fprime);
      CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST_CASE("metric_sqrt closed forms and self-consistency") {
  CHECK((metric_sqrt(Mat::Identity(3, 3)) - Mat::Identity(3, 3)).norm() ==
        doctest::Approx(0.0));
  Mat D = Vec{{4, 9}}.asDiagonal();
  Mat expect = Vec{{2, 3}}.asDiagonal();
  CHECK((metric_sqrt(D) - expect).norm() == doctest::Approx(0.0).epsilon(1e-12));

  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    Mat M = random_spd(4, rng);
    Mat R = metric_sqrt(M);
    CHECK((R - R.transpose()).norm() <= 1e-12);
    CHECK((R * R - M).norm() <= 1e-10 * M.norm());
  }
}

TEST_CASE("AffineMatrix assembly is affine and symmetrized") {
  std::mt19937_64 rng(5);
  Mat M0 = random_spd(3, rng);
  std::vector<Mat> Mp{random_spd(3, rng), -0.5 * random_spd(3, rng)};
  AffineMatrix form(M0, Mp);
  Vec p1{{0.3, -0.7}}, p2{{1.5, 0.2}};
  const double a = 0.37;
  Mat lhs = form.assemble(a * p1 + (1 - a) * p2);
  Mat rhs = a * form.assemble(p1) + (1 - a) * form.assemble(p2);
  CHECK((lhs - rhs).norm() <= 1e-12);
  CHECK_THROWS(form.assemble(Vec::Zero(3)));
  CHECK_THROWS(AffineMatrix(M0, {Mat::Identity(2, 2)}));
}
