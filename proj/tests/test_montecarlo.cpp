#include <gtest/gtest.h>

#include <cmath>

#include "condmoments/montecarlo.hpp"

using namespace condmoments;

namespace {

McConfig config(std::uint64_t seed, std::uint64_t samples = 100000) {
  McConfig c;
  c.seed = seed;
  c.samples = samples;
  c.workers = 4;
  return c;
}

void expect_agrees(const EstimateResult& e, double target, double sigmas = 3.0) {
  EXPECT_LE(std::abs(e.mean - target), sigmas * e.stderr_ + 1e-12 * std::abs(target))
      << e.estimator_id << " " << e.params.dump() << ": mean " << e.mean << " stderr " << e.stderr_ << " target "
      << target;
}

}  // namespace

TEST(Summaries, PairwiseSumAndPlainMean) {
  std::vector<double> logs{0.0, std::log(2.0), std::log(3.0), std::log(6.0)};
  const auto [m, se] = summarize_logs(logs, EstimateMethod::PlainMean, 0);
  EXPECT_NEAR(m, 3.0, 1e-14);
  EXPECT_NEAR(se, std::sqrt((4.0 + 1.0 + 0.0 + 9.0) / 3.0 / 4.0), 1e-14);
  // Very large logs stay finite relative to each other.
  std::vector<double> huge{710.0, 0.0};  // exp(710) overflows, the mean does not
  EXPECT_NEAR(std::log(summarize_logs(huge, EstimateMethod::PlainMean, 0).first), 710.0 - std::log(2.0), 1e-12);
}

TEST(Summaries, MedianOfMeansIgnoresOneOutlierBucket) {
  std::vector<double> logs(64, 0.0);
  logs[0] = std::log(1e6);
  const auto [m, se] = summarize_logs(logs, EstimateMethod::MedianOfMeans, 32);
  EXPECT_NEAR(m, 1.0, 1e-12);
  EXPECT_GT(se, 0.0);
  EXPECT_THROW(summarize_logs(logs, EstimateMethod::MedianOfMeans, 65), DomainError);
}

TEST(Summaries, RejectsInfiniteIntegrand) {
  std::vector<double> logs{0.0, INFINITY};
  EXPECT_THROW(summarize_logs(logs, EstimateMethod::PlainMean, 0), NumericFailure);
}

TEST(Estimators, Espnorm) {
  expect_agrees(estimate_espnorm(3, 4.0, config(1)), 12.0);
  expect_agrees(estimate_espnorm(4, 2.0, config(2)), 4.0);
  const auto heavy = estimate_espnorm(2, -2.0, config(3));
  EXPECT_EQ(heavy.method, EstimateMethod::MedianOfMeans);
  expect_agrees(heavy, 1.0, 4.0);
  EXPECT_THROW(estimate_espnorm(2, -4.0, config(3)), DomainError);
}

TEST(Estimators, PinvMoment) {
  const auto a = estimate_pinv_moment(1, 2, 2.0, MatrixNorm::Frobenius, config(4));
  EXPECT_EQ(a.method, EstimateMethod::MedianOfMeans);
  expect_agrees(a, 1.0, 4.0);
  expect_agrees(estimate_pinv_moment(2, 4, 2.0, MatrixNorm::Frobenius, config(5)), 1.0);
  expect_agrees(estimate_pinv_moment(1, 3, 2.0, MatrixNorm::Frobenius, config(6)), 0.5);
  try {
    estimate_pinv_moment(2, 3, 4.0, MatrixNorm::Frobenius, config(6));
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("alpha < 2(m-r+1)"), std::string::npos);
  }
}

TEST(Estimators, DetweightedRectCancellation) {
  for (auto [r, n] : {std::pair{1, 2}, std::pair{1, 1}}) {
    const auto e = estimate_detweighted_rect(r, n, 2.0, MatrixNorm::Frobenius, config(7, 1000));
    EXPECT_NEAR(e.mean, 1.0, 1e-12);
    EXPECT_LT(e.stderr_, 1e-12);
  }
}

TEST(Estimators, DetweightedSquare) {
  expect_agrees(estimate_detweighted_square_k(2, 2, 2.0, MatrixNorm::Frobenius, config(8)), 12.0);
  expect_agrees(estimate_detweighted_square_k(3, 1, 2.0, MatrixNorm::Frobenius, config(9)), 18.0);
  // n_ambient form: k = n - r + 1
  const auto a = estimate_detweighted_square(2, 2, 2.0, MatrixNorm::Frobenius, config(10, 1000));
  const auto b = estimate_detweighted_square_k(2, 1, 2.0, MatrixNorm::Frobenius, config(10, 1000));
  EXPECT_EQ(a.mean, b.mean);
}

TEST(Estimators, Espnormrest) {
  expect_agrees(estimate_espnormrest(3, 1, 2.0, config(11)), 8.0);
  expect_agrees(estimate_espnormrest(3, 0, 2.0, config(12)), 2.0);
  const auto probe = estimate_espnormrest(3, 1, 0.0, config(13));
  expect_agrees(probe, 3.0);
  EXPECT_GT(std::abs(probe.mean - 2.0), 5.0 * probe.stderr_);
}

TEST(Estimators, PolyMoment) {
  auto c = config(14, 10000);
  c.lines_per_system = 1;
  const auto det = estimate_poly_moment(1, DegreeList{2}, 2.0, false, MatrixNorm::Frobenius, c);
  EXPECT_EQ(det.method, EstimateMethod::MedianOfMeans);
  expect_agrees(det, 2.0, 4.0);

  auto u = config(15, 4000);
  u.lines_per_system = 8;
  expect_agrees(estimate_poly_moment(2, DegreeList{2}, 2.0, true, MatrixNorm::Frobenius, u), 0.5);

  try {
    estimate_poly_moment(2, DegreeList{2}, 6.0, false, MatrixNorm::Frobenius, u);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("0 < alpha < 2(n-r+2)"), std::string::npos);
  }
  EXPECT_THROW(estimate_poly_moment(2, DegreeList{2, 2}, 2.0, false, MatrixNorm::Frobenius, u), DomainError);
}

TEST(Estimators, LinvarProperty) {
  // Gamma(n-r+1)/Gamma(n+1) E ||A^+||^2 |det A A^*| over r x n = E ||M^+||^2 over r x (n+1)
  for (auto [r, n] : {std::pair{1, 2}, std::pair{2, 3}, std::pair{2, 4}})
    for (auto norm : {MatrixNorm::Frobenius, MatrixNorm::Operator}) {
      const auto lhs = estimate_detweighted_rect(r, n, 2.0, norm, config(100 + r * 10 + n));
      const auto rhs = estimate_pinv_moment(r, n + 1, 2.0, norm, config(200 + r * 10 + n));
      const auto c = compare_estimates(lhs, linvar_factor(r, n).value, rhs, 1.0, 3.0);
      EXPECT_TRUE(c.pass) << "r=" << r << " n=" << n << " " << to_string(norm) << " z=" << c.z_score;
    }
}

TEST(Estimators, KervarProperty) {
  for (auto [r, n] : {std::pair{1, 2}, std::pair{2, 3}}) {
    const auto lhs = estimate_pinv_moment(r, n, 2.0, MatrixNorm::Frobenius, config(300 + n));
    const auto rhs = estimate_detweighted_square_k(r, n - r, 2.0, MatrixNorm::Frobenius, config(400 + n));
    const auto c = compare_estimates(lhs, 1.0, rhs, kervar_factor(r, n).value, 3.0);
    EXPECT_TRUE(c.pass) << "r=" << r << " n=" << n << " z=" << c.z_score;
  }
}

TEST(Determinism, WorkerCountDoesNotChangeResults) {
  auto a = config(21, 5000), b = config(21, 5000);
  a.workers = 1;
  b.workers = 7;
  const auto x = estimate_detweighted_square_k(3, 1, 2.0, MatrixNorm::Operator, a);
  const auto y = estimate_detweighted_square_k(3, 1, 2.0, MatrixNorm::Operator, b);
  EXPECT_EQ(x.mean, y.mean);
  EXPECT_EQ(x.stderr_, y.stderr_);
  a.samples = b.samples = 300;
  a.lines_per_system = b.lines_per_system = 3;
  EXPECT_EQ(estimate_poly_moment(2, DegreeList{3}, 2.0, false, MatrixNorm::Frobenius, a).mean,
            estimate_poly_moment(2, DegreeList{3}, 2.0, false, MatrixNorm::Frobenius, b).mean);
}

TEST(Compare, ArithmeticAndZeroDispersion) {
  EstimateResult e;
  e.mean = 1.0;
  e.stderr_ = 0.01;
  const auto cf = FormulaValue::from_log(0.0, "one", {});
  auto c = compare(e, cf, 3.0);
  EXPECT_EQ(c.z_score, 0.0);
  EXPECT_TRUE(c.pass);

  e.mean = 1.05;
  c = compare(e, cf, 3.0);
  EXPECT_NEAR(c.z_score, 5.0, 1e-8);
  EXPECT_FALSE(c.pass);

  // Zero dispersion: only the resolution floor remains, so a real gap is a huge z.
  e.stderr_ = 0.0;
  c = compare(e, cf, 3.0);
  EXPECT_GT(c.z_score, 1e9);
  EXPECT_FALSE(c.pass);
  e.mean = 1.0;
  EXPECT_TRUE(compare(e, cf, 3.0).pass);

  EstimateResult z;
  z.mean = 2.0;
  c = compare(z, FormulaValue::from_log(-INFINITY, "zero", {}), 3.0);
  EXPECT_TRUE(std::isinf(c.z_score));
  EXPECT_FALSE(c.pass);
}
