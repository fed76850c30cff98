#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "condmoments/randgeom.hpp"

using namespace condmoments;

namespace {

// Running mean and standard error.
struct Stat {
  double s = 0.0, s2 = 0.0;
  int n = 0;
  void add(double x) {
    s += x;
    s2 += x * x;
    ++n;
  }
  double mean() const { return s / n; }
  double se() const { return std::sqrt((s2 / n - mean() * mean()) / n); }
};

constexpr int kDraws = 100000;

}  // namespace

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  RngStream a(5, 3), b(5, 3), c(5, 4);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.complex_gaussian();
    EXPECT_EQ(x, b.complex_gaussian());
    EXPECT_NE(x, c.complex_gaussian());
  }
}

TEST(Gaussian, VectorMoments) {
  RngStream rng(31, 0);
  Stat s2, s4, inv1;
  for (int t = 0; t < kDraws; ++t) {
    const double n4 = std::pow(norm2(complex_gaussian_vector(rng, 4)), 2);
    s2.add(n4);
    s4.add(std::pow(norm2(complex_gaussian_vector(rng, 3)), 4));
    inv1.add(1.0 / std::abs(rng.complex_gaussian()));
  }
  EXPECT_NEAR(s2.mean(), 4.0, 4 * s2.se());
  EXPECT_NEAR(s4.mean(), 12.0, 4 * s4.se());
  // E|z|^{-1} = Gamma(1/2)/Gamma(1); the variance is infinite, so the SE is only indicative.
  EXPECT_NEAR(inv1.mean(), std::sqrt(std::numbers::pi), 4 * inv1.se());
}

TEST(Gaussian, MatrixDeterminantSecondMoment) {
  RngStream rng(32, 0);
  Stat s;
  for (int t = 0; t < kDraws; ++t) {
    const auto m = gaussian_matrix(rng, 2, 2);
    s.add(std::norm(m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)));
  }
  EXPECT_NEAR(s.mean(), 2.0, 4 * s.se());
}

TEST(Gaussian, SystemNormMoments) {
  RngStream rng(33, 0);
  const auto shape = make_shape(2, DegreeList{3});
  Stat sq, inv;
  for (int t = 0; t < kDraws; ++t) {
    const double n2 = std::pow(gaussian_system(rng, shape).norm(), 2);
    sq.add(n2);
    inv.add(1.0 / n2);
  }
  EXPECT_NEAR(sq.mean(), 10.0, 4 * sq.se());
  EXPECT_NEAR(inv.mean(), 1.0 / 9.0, 4 * inv.se());
}

TEST(Gaussian, DoubledVarianceHookIsDetectable) {
  RngStream rng(34, 0, 2.0);
  Stat s;
  for (int t = 0; t < kDraws; ++t) s.add(std::norm(rng.complex_gaussian()));
  EXPECT_GT(std::abs(s.mean() - 1.0), 10 * s.se());
}

TEST(Haar, UnitaryAndEntryMoments) {
  RngStream rng(35, 0);
  Stat a;
  Stat det_re, det_im;
  for (int t = 0; t < kDraws; ++t) {
    const auto u = haar_unitary(rng, 3);
    a.add(std::norm(u(0, 0)));
    if (t < 10) {
      EXPECT_LT(frobenius_norm(u.adjoint() * u - ComplexMatrix::identity(3)), 1e-12);
    }
    const Complex det = u(0, 0) * (u(1, 1) * u(2, 2) - u(1, 2) * u(2, 1)) -
                        u(0, 1) * (u(1, 0) * u(2, 2) - u(1, 2) * u(2, 0)) +
                        u(0, 2) * (u(1, 0) * u(2, 1) - u(1, 1) * u(2, 0));
    det_re.add(det.real());
    det_im.add(det.imag());
  }
  EXPECT_NEAR(a.mean(), 1.0 / 3.0, 4 * a.se());
  EXPECT_NEAR(det_re.mean(), 0.0, 4 * det_re.se());
  EXPECT_NEAR(det_im.mean(), 0.0, 4 * det_im.se());
}

TEST(Fiber, PureMonomialRemovedAtE0) {
  RngStream r1(36, 0), r2(36, 0);
  const auto shape = make_shape(2, DegreeList{2, 3});
  const auto h = gaussian_system(r1, shape);
  const auto f = sample_fiber(r2, ProjectivePoint::basis(3, 0), shape);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(f.coords(i)[0], Complex(0.0));
    for (std::size_t k = 1; k < h.coords(i).size(); ++k) EXPECT_NEAR(std::abs(f.coords(i)[k] - h.coords(i)[k]), 0.0, 1e-15);
  }
}

TEST(Fiber, VanishesAtPointAndKeepsOrthogonalVariance) {
  RngStream rng(37, 0);
  const ProjectivePoint x(CVector{Complex(0.6, 0.0), Complex(0.0, 0.8), Complex(0.0, 0.0)});
  for (int t = 0; t < 100; ++t) {
    const auto h = sample_fiber(rng, x, 2, DegreeList{2, 3});
    const auto v = evaluate(h, x.rep());
    EXPECT_LT(norm2(v), 1e-10 * h.norm());
  }
  // The x2^2 coordinate is orthogonal to the kernel at x (x2 = 0), so it stays standard.
  const auto shape = make_shape(2, DegreeList{2});
  const std::size_t k = shape->bases[0]->index_of({0, 0, 2});
  Stat s;
  for (int t = 0; t < kDraws; ++t) s.add(std::norm(sample_fiber(rng, x, shape).coords(0)[k]));
  EXPECT_NEAR(s.mean(), 1.0, 4 * s.se());
}

TEST(Rotate, IdentityNormAndPointwise) {
  RngStream rng(38, 0);
  const auto h = gaussian_system(rng, 3, DegreeList{2, 3});
  const auto same = rotate_system(h, ComplexMatrix::identity(4));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < h.coords(i).size(); ++k) EXPECT_LT(std::abs(same.coords(i)[k] - h.coords(i)[k]), 1e-14);
  for (int t = 0; t < 10; ++t) {
    const auto u = haar_unitary(rng, 4);
    const auto hu = rotate_system(h, u);
    EXPECT_NEAR(hu.norm(), h.norm(), 1e-10 * h.norm());
    const auto v = complex_gaussian_vector(rng, 4);
    const auto a = evaluate(hu, v), b = evaluate(h, u.adjoint() * std::span<const Complex>(v));
    for (std::size_t i = 0; i < 2; ++i) EXPECT_LT(std::abs(a[i] - b[i]), 1e-10 * std::max(1.0, std::abs(b[i])));
  }
}

TEST(Lines, OrthonormalAndInvariantLaw) {
  RngStream rng(39, 0);
  Stat plain, rotated;
  const auto u = haar_unitary(rng, 4);
  for (int t = 0; t < kDraws; ++t) {
    const auto [a, b] = random_projective_line(rng, 3);
    if (t < 100) {
      EXPECT_NEAR(norm2(a), 1.0, 1e-12);
      EXPECT_NEAR(norm2(b), 1.0, 1e-12);
      EXPECT_LT(std::abs(dot(a, b)), 1e-12);
    }
    const auto [c, d] = random_projective_line(rng, 3);
    plain.add(std::norm(a[0]));
    rotated.add(std::norm((u * std::span<const Complex>(c))[0]));
  }
  EXPECT_NEAR(plain.mean(), rotated.mean(), 4 * std::hypot(plain.se(), rotated.se()));
  EXPECT_NEAR(plain.mean(), 0.25, 4 * plain.se());

  const auto [p, q] = random_projective_line(rng, 1);
  EXPECT_EQ(p.size(), 2u);
  EXPECT_LT(std::abs(dot(p, q)), 1e-12);
}
