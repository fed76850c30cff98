#include <gtest/gtest.h>

#include <cmath>

#include "condmoments/conditioning.hpp"
#include "condmoments/randgeom.hpp"

using namespace condmoments;

TEST(Mu, LinearBinaryForm) {
  // n = r = 1, h = x1, zero at e0: ||h|| = 1, Dh = (0, 1).
  const auto shape = make_shape(1, DegreeList{1});
  const auto h = SystemCoords::from_monomial_coefficients(shape, {CVector{0.0, 1.0}});
  const auto e0 = ProjectivePoint::basis(2, 0);
  EXPECT_NEAR(mu_frobenius(h, e0).value, 1.0, 1e-14);
  EXPECT_NEAR(mu_operator(h, e0).value, 1.0, 1e-14);
}

TEST(Mu, LinearSystemWithOrthonormalRows) {
  RngStream rng(41, 0);
  const auto u = haar_unitary(rng, 4);
  const auto shape = make_shape(3, DegreeList{1, 1});
  std::vector<CVector> a(2, CVector(4));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 4; ++k) a[i][k] = u(i, k);
  const auto h = SystemCoords::from_monomial_coefficients(shape, a);
  // Row 3 of U is orthogonal to rows 0 and 1 after conjugation: x = conj(u_3).
  CVector x(4);
  for (std::size_t k = 0; k < 4; ++k) x[k] = std::conj(u(3, k));
  // ||h|| = sqrt(2), ||M^+||_F = sqrt(2)
  EXPECT_NEAR(mu_frobenius(h, ProjectivePoint(x)).value, 2.0, 1e-12);
  EXPECT_NEAR(mu_operator(h, ProjectivePoint(x)).value, std::sqrt(2.0), 1e-12);
}

TEST(Mu, RankDeficientIsInfinite) {
  const auto shape = make_shape(2, DegreeList{1, 1});
  const CVector row{0.0, 1.0, 2.0};
  const auto h = SystemCoords::from_monomial_coefficients(shape, {row, row});
  const auto c = mu_frobenius(h, ProjectivePoint::basis(3, 0));
  EXPECT_TRUE(c.rank_deficient);
  EXPECT_TRUE(std::isinf(c.value));
  EXPECT_TRUE(mu_operator(h, ProjectivePoint::basis(3, 0)).rank_deficient);
}

TEST(Mu, RejectsNonZero) {
  const auto shape = make_shape(1, DegreeList{1});
  const auto h = SystemCoords::from_monomial_coefficients(shape, {CVector{1.0, 1.0}});
  EXPECT_THROW(mu_frobenius(h, ProjectivePoint::basis(2, 0)), DomainError);
}

TEST(Mu, UnitaryAndPhaseInvariance) {
  RngStream rng(42, 0);
  for (int t = 0; t < 100; ++t) {
    const ProjectivePoint x(complex_gaussian_vector(rng, 4));
    const auto h = sample_fiber(rng, x, 3, DegreeList{2, 3});
    const auto u = haar_unitary(rng, 4);
    const double base = mu_frobenius(h, x).value;
    const ProjectivePoint ux(u * std::span<const Complex>(x.rep()));
    EXPECT_NEAR(mu_frobenius(rotate_system(h, u), ux).value, base, 1e-8 * base);
    auto xp = x.rep();
    for (auto& z : xp) z *= std::polar(1.0, 0.7 * t);
    EXPECT_NEAR(mu_frobenius(h, ProjectivePoint(xp)).value, base, 1e-10 * base);
  }
}

TEST(Mu, FullJacobianMatchesRestrictionToOrthogonalComplement) {
  // At a zero, Dh(x) x = 0, so the pseudoinverse of Dh(x) equals that of Dh(x)
  // restricted to x-perp. Check with an explicit basis of x-perp.
  RngStream rng(43, 0);
  for (int t = 0; t < 20; ++t) {
    const ProjectivePoint x(complex_gaussian_vector(rng, 4));
    const DegreeList d{2, 3};
    const auto h = sample_fiber(rng, x, 3, d);
    const auto jac = jacobian(h, x.rep());
    ComplexMatrix xrow(1, 4);
    for (std::size_t k = 0; k < 4; ++k) xrow(0, k) = std::conj(x.rep()[k]);
    const auto perp = kernel_basis(xrow);  // 4 x 3, orthonormal columns spanning x-perp
    const auto restricted = jac * perp;
    ComplexMatrix scale(2, 2);
    for (std::size_t i = 0; i < 2; ++i) scale(i, i) = std::sqrt(static_cast<double>(d[i]));
    const double a = frobenius_norm(pinv(restricted) * scale) * h.norm();
    const double b = mu_frobenius(h, x).value;
    EXPECT_NEAR(a, b, 1e-10 * b);
  }
}

TEST(EmpiricalMoment, SingleRelativeAndBinaryQuadratic) {
  RngStream rng(44, 0);
  const ProjectivePoint x(complex_gaussian_vector(rng, 3));
  const auto h = sample_fiber(rng, x, 2, DegreeList{2});
  const double m = mu_frobenius(h, x).value;
  const std::vector<ProjectivePoint> one{x};
  EXPECT_NEAR(empirical_moment(h, one, 2.0, false).value, m * m, 1e-12 * m * m);
  const auto hn = h.scaled(1.0 / h.norm());
  EXPECT_NEAR(empirical_moment(hn, one, 2.0, true).value, empirical_moment(hn, one, 2.0, false).value, 1e-12);

  // h = 2 x0 x1 - x1^2 (monomial coefficients), roots [1:0] and [1:2].
  const auto shape = make_shape(1, DegreeList{2});
  const auto q = SystemCoords::from_monomial_coefficients(shape, {CVector{0.0, 2.0, -1.0}});
  const std::vector<ProjectivePoint> roots{ProjectivePoint(CVector{1.0, 0.0}), ProjectivePoint(CVector{1.0, 2.0})};
  // ||q||^2 = 4/2 + 1 = 3. At unit x, mu = ||q|| sqrt(2) / ||Dq(x)||.
  auto hand = [&](double x0, double x1) {
    const double nx = std::hypot(x0, x1);
    x0 /= nx;
    x1 /= nx;
    const double g0 = 2 * x1, g1 = 2 * x0 - 2 * x1;
    return std::sqrt(3.0) * std::sqrt(2.0) / std::hypot(g0, g1);
  };
  const double want = 0.5 * (std::pow(hand(1, 0), 2) + std::pow(hand(1, 2), 2));
  EXPECT_NEAR(empirical_moment(q, roots, 2.0, false).value, want, 1e-12 * want);
}

TEST(EmpiricalMoment, ErrorsAndInfinity) {
  const auto shape = make_shape(1, DegreeList{2});
  const auto q = SystemCoords::from_monomial_coefficients(shape, {CVector{0.0, 0.0, 1.0}});  // x1^2, double root
  EXPECT_THROW(empirical_moment(q, std::vector<ProjectivePoint>{}, 2.0, false), DomainError);
  const std::vector<ProjectivePoint> root{ProjectivePoint::basis(2, 0)};
  const auto c = empirical_moment(q, root, 2.0, false);
  EXPECT_TRUE(c.rank_deficient);
  EXPECT_TRUE(std::isinf(c.value));
}
