#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "condmoments/roots.hpp"

using namespace condmoments;

namespace {

// Coefficients of prod_k (t_k s - s_k t), lowest power of t first.
CVector from_roots(const std::vector<CVector>& roots) {
  CVector c{1.0};
  for (const auto& st : roots) {
    CVector next(c.size() + 1);
    for (std::size_t k = 0; k < c.size(); ++k) {
      next[k] += st[1] * c[k];
      next[k + 1] -= st[0] * c[k];
    }
    c = next;
  }
  return c;
}

}  // namespace

TEST(Restrict, PureMonomialAndPointwise) {
  const auto shape = make_shape(2, DegreeList{3});
  CVector a(10);
  a[0] = 1.0;
  const auto h = SystemCoords::from_monomial_coefficients(shape, {a});
  const auto g = restrict_to_line(h, CVector{1.0, 0.0, 0.0}, CVector{0.0, 1.0, 0.0});
  EXPECT_NEAR(std::abs(g.coeffs[0] - 1.0), 0.0, 1e-14);
  for (std::size_t k = 1; k <= 3; ++k) EXPECT_NEAR(std::abs(g.coeffs[k]), 0.0, 1e-14);

  RngStream rng(51, 0);
  const auto r = gaussian_system(rng, 2, DegreeList{3});
  const auto [u, v] = random_projective_line(rng, 2);
  const auto gr = restrict_to_line(r, u, v);
  for (int t = 0; t < 10; ++t) {
    const Complex s = rng.complex_gaussian(), tt = rng.complex_gaussian();
    CVector x(3);
    for (std::size_t k = 0; k < 3; ++k) x[k] = s * u[k] + tt * v[k];
    const Complex want = evaluate(r, x)[0];
    EXPECT_LT(std::abs(gr(s, tt) - want), 1e-10 * std::max(1.0, std::abs(want)));
  }
}

TEST(BinaryRoots, ProductOfCoordinates) {
  RngStream rng(52, 0);
  const BinaryForm g{2, CVector{0.0, 1.0, 0.0}};  // s t
  const auto roots = binary_form_roots(g, rng);
  ASSERT_EQ(roots.size(), 2u);
  const ProjectivePoint a(roots[0]), b(roots[1]);
  const auto p10 = ProjectivePoint::basis(2, 0), p01 = ProjectivePoint::basis(2, 1);
  EXPECT_TRUE((a.same_point(p10, 1e-9) && b.same_point(p01, 1e-9)) ||
              (a.same_point(p01, 1e-9) && b.same_point(p10, 1e-9)));
}

TEST(BinaryRoots, RootsOfUnity) {
  RngStream rng(53, 0);
  for (int d = 1; d <= 6; ++d) {
    CVector c(static_cast<std::size_t>(d) + 1);
    c[0] = -1.0;
    c[static_cast<std::size_t>(d)] = 1.0;  // t^d - s^d
    const auto roots = binary_form_roots(BinaryForm{d, c}, rng);
    ASSERT_EQ(roots.size(), static_cast<std::size_t>(d));
    std::vector<bool> hit(static_cast<std::size_t>(d), false);
    for (const auto& st : roots) {
      const Complex t = st[1] / st[0];
      EXPECT_NEAR(std::abs(t), 1.0, 1e-10);
      double ang = std::arg(t);
      if (ang < 0) ang += 2 * std::numbers::pi;
      const auto k = static_cast<std::size_t>(std::lround(ang * d / (2 * std::numbers::pi))) % static_cast<std::size_t>(d);
      hit[k] = true;
    }
    EXPECT_TRUE(std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }));
  }
}

TEST(BinaryRoots, VietaAndBackwardStability) {
  RngStream rng(54, 0);
  for (int d = 2; d <= 6; ++d)
    for (int t = 0; t < 10; ++t) {
      BinaryForm g{d, complex_gaussian_vector(rng, static_cast<std::size_t>(d) + 1)};
      const auto roots = binary_form_roots(g, rng);
      ASSERT_EQ(roots.size(), static_cast<std::size_t>(d));
      if (d == 5) {
        Complex sum{}, prod = 1.0;
        for (const auto& st : roots) {
          sum += st[1] / st[0];
          prod *= st[1] / st[0];
        }
        const Complex bd = g.coeffs[5];
        EXPECT_LT(std::abs(sum + g.coeffs[4] / bd), 1e-8 * std::max(1.0, std::abs(g.coeffs[4] / bd)));
        EXPECT_LT(std::abs(prod + g.coeffs[0] / bd), 1e-8 * std::max(1.0, std::abs(g.coeffs[0] / bd)));
      }
      // Rebuild the form from its roots and compare up to the overall scalar.
      const auto c = from_roots(roots);
      std::size_t big = 0;
      for (std::size_t k = 0; k < c.size(); ++k)
        if (std::abs(g.coeffs[k]) > std::abs(g.coeffs[big])) big = k;
      const Complex lambda = g.coeffs[big] / c[big];
      double err = 0.0;
      for (std::size_t k = 0; k < c.size(); ++k) err = std::max(err, std::abs(lambda * c[k] - g.coeffs[k]));
      EXPECT_LT(err, 1e-8 * g.max_abs_coeff());
    }
}

TEST(BinaryRoots, ZeroFormIsAnError) {
  RngStream rng(55, 0);
  EXPECT_THROW(binary_form_roots(BinaryForm{2, CVector(3)}, rng), DomainError);
}

TEST(Variety, DeterminedCaseReturnsAllRoots) {
  RngStream rng(56, 0);
  const auto h = gaussian_system(rng, 1, DegreeList{4});
  const auto pts = sample_variety_points(h, rng, 1);
  ASSERT_EQ(pts.size(), 4u);
  for (const auto& p : pts) EXPECT_LT(norm2(evaluate(h, p.rep())), 1e-9 * h.norm());
}

TEST(Variety, HyperplaneMembership) {
  RngStream rng(57, 0);
  const auto shape = make_shape(2, DegreeList{1});
  const auto h = SystemCoords::from_monomial_coefficients(shape, {CVector{0.0, 1.0, 0.0}});  // x1
  for (const auto& p : sample_variety_points(h, rng, 20)) EXPECT_LT(std::abs(p.rep()[1]), 1e-9);
}

TEST(Variety, DegreeAndMembershipOnRandomSystems) {
  RngStream rng(58, 0);
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 3), d = 1 + static_cast<int>(rng.next_u64() % 5);
    const auto h = gaussian_system(rng, n, DegreeList{d});
    const auto pts = sample_variety_points(h, rng, 2);
    EXPECT_EQ(pts.size(), static_cast<std::size_t>(2 * d));
    for (const auto& p : pts) EXPECT_LT(norm2(evaluate(h, p.rep())), kZeroTolMembership * h.norm());
  }
}
