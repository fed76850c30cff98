#pragma once

// Property suites run by `condmoments selftest`. Each suite uses fixed seeds
// and reports the first violated property with its measured error.

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "condmoments/bwspace.hpp"
#include "condmoments/conditioning.hpp"
#include "condmoments/cxla.hpp"
#include "condmoments/experiment.hpp"
#include "condmoments/formulas.hpp"
#include "condmoments/montecarlo.hpp"
#include "condmoments/randgeom.hpp"
#include "condmoments/roots.hpp"

namespace condmoments {

struct SelftestOptions {
  std::uint64_t seed = 0x5e1f7e57ULL;
  double gaussian_variance = 1.0;  // mutation hook: anything but 1 must break the Gaussian suite
  unsigned workers = 4;            // parallel side of the determinism check
};

struct SuiteResult {
  std::string name;
  bool pass = true;
  std::string detail;  // first failing property, or a short summary
};

namespace detail {

class Checker {
 public:
  explicit Checker(std::string name) { res_.name = std::move(name); }

  // Records `what` as failed when err > tol.
  void near(double err, double tol, const std::string& what) {
    if (err <= tol || !res_.pass) return;
    std::ostringstream os;
    os << what << ": error " << err << " > " << tol;
    fail(os.str());
  }
  void ok(bool cond, const std::string& what) {
    if (!cond && res_.pass) fail(what);
  }
  void fail(const std::string& what) {
    res_.pass = false;
    res_.detail = what;
  }
  SuiteResult done(const std::string& summary) {
    if (res_.pass) res_.detail = summary;
    return res_;
  }

 private:
  SuiteResult res_;
};

inline double max_abs(const ComplexMatrix& m) {
  double x = 0.0;
  for (const auto& z : m.entries()) x = std::max(x, std::abs(z));
  return x;
}

inline double dist(const ComplexMatrix& a, const ComplexMatrix& b) { return frobenius_norm(a - b); }

inline double unitarity_error(const ComplexMatrix& u) {
  return dist(u.adjoint() * u, ComplexMatrix::identity(u.cols()));
}

struct Shape2 {
  std::size_t r, c;
};

inline const std::vector<Shape2>& matrix_shapes() {
  static const std::vector<Shape2> s{{1, 1}, {1, 4}, {2, 2}, {2, 5}, {3, 3}, {3, 6}, {4, 2}, {5, 5}};
  return s;
}

// Rank-deficient r x c product of Gaussians with inner dimension k.
inline ComplexMatrix low_rank(RngStream& rng, std::size_t r, std::size_t c, std::size_t k) {
  return gaussian_matrix(rng, r, k) * gaussian_matrix(rng, k, c);
}

}  // namespace detail

inline SuiteResult selftest_penrose(const SelftestOptions& o) {
  detail::Checker ck("penrose");
  RngStream rng(o.seed, 1);
  std::size_t count = 0;
  for (const auto& s : detail::matrix_shapes())
    for (int rep = 0; rep < 4; ++rep) {
      const bool deficient = rep == 3 && std::min(s.r, s.c) > 1;
      const auto m = deficient ? detail::low_rank(rng, s.r, s.c, 1) : gaussian_matrix(rng, s.r, s.c);
      const auto p = pinv(m);
      const double tol = 1e-10 * std::max(1.0, frobenius_norm(m) * frobenius_norm(p)) * frobenius_norm(m);
      const double tolp = 1e-10 * std::max(1.0, frobenius_norm(m) * frobenius_norm(p)) * frobenius_norm(p);
      const std::string tag = std::to_string(s.r) + "x" + std::to_string(s.c) + (deficient ? " rank 1" : "");
      ck.near(detail::dist(m * p * m, m), tol, "M P M = M (" + tag + ")");
      ck.near(detail::dist(p * m * p, p), tolp, "P M P = P (" + tag + ")");
      const auto mp = m * p, pm = p * m;
      ck.near(detail::dist(mp.adjoint(), mp), 1e-10 * std::max(1.0, frobenius_norm(mp)), "(M P)^* = M P (" + tag + ")");
      ck.near(detail::dist(pm.adjoint(), pm), 1e-10 * std::max(1.0, frobenius_norm(pm)), "(P M)^* = P M (" + tag + ")");
      ++count;
    }
  return ck.done(std::to_string(count) + " matrices, all four conditions");
}

inline SuiteResult selftest_svd(const SelftestOptions& o) {
  detail::Checker ck("svd_reconstruction");
  RngStream rng(o.seed, 2);
  for (const auto& s : detail::matrix_shapes()) {
    const auto m = gaussian_matrix(rng, s.r, s.c);
    const auto f = svd(m);
    ComplexMatrix sig(s.r, s.c);
    for (std::size_t k = 0; k < f.singular_values.size(); ++k) sig(k, k) = f.singular_values[k];
    const std::string tag = std::to_string(s.r) + "x" + std::to_string(s.c);
    ck.near(detail::dist(f.u * sig * f.v.adjoint(), m), 1e-12 * frobenius_norm(m) * 10, "U S V^* = M (" + tag + ")");
    ck.near(detail::unitarity_error(f.u), 1e-12, "U unitary (" + tag + ")");
    ck.near(detail::unitarity_error(f.v), 1e-12, "V unitary (" + tag + ")");
    for (std::size_t k = 1; k < f.singular_values.size(); ++k)
      ck.ok(f.singular_values[k] <= f.singular_values[k - 1], "singular values nonincreasing (" + tag + ")");
  }
  return ck.done("U S V^* reconstructs M to 1e-11 relative");
}

inline SuiteResult selftest_euler(const SelftestOptions& o) {
  detail::Checker ck("euler");
  RngStream rng(o.seed, 3);
  const std::vector<std::pair<int, DegreeList>> cases{{1, {3}}, {2, {2, 3}}, {3, {1, 2, 4}}, {4, {3}}};
  for (const auto& [n, d] : cases) {
    const auto h = gaussian_system(rng, n, d);
    const auto x = complex_gaussian_vector(rng, static_cast<std::size_t>(n) + 1);
    const auto jx = jacobian(h, x) * std::span<const Complex>(x);
    const auto hx = evaluate(h, x);
    for (std::size_t i = 0; i < h.r(); ++i) {
      const Complex want = static_cast<double>(d[i]) * hx[i];
      ck.near(std::abs(jx[i] - want), 1e-11 * std::max(1.0, std::abs(want)), "Dh(x) x = d h(x)");
    }
  }
  return ck.done("Dh(x) x = diag(d) h(x) on 4 systems");
}

inline SuiteResult selftest_reproducing_kernel(const SelftestOptions& o) {
  detail::Checker ck("reproducing_kernel");
  RngStream rng(o.seed, 4);
  for (int n = 1; n <= 4; ++n)
    for (int d = 1; d <= 4; ++d) {
      const auto h = gaussian_system(rng, n, DegreeList{d});
      const auto x = complex_gaussian_vector(rng, static_cast<std::size_t>(n) + 1);
      const Complex lhs = bw_inner(h, kernel_poly(x, d));
      const Complex rhs = evaluate(h, x)[0];
      ck.near(std::abs(lhs - rhs), 1e-11 * std::max(1.0, std::abs(rhs)), "<h, <.,x>^d> = h(x)");
      // ||<.,x>^d|| = ||x||^d
      ck.near(std::abs(kernel_poly(x, d).norm() - std::pow(norm2(x), d)), 1e-11 * std::pow(norm2(x), d),
              "||<.,x>^d|| = ||x||^d");
    }
  return ck.done("kernel property for n, d in 1..4");
}

inline SuiteResult selftest_bw_invariance(const SelftestOptions& o) {
  detail::Checker ck("bw_unitary_invariance");
  RngStream rng(o.seed, 5);
  const std::vector<std::pair<int, DegreeList>> cases{{1, {4}}, {2, {2, 3}}, {3, {3}}, {3, {1, 2}}};
  for (const auto& [n, d] : cases) {
    const auto h = gaussian_system(rng, n, d);
    const auto g = gaussian_system(rng, n, d);
    const auto u = haar_unitary(rng, static_cast<std::size_t>(n) + 1);
    const auto hu = rotate_system(h, u), gu = rotate_system(g, u);
    ck.near(std::abs(hu.norm() - h.norm()), 1e-12 * h.norm() * 10, "||h o U|| = ||h||");
    ck.near(std::abs(bw_inner(hu, gu) - bw_inner(h, g)), 1e-11 * h.norm() * g.norm(), "<h o U, g o U> = <h, g>");
    // (h o U^*)(U x) = h(x)
    const auto x = complex_gaussian_vector(rng, static_cast<std::size_t>(n) + 1);
    const auto ux = u * std::span<const Complex>(x);
    const auto a = evaluate(hu, ux), b = evaluate(h, x);
    for (std::size_t i = 0; i < a.size(); ++i)
      ck.near(std::abs(a[i] - b[i]), 1e-11 * std::max(1.0, std::abs(b[i])), "rotated evaluation");
  }
  return ck.done("norm and inner product preserved");
}

inline SuiteResult selftest_mu_invariance(const SelftestOptions& o) {
  detail::Checker ck("mu_invariance");
  RngStream rng(o.seed, 6);
  const std::vector<std::pair<int, DegreeList>> cases{{1, {3}}, {2, {2}}, {3, {2, 3}}, {4, {1, 2, 2}}};
  for (const auto& [n, d] : cases) {
    const ProjectivePoint x(complex_gaussian_vector(rng, static_cast<std::size_t>(n) + 1));
    const auto h = sample_fiber(rng, x, n, d);
    const auto u = haar_unitary(rng, static_cast<std::size_t>(n) + 1);
    const ProjectivePoint ux(u * std::span<const Complex>(x.rep()));
    for (auto norm : {MatrixNorm::Frobenius, MatrixNorm::Operator}) {
      const double base = mu(h, x, norm).value;
      const std::string tag = std::string(" (") + to_string(norm) + ", n=" + std::to_string(n) + ")";
      ck.near(std::abs(mu(rotate_system(h, u), ux, norm).value - base), 1e-9 * base, "mu(h o U^*, U x) = mu(h, x)" + tag);
      ck.near(std::abs(mu(h.scaled(Complex(-2.5, 1.5)), x, norm).value - base), 1e-9 * base, "mu(c h, x) = mu(h, x)" + tag);
      auto xs = x.rep();
      for (auto& z : xs) z *= Complex(0.0, 3.0);
      ck.near(std::abs(mu(h, ProjectivePoint(xs), norm).value - base), 1e-9 * base, "mu(h, c x) = mu(h, x)" + tag);
    }
  }
  return ck.done("unitary and scale invariance, both norms");
}

inline SuiteResult selftest_haar(const SelftestOptions& o) {
  detail::Checker ck("haar");
  RngStream rng(o.seed, 7);
  for (std::size_t n = 1; n <= 6; ++n)
    ck.near(detail::unitarity_error(haar_unitary(rng, n)), 1e-13 * 10, "U^* U = I, n=" + std::to_string(n));
  // Each entry of a Haar unitary has E|u_ij|^2 = 1/n; diagonal phases are uniform (E u_00 = 0).
  const std::size_t n = 3;
  const int trials = 20000;
  double s = 0.0, s2 = 0.0;
  Complex phase{};
  for (int t = 0; t < trials; ++t) {
    const auto u = haar_unitary(rng, n);
    const double a = std::norm(u(0, 0));
    s += a;
    s2 += a * a;
    phase += u(0, 0);
  }
  const double mean = s / trials, sd = std::sqrt((s2 / trials - mean * mean) / trials);
  ck.near(std::abs(mean - 1.0 / n), 5.0 * sd, "E|u_00|^2 = 1/n");
  ck.near(std::abs(phase / static_cast<double>(trials)), 5.0 / std::sqrt(static_cast<double>(n) * trials), "E u_00 = 0");
  return ck.done("unitary to 1e-12; first two entry moments match");
}

inline SuiteResult selftest_roots(const SelftestOptions& o) {
  detail::Checker ck("roots");
  RngStream rng(o.seed, 8);
  for (int d = 1; d <= 6; ++d) {
    // Univariate: roots of h in P^1 and Vieta for the dehomogenized polynomial.
    const auto h = gaussian_system(rng, 1, DegreeList{d});
    const auto pts = sample_variety_points(h, rng, 1);
    ck.ok(pts.size() == static_cast<std::size_t>(d), "n=1 returns d roots, d=" + std::to_string(d));
    for (const auto& p : pts) ck.near(norm2(evaluate(h, p.rep())), 1e-9 * h.norm(), "root membership, n=1");
    // Monomial coefficients are ordered x0^d, x0^{d-1} x1, ..., x1^d; in t = x1/x0 the
    // polynomial is sum_k a_k t^k, so sum of roots = -a_{d-1}/a_d and product = (-1)^d a_0/a_d.
    const auto a = h.monomial_coefficients()[0];
    Complex sum{}, prod = 1.0;
    for (const auto& p : pts) {
      const Complex t = p.rep()[1] / p.rep()[0];
      sum += t;
      prod *= t;
    }
    const Complex ad = a[static_cast<std::size_t>(d)];
    const Complex want_sum = -a[static_cast<std::size_t>(d) - 1] / ad;
    const Complex want_prod = (d % 2 ? -1.0 : 1.0) * a[0] / ad;
    ck.near(std::abs(sum - want_sum), 1e-7 * std::max(1.0, std::abs(want_sum)), "Vieta sum, d=" + std::to_string(d));
    ck.near(std::abs(prod - want_prod), 1e-7 * std::max(1.0, std::abs(want_prod)), "Vieta product, d=" + std::to_string(d));
  }
  for (int n = 2; n <= 4; ++n)
    for (int d = 1; d <= 4; ++d) {
      const auto h = gaussian_system(rng, n, DegreeList{d});
      const auto pts = sample_variety_points(h, rng, 3);
      ck.ok(pts.size() == static_cast<std::size_t>(3 * d), "line sections return d points each");
      for (const auto& p : pts) ck.near(norm2(evaluate(h, p.rep())), 1e-9 * h.norm(), "line-section membership");
    }
  return ck.done("membership, degree count, Vieta");
}

inline SuiteResult selftest_gamma_telescoping(const SelftestOptions&) {
  detail::Checker ck("gamma_telescoping");
  int count = 0;
  for (int n = 1; n <= 6; ++n)
    for (int r = 1; r <= n; ++r)
      for (int variant = 0; variant < 2; ++variant) {
        std::vector<int> dv(static_cast<std::size_t>(r), 2);
        if (variant == 1)
          for (int i = 0; i < r; ++i) dv[static_cast<std::size_t>(i)] = 1 + (i % 3);
        const DegreeList d(dv);
        const double lhs = exmualpha_constant(n, d, 2.0).value * invnor2mdet_value(r, n - r + 1).value;
        const double rhs = main_theorem_value(n, d).value;
        ck.near(std::abs(lhs - rhs), 1e-12 * rhs * 10, "C * invnor2mdet = main theorem, n=" + std::to_string(n) +
                                                        " r=" + std::to_string(r));
        ++count;
      }
  return ck.done(std::to_string(count) + " (n, r, degrees) cases with 1 <= r <= n <= 6");
}

inline SuiteResult selftest_determinism(const SelftestOptions& o) {
  detail::Checker ck("determinism");
  McConfig one;
  one.seed = o.seed;
  one.samples = 4000;
  one.workers = 1;
  McConfig many = one;
  many.workers = std::max(2u, o.workers);
  const auto a = estimate_pinv_moment(2, 4, 2.0, MatrixNorm::Frobenius, one);
  const auto b = estimate_pinv_moment(2, 4, 2.0, MatrixNorm::Frobenius, many);
  ck.ok(a.mean == b.mean && a.stderr_ == b.stderr_, "matrix estimator differs between 1 and N workers");

  // A small suite, run as a report, must give byte-identical CSV.
  const ojson suite_json = ojson::parse(R"({
    "seed": 7,
    "experiments": [
      {"id": "pinv", "estimator": "pinv_moment", "params": {"r": 1, "m": 3, "alpha": 2},
       "samples": 3000, "closed_form": {"id": "pinv_moment", "params": {"r": 1, "m": 3}}},
      {"id": "poly", "estimator": "poly_moment", "params": {"n": 2, "degrees": [2], "alpha": 2},
       "samples": 200, "lines_per_system": 2, "closed_form": {"id": "main_theorem", "params": {"n": 2, "degrees": [2]}}}
    ]})");
  const auto suite = parse_suite(suite_json);
  RunOptions r1, rn;
  r1.workers = 1;
  rn.workers = many.workers;
  const auto c1 = to_csv(run_verify(suite, r1)), cn = to_csv(run_verify(suite, rn));
  ck.ok(fnv1a(c1) == fnv1a(cn), "report CSV hash differs between 1 and N workers");
  return ck.done("identical estimates and report hashes for 1 and " + std::to_string(many.workers) + " workers");
}

inline SuiteResult selftest_gaussian_convention(const SelftestOptions& o) {
  detail::Checker ck("gaussian_convention");
  const int trials = 40000;
  RngStream rng(o.seed, 9, o.gaussian_variance);
  double s = 0.0, s2 = 0.0;
  Complex sq{};
  for (int t = 0; t < trials; ++t) {
    const Complex z = rng.complex_gaussian();
    const double a = std::norm(z);
    s += a;
    s2 += a * a;
    sq += z * z;
  }
  const double mean = s / trials, se = std::sqrt((s2 / trials - mean * mean) / trials);
  ck.near(std::abs(mean - 1.0), 5.0 * se, "E|z|^2 = 1");
  ck.near(std::abs(sq / static_cast<double>(trials)), 5.0 / std::sqrt(static_cast<double>(trials)), "E z^2 = 0");

  // E ||h||^2 = N for the BW Gaussian on H_{(d)}.
  const auto shape = make_shape(2, DegreeList{2, 3});
  const double big_n = static_cast<double>(dim_space(2, shape->degrees));
  const int systems = 4000;
  double hs = 0.0, hs2 = 0.0;
  RngStream srng(o.seed, 10, o.gaussian_variance);
  for (int t = 0; t < systems; ++t) {
    const double v = std::pow(gaussian_system(srng, shape).norm(), 2);
    hs += v;
    hs2 += v * v;
  }
  const double hm = hs / systems, hse = std::sqrt((hs2 / systems - hm * hm) / systems);
  ck.near(std::abs(hm - big_n), 5.0 * hse, "E ||h||^2 = N");
  return ck.done("E|z|^2 = 1, E z^2 = 0, E||h||^2 = N");
}

inline std::vector<std::pair<std::string, std::function<SuiteResult(const SelftestOptions&)>>> selftest_suites() {
  return {{"penrose", selftest_penrose},
          {"svd_reconstruction", selftest_svd},
          {"euler", selftest_euler},
          {"reproducing_kernel", selftest_reproducing_kernel},
          {"bw_unitary_invariance", selftest_bw_invariance},
          {"mu_invariance", selftest_mu_invariance},
          {"haar", selftest_haar},
          {"roots", selftest_roots},
          {"gamma_telescoping", selftest_gamma_telescoping},
          {"determinism", selftest_determinism},
          {"gaussian_convention", selftest_gaussian_convention}};
}

/// Runs every suite; a suite that throws counts as failed with the exception text.
inline std::vector<SuiteResult> run_selftest(const SelftestOptions& o = {}) {
  std::vector<SuiteResult> out;
  for (const auto& [name, fn] : selftest_suites()) {
    try {
      out.push_back(fn(o));
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("exception: ") + e.what()});
    }
  }
  return out;
}

}  // namespace condmoments
