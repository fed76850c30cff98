#pragma once

// Zero sets of single homogeneous equations, sampled through projective lines.
//
// Restricting h to the line spanned by orthonormal (u, v) gives a binary form
// g(s, t) = h(s u + t v) whose d roots in P^1 are the intersection points of
// the line with V_h. Averaging over uniformly random lines and over all d
// intersection points of each line reproduces the volume average over V_h:
// in complex projective space every hypersurface tangent space looks the same
// under the unitary stabilizer of a point, so the Crofton density is constant.
// For n = 1 there is a single line and the result is just the roots of h.

#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "condmoments/bwspace.hpp"
#include "condmoments/cxla.hpp"
#include "condmoments/randgeom.hpp"

namespace condmoments {

inline constexpr int kAberthMaxIterations = 200;
/// Sampled points must satisfy |h(x)| below this multiple of ||h||.
inline constexpr double kZeroTolMembership = 1e-8;

/// g(s, t) = sum_k b_k s^{d-k} t^k
struct BinaryForm {
  int degree = 0;
  CVector coeffs;  // b_0 .. b_d

  Complex operator()(Complex s, Complex t) const {
    Complex acc{};
    Complex sp = 1.0;
    for (int k = degree; k >= 0; --k) {
      acc = acc * t + coeffs[static_cast<std::size_t>(k)] * sp;
      sp *= s;
    }
    return acc;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (const auto& b : coeffs) m = std::max(m, std::abs(b));
    return m;
  }
};

namespace detail {

// Coefficients of the degree-d form whose values at (1, w^m), w = exp(2 pi i / (d+1)),
// are `values`; a discrete Fourier transform since g(1, t) = sum_k b_k t^k.
inline CVector coefficients_from_roots_of_unity(std::span<const Complex> values) {
  const std::size_t m = values.size();
  CVector b(m);
  for (std::size_t k = 0; k < m; ++k) {
    Complex acc{};
    for (std::size_t j = 0; j < m; ++j) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>((j * k) % m) / static_cast<double>(m);
      acc += values[j] * Complex(std::cos(ang), std::sin(ang));
    }
    b[k] = acc / static_cast<double>(m);
  }
  return b;
}

inline Complex root_of_unity(std::size_t j, std::size_t m) {
  const double ang = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(m);
  return {std::cos(ang), std::sin(ang)};
}

}  // namespace detail

/// g(s, t) = h(s u + t v) for a single equation h.
inline BinaryForm restrict_to_line(const SystemCoords& h, std::span<const Complex> u, std::span<const Complex> v) {
  if (h.r() != 1) throw ShapeError("restrict_to_line: expects a single equation");
  const std::size_t vars = h.shape().vars();
  if (u.size() != vars || v.size() != vars) throw ShapeError("restrict_to_line: direction length mismatch");
  const int d = h.degrees()[0];
  const std::size_t nodes = static_cast<std::size_t>(d) + 1;

  CVector values(nodes), x(vars);
  for (std::size_t j = 0; j < nodes; ++j) {
    const Complex w = detail::root_of_unity(j, nodes);
    for (std::size_t k = 0; k < vars; ++k) x[k] = u[k] + w * v[k];
    values[j] = evaluate(h, x)[0];
  }
  BinaryForm g{d, detail::coefficients_from_roots_of_unity(values)};

  // The pure-t node and one off-grid node must agree with direct evaluation.
  const double tol = 1e-9 * std::max(h.norm(), 1e-300);
  const Complex off_s(0.6, -0.3), off_t(-0.2, 0.7);
  for (std::size_t k = 0; k < vars; ++k) x[k] = off_s * u[k] + off_t * v[k];
  if (std::abs(g(0.0, 1.0) - evaluate(h, v)[0]) > tol || std::abs(g(off_s, off_t) - evaluate(h, x)[0]) > tol)
    throw NumericFailure("restrict_to_line: interpolation residual check failed");
  return g;
}

/// All roots of the univariate polynomial sum_k c_k t^k (c_d != 0) by Aberth-Ehrlich.
inline CVector aberth_roots(std::span<const Complex> c, RngStream& rng) {
  const int d = static_cast<int>(c.size()) - 1;
  if (d < 1) throw DomainError("aberth_roots: degree must be >= 1");
  const Complex lead = c[static_cast<std::size_t>(d)];
  if (lead == Complex{}) throw DomainError("aberth_roots: leading coefficient is zero");
  if (d == 1) return {-c[0] / lead};

  double max_ratio = 0.0;
  for (int k = 0; k < d; ++k) max_ratio = std::max(max_ratio, std::abs(c[static_cast<std::size_t>(k)] / lead));
  const double radius = std::max(std::pow(max_ratio, 1.0 / d), 1e-3) * (1.0 + 1e-3);
  const double offset = 2.0 * std::numbers::pi * rng.uniform();
  CVector z(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) z[static_cast<std::size_t>(i)] = std::polar(radius, offset + 2.0 * std::numbers::pi * i / d);

  auto horner = [&](Complex t, Complex& p, Complex& dp, double& scale) {
    p = c[static_cast<std::size_t>(d)];
    dp = 0.0;
    scale = std::abs(p);
    const double at = std::abs(t);
    for (int k = d - 1; k >= 0; --k) {
      dp = dp * t + p;
      p = p * t + c[static_cast<std::size_t>(k)];
      scale = scale * at + std::abs(c[static_cast<std::size_t>(k)]);
    }
  };

  for (int iter = 0; iter < kAberthMaxIterations; ++iter) {
    bool done = true;
    for (int i = 0; i < d; ++i) {
      auto& zi = z[static_cast<std::size_t>(i)];
      Complex p, dp;
      double scale;
      horner(zi, p, dp, scale);
      if (std::abs(p) <= 1e-12 * scale) continue;
      done = false;
      const Complex w = p / dp;
      Complex s{};
      for (int j = 0; j < d; ++j)
        if (j != i) s += 1.0 / (zi - z[static_cast<std::size_t>(j)]);
      zi -= w / (1.0 - w * s);
    }
    if (done) return z;
  }
  throw NumericFailure("aberth_roots: no convergence after " + std::to_string(kAberthMaxIterations) + " iterations");
}

/// The d roots of g in P^1 as unit vectors (s, t), with multiplicity.
inline std::vector<CVector> binary_form_roots(const BinaryForm& g, RngStream& rng) {
  const double scale = g.max_abs_coeff();
  if (scale == 0.0) throw DomainError("binary_form_roots: form is identically zero");
  const auto d = static_cast<std::size_t>(g.degree);

  // Random change of coordinates (s, t) = W (s', t') keeps roots off s' = 0.
  const auto w = haar_unitary(rng, 2);
  CVector values(d + 1);
  for (std::size_t j = 0; j <= d; ++j) {
    const Complex tp = detail::root_of_unity(j, d + 1);
    values[j] = g(w(0, 0) + w(0, 1) * tp, w(1, 0) + w(1, 1) * tp);
  }
  const auto c = detail::coefficients_from_roots_of_unity(values);
  if (std::abs(c[d]) <= 1e-14 * scale) throw NumericFailure("binary_form_roots: root at infinity after rotation");

  std::vector<CVector> out;
  for (const auto& t : aberth_roots(c, rng)) {
    CVector st{w(0, 0) + w(0, 1) * t, w(1, 0) + w(1, 1) * t};
    const double nrm = norm2(st);
    for (auto& z : st) z /= nrm;
    if (std::abs(g(st[0], st[1])) > 1e-9 * scale)
      throw NumericFailure("binary_form_roots: root residual above tolerance");
    out.push_back(std::move(st));
  }
  return out;
}

/// One resample of the random unitary before giving up.
inline std::vector<CVector> binary_form_roots_retry(const BinaryForm& g, RngStream& rng) {
  try {
    return binary_form_roots(g, rng);
  } catch (const NumericFailure&) {
    return binary_form_roots(g, rng);
  }
}

/// Intersection points of V_h with one random projective line.
inline std::vector<ProjectivePoint> sample_line_section(const SystemCoords& h, RngStream& rng) {
  const auto [u, v] = random_projective_line(rng, h.n());
  const auto g = restrict_to_line(h, u, v);
  const double nh = h.norm();
  std::vector<ProjectivePoint> pts;
  CVector x(u.size());
  for (const auto& st : binary_form_roots_retry(g, rng)) {
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = st[0] * u[k] + st[1] * v[k];
    ProjectivePoint p(x);
    if (norm2(evaluate(h, p.rep())) >= kZeroTolMembership * nh)
      throw NumericFailure("sample_line_section: intersection point is not on V_h");
    pts.push_back(std::move(p));
  }
  return pts;
}

/// Points of V_h from `lines` independent uniform lines, d per line.
inline std::vector<ProjectivePoint> sample_variety_points(const SystemCoords& h, RngStream& rng, std::size_t lines) {
  if (h.r() != 1) throw ShapeError("sample_variety_points: expects a single equation");
  if (h.norm() == 0.0) throw DomainError("sample_variety_points: h is zero");
  std::vector<ProjectivePoint> pts;
  for (std::size_t l = 0; l < lines; ++l) {
    auto section = sample_line_section(h, rng);
    for (auto& p : section) pts.push_back(std::move(p));
  }
  return pts;
}

}  // namespace condmoments
