#pragma once

// Homogeneous polynomial systems with the Bombieri-Weyl Hermitian product.
//
// A system h = (h_1, ..., h_r) in n+1 variables x_0..x_n is stored through its
// coordinates in the BW-orthonormal monomial basis: if h_i = sum_j a_j x^j then
// the stored coordinate is c_j = a_j / sqrt(multinomial(d_i; j)). BW norms and
// inner products are then plain Euclidean ones on the coordinate vectors.
//
// Monomials of a fixed degree are ordered lexicographically decreasing in
// (j_0, ..., j_n): x_0^d comes first, x_n^d last. Serialization uses this order.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "condmoments/cxla.hpp"
#include "condmoments/errors.hpp"

namespace condmoments {

/// Multinomial coefficients are exact only while n + d stays at or below this.
inline constexpr int kMaxVarsPlusDegree = 40;

using Exponent = std::vector<int>;

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, const char* what) {
  std::uint64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw DomainError(std::string(what) + ": integer overflow");
  return out;
}

inline std::uint64_t checked_add(std::uint64_t a, std::uint64_t b, const char* what) {
  std::uint64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw DomainError(std::string(what) + ": integer overflow");
  return out;
}

/// Exact binomial coefficient; throws DomainError on overflow.
inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t out = 1;
  for (int i = 1; i <= k; ++i) {
    // out * (n - k + i) is divisible by i at every step
    const std::uint64_t num = checked_mul(out, static_cast<std::uint64_t>(n - k + i), "binomial");
    out = num / static_cast<std::uint64_t>(i);
  }
  return out;
}

/// d! / (j_0! ... j_n!) as a product of binomials.
inline std::uint64_t multinomial(const Exponent& j) {
  std::uint64_t out = 1;
  int partial = 0;
  for (int e : j) {
    partial += e;
    out = checked_mul(out, binomial(partial, e), "multinomial");
  }
  return out;
}

class DegreeList {
 public:
  DegreeList() = default;
  DegreeList(std::initializer_list<int> d) : DegreeList(std::vector<int>(d)) {}
  explicit DegreeList(std::vector<int> d) : d_(std::move(d)) {
    if (d_.empty()) throw DomainError("DegreeList: at least one equation is required");
    for (int di : d_)
      if (di < 1) throw DomainError("DegreeList: every degree must be >= 1");
  }

  std::size_t size() const { return d_.size(); }
  int operator[](std::size_t i) const { return d_[i]; }
  const std::vector<int>& values() const { return d_; }
  auto begin() const { return d_.begin(); }
  auto end() const { return d_.end(); }
  bool operator==(const DegreeList&) const = default;

 private:
  std::vector<int> d_;
};

/// N = sum_i binom(n + d_i, n), the complex dimension of the system space.
inline std::uint64_t dim_space(int n, const DegreeList& degrees) {
  if (n < 1) throw DomainError("dim_space: n must be >= 1");
  std::uint64_t total = 0;
  for (int d : degrees) total = checked_add(total, binomial(n + d, n), "dim_space");
  return total;
}

/// Bezout number: product of the degrees.
inline std::uint64_t bezout(const DegreeList& degrees) {
  std::uint64_t out = 1;
  for (int d : degrees) out = checked_mul(out, static_cast<std::uint64_t>(d), "bezout");
  return out;
}

/// Monomials of degree d in n+1 variables in canonical order.
struct MonomialBasis {
  int n = 0;
  int degree = 0;
  std::vector<Exponent> exponents;
  std::vector<double> sqrt_multinomial;
  std::map<Exponent, std::size_t> index;

  std::size_t size() const { return exponents.size(); }

  std::size_t index_of(const Exponent& j) const {
    auto it = index.find(j);
    if (it == index.end()) throw ShapeError("MonomialBasis: exponent not in basis");
    return it->second;
  }
};

namespace detail {

inline void enumerate_monomials(int vars_left, int degree_left, Exponent& prefix, std::vector<Exponent>& out) {
  if (vars_left == 1) {
    prefix.push_back(degree_left);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int e = degree_left; e >= 0; --e) {
    prefix.push_back(e);
    enumerate_monomials(vars_left - 1, degree_left - e, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace detail

inline std::shared_ptr<const MonomialBasis> make_basis(int n, int d) {
  if (n < 1 || d < 0) throw DomainError("make_basis: need n >= 1 and d >= 0");
  if (n + d > kMaxVarsPlusDegree)
    throw DomainError("make_basis: n + d exceeds the exact-arithmetic limit of " +
                      std::to_string(kMaxVarsPlusDegree));
  auto b = std::make_shared<MonomialBasis>();
  b->n = n;
  b->degree = d;
  Exponent prefix;
  detail::enumerate_monomials(n + 1, d, prefix, b->exponents);
  b->sqrt_multinomial.reserve(b->exponents.size());
  for (std::size_t k = 0; k < b->exponents.size(); ++k) {
    b->sqrt_multinomial.push_back(std::sqrt(static_cast<double>(multinomial(b->exponents[k]))));
    b->index.emplace(b->exponents[k], k);
  }
  return b;
}

/// The space H^{r,n}_{(d)}: ambient n, degrees, and a monomial basis per equation.
struct SystemShape {
  int n = 0;
  DegreeList degrees;
  std::vector<std::shared_ptr<const MonomialBasis>> bases;

  std::size_t r() const { return degrees.size(); }
  std::size_t vars() const { return static_cast<std::size_t>(n) + 1; }
  std::uint64_t dim() const { return dim_space(n, degrees); }

  bool same_space(const SystemShape& o) const { return n == o.n && degrees == o.degrees; }
};

inline std::shared_ptr<const SystemShape> make_shape(int n, const DegreeList& degrees) {
  if (n < 1) throw DomainError("system shape: n must be >= 1");
  if (degrees.size() > static_cast<std::size_t>(n))
    throw DomainError("system shape: r = " + std::to_string(degrees.size()) + " exceeds n = " + std::to_string(n));
  dim_space(n, degrees);
  auto s = std::make_shared<SystemShape>();
  s->n = n;
  s->degrees = degrees;
  std::map<int, std::shared_ptr<const MonomialBasis>> by_degree;
  for (int d : degrees) {
    auto& b = by_degree[d];
    if (!b) b = make_basis(n, d);
    s->bases.push_back(b);
  }
  return s;
}

/// A polynomial system in BW-orthonormal coordinates.
class SystemCoords {
 public:
  SystemCoords(std::shared_ptr<const SystemShape> shape, std::vector<CVector> coords)
      : shape_(std::move(shape)), coords_(std::move(coords)) {
    if (!shape_) throw ShapeError("SystemCoords: null shape");
    if (coords_.size() != shape_->r()) throw ShapeError("SystemCoords: one coordinate vector per equation required");
    for (std::size_t i = 0; i < coords_.size(); ++i) {
      if (coords_[i].size() != shape_->bases[i]->size())
        throw ShapeError("SystemCoords: equation " + std::to_string(i) + " has " + std::to_string(coords_[i].size()) +
                         " coordinates, expected " + std::to_string(shape_->bases[i]->size()));
      if (!all_finite(coords_[i])) throw DomainError("SystemCoords: non-finite coordinate");
    }
  }

  static SystemCoords zero(std::shared_ptr<const SystemShape> shape) {
    std::vector<CVector> c;
    for (const auto& b : shape->bases) c.emplace_back(b->size());
    return SystemCoords(std::move(shape), std::move(c));
  }

  /// Builds a system from monomial coefficients a_j (h_i = sum_j a_j x^j).
  static SystemCoords from_monomial_coefficients(std::shared_ptr<const SystemShape> shape,
                                                 std::vector<CVector> a) {
    if (a.size() != shape->r()) throw ShapeError("from_monomial_coefficients: wrong equation count");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto& b = *shape->bases[i];
      if (a[i].size() != b.size()) throw ShapeError("from_monomial_coefficients: wrong coefficient count");
      for (std::size_t k = 0; k < b.size(); ++k) a[i][k] /= b.sqrt_multinomial[k];
    }
    return SystemCoords(std::move(shape), std::move(a));
  }

  const SystemShape& shape() const { return *shape_; }
  const std::shared_ptr<const SystemShape>& shape_ptr() const { return shape_; }
  int n() const { return shape_->n; }
  std::size_t r() const { return shape_->r(); }
  const DegreeList& degrees() const { return shape_->degrees; }
  const CVector& coords(std::size_t i) const { return coords_[i]; }
  const std::vector<CVector>& all_coords() const { return coords_; }

  std::vector<CVector> monomial_coefficients() const {
    auto a = coords_;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t k = 0; k < a[i].size(); ++k) a[i][k] *= shape_->bases[i]->sqrt_multinomial[k];
    return a;
  }

  double norm() const {
    double s = 0.0;
    for (const auto& c : coords_)
      for (const auto& z : c) s += z.real() * z.real() + z.imag() * z.imag();
    return std::sqrt(s);
  }

  SystemCoords scaled(Complex lambda) const {
    auto c = coords_;
    for (auto& v : c)
      for (auto& z : v) z *= lambda;
    return SystemCoords(shape_, std::move(c));
  }

  /// Single-equation system holding equation i.
  SystemCoords equation(std::size_t i) const {
    return SystemCoords(make_shape(n(), DegreeList{degrees()[i]}), {coords_[i]});
  }

 private:
  std::shared_ptr<const SystemShape> shape_;
  std::vector<CVector> coords_;
};

/// Unit-norm representative of a point of P(C^{n+1}).
class ProjectivePoint {
 public:
  /// Normalizes any nonzero finite vector.
  explicit ProjectivePoint(CVector v) : rep_(std::move(v)) {
    if (rep_.size() < 2) throw ShapeError("ProjectivePoint: need at least two homogeneous coordinates");
    if (!all_finite(rep_)) throw DomainError("ProjectivePoint: non-finite coordinate");
    const double nv = norm2(rep_);
    if (nv == 0.0) throw DomainError("ProjectivePoint: zero vector");
    for (auto& z : rep_) z /= nv;
  }

  static ProjectivePoint basis(std::size_t dim, std::size_t k) {
    CVector e(dim);
    e.at(k) = 1.0;
    return ProjectivePoint(std::move(e));
  }

  const CVector& rep() const { return rep_; }
  std::size_t dim() const { return rep_.size(); }

  /// Same projective point: representatives agree up to a unit phase.
  bool same_point(const ProjectivePoint& o, double tol = 1e-10) const {
    if (o.dim() != dim()) return false;
    return std::abs(1.0 - std::abs(dot(rep_, o.rep_))) <= tol;
  }

 private:
  CVector rep_;
};

namespace detail {

// pow[k][p] = x_k^p for p <= max_degree
inline std::vector<CVector> power_table(std::span<const Complex> x, int max_degree) {
  std::vector<CVector> pw(x.size(), CVector(static_cast<std::size_t>(max_degree) + 1));
  for (std::size_t k = 0; k < x.size(); ++k) {
    pw[k][0] = 1.0;
    for (int p = 1; p <= max_degree; ++p) pw[k][p] = pw[k][p - 1] * x[k];
  }
  return pw;
}

inline int max_degree(const SystemShape& s) { return *std::max_element(s.degrees.begin(), s.degrees.end()); }

inline void check_point(const SystemShape& s, std::span<const Complex> x) {
  if (x.size() != s.vars())
    throw ShapeError("point has " + std::to_string(x.size()) + " coordinates, expected " + std::to_string(s.vars()));
}

}  // namespace detail

/// h(x) for an arbitrary (not necessarily unit) x in C^{n+1}.
inline CVector evaluate(const SystemCoords& h, std::span<const Complex> x) {
  const auto& s = h.shape();
  detail::check_point(s, x);
  const auto pw = detail::power_table(x, detail::max_degree(s));
  CVector out(h.r());
  for (std::size_t i = 0; i < h.r(); ++i) {
    const auto& b = *s.bases[i];
    const auto& c = h.coords(i);
    Complex acc{};
    for (std::size_t m = 0; m < b.size(); ++m) {
      Complex term = c[m] * b.sqrt_multinomial[m];
      const auto& j = b.exponents[m];
      for (std::size_t k = 0; k < j.size(); ++k) term *= pw[k][j[k]];
      acc += term;
    }
    out[i] = acc;
  }
  return out;
}

/// Dh(x): r x (n+1), entry (i, k) = d h_i / d x_k.
inline ComplexMatrix jacobian(const SystemCoords& h, std::span<const Complex> x) {
  const auto& s = h.shape();
  detail::check_point(s, x);
  const auto pw = detail::power_table(x, detail::max_degree(s));
  const std::size_t vars = s.vars();
  ComplexMatrix jac(h.r(), vars);
  for (std::size_t i = 0; i < h.r(); ++i) {
    const auto& b = *s.bases[i];
    const auto& c = h.coords(i);
    for (std::size_t m = 0; m < b.size(); ++m) {
      const Complex a = c[m] * b.sqrt_multinomial[m];
      if (a == Complex{}) continue;
      const auto& j = b.exponents[m];
      for (std::size_t k = 0; k < vars; ++k) {
        if (j[k] == 0) continue;
        Complex term = a * static_cast<double>(j[k]) * pw[k][j[k] - 1];
        for (std::size_t l = 0; l < vars; ++l)
          if (l != k) term *= pw[l][j[l]];
        jac(i, k) += term;
      }
    }
  }
  return jac;
}

/// BW Hermitian product <h, g> = sum_i <h_i, g_i>_{d_i}, linear in h.
inline Complex bw_inner(const SystemCoords& h, const SystemCoords& g) {
  if (!h.shape().same_space(g.shape())) throw ShapeError("bw_inner: systems live in different spaces");
  // One running sum in coordinate order, so bw_inner(h, h) is bit-identical to the squared norm.
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < h.r(); ++i)
    for (std::size_t k = 0; k < h.coords(i).size(); ++k) {
      const Complex a = h.coords(i)[k], b = g.coords(i)[k];
      re += a.real() * b.real() + a.imag() * b.imag();
      im += a.imag() * b.real() - a.real() * b.imag();
    }
  return {re, im};
}

inline double bw_norm(const SystemCoords& h) { return h.norm(); }

/// Reproducing kernel y -> <y, x>^d as a single-equation system in x.size()-1 variables.
inline SystemCoords kernel_poly(std::span<const Complex> x, int d) {
  if (x.size() < 2) throw ShapeError("kernel_poly: need at least two variables");
  if (norm2(x) == 0.0) throw DomainError("kernel_poly: x must be nonzero");
  auto shape = make_shape(static_cast<int>(x.size()) - 1, DegreeList{d});
  CVector xc(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) xc[k] = std::conj(x[k]);
  const auto pw = detail::power_table(xc, d);
  const auto& b = *shape->bases[0];
  CVector c(b.size());
  for (std::size_t m = 0; m < b.size(); ++m) {
    Complex term = b.sqrt_multinomial[m];
    for (std::size_t k = 0; k < xc.size(); ++k) term *= pw[k][b.exponents[m][k]];
    c[m] = term;
  }
  return SystemCoords(std::move(shape), {std::move(c)});
}

/// Delta(d_i^{-1/2}) Dh(e_0) restricted to the columns of x_1..x_n.
inline ComplexMatrix l0_matrix(const SystemCoords& h) {
  CVector e0(h.shape().vars());
  e0[0] = 1.0;
  const auto jac = jacobian(h, e0);
  ComplexMatrix out(h.r(), static_cast<std::size_t>(h.n()));
  for (std::size_t i = 0; i < h.r(); ++i) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(h.degrees()[i]));
    for (std::size_t k = 1; k < jac.cols(); ++k) out(i, k - 1) = scale * jac(i, k);
  }
  return out;
}

/// Coordinates of v -> h(w v) for a square (n+1) x (n+1) matrix w.
inline SystemCoords compose_linear(const SystemCoords& h, const ComplexMatrix& w) {
  const auto& s = h.shape();
  if (w.rows() != s.vars() || w.cols() != s.vars()) throw ShapeError("compose_linear: matrix size mismatch");
  const std::size_t vars = s.vars();
  using Poly = std::map<Exponent, Complex>;

  // x_k = sum_l w(k, l) v_l; powers of each linear form, cached up to the top degree.
  const int top = detail::max_degree(s);
  std::vector<std::vector<Poly>> form_pow(vars, std::vector<Poly>(static_cast<std::size_t>(top) + 1));
  auto multiply = [&](const Poly& p, const Poly& q) {
    Poly out;
    for (const auto& [ep, cp] : p)
      for (const auto& [eq, cq] : q) {
        Exponent e = ep;
        for (std::size_t l = 0; l < vars; ++l) e[l] += eq[l];
        out[e] += cp * cq;
      }
    return out;
  };
  for (std::size_t k = 0; k < vars; ++k) {
    form_pow[k][0][Exponent(vars, 0)] = 1.0;
    Poly form;
    for (std::size_t l = 0; l < vars; ++l) {
      Exponent e(vars, 0);
      e[l] = 1;
      form[e] = w(k, l);
    }
    for (int p = 1; p <= top; ++p) form_pow[k][p] = multiply(form_pow[k][p - 1], form);
  }

  const auto a = h.monomial_coefficients();
  std::vector<CVector> out_a;
  for (std::size_t i = 0; i < h.r(); ++i) {
    const auto& b = *s.bases[i];
    CVector acc(b.size());
    for (std::size_t m = 0; m < b.size(); ++m) {
      if (a[i][m] == Complex{}) continue;
      Poly term{{Exponent(vars, 0), a[i][m]}};
      for (std::size_t k = 0; k < vars; ++k)
        if (b.exponents[m][k] > 0) term = multiply(term, form_pow[k][b.exponents[m][k]]);
      for (const auto& [e, coef] : term) acc[b.index_of(e)] += coef;
    }
    out_a.push_back(std::move(acc));
  }
  return SystemCoords::from_monomial_coefficients(h.shape_ptr(), std::move(out_a));
}

inline nlohmann::json to_json(const SystemCoords& h) {
  nlohmann::json coords = nlohmann::json::array();
  for (std::size_t i = 0; i < h.r(); ++i) {
    nlohmann::json eq = nlohmann::json::array();
    for (const auto& z : h.coords(i)) eq.push_back({z.real(), z.imag()});
    coords.push_back(std::move(eq));
  }
  return {{"n", h.n()}, {"degrees", h.degrees().values()}, {"coords", std::move(coords)}};
}

inline SystemCoords system_from_json(const nlohmann::json& j) {
  const int n = j.at("n").get<int>();
  DegreeList degrees(j.at("degrees").get<std::vector<int>>());
  std::vector<CVector> coords;
  for (const auto& eq : j.at("coords")) {
    CVector c;
    for (const auto& z : eq) c.emplace_back(z.at(0).get<double>(), z.at(1).get<double>());
    coords.push_back(std::move(c));
  }
  return SystemCoords(make_shape(n, degrees), std::move(coords));
}

}  // namespace condmoments
