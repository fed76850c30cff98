#pragma once

// Randomness for every sampler in the library.
//
// Streams are counter-based: (seed, stream_index) fully determines the draw
// sequence. Monte Carlo drivers give each sample its own stream_index, so the
// result of a run never depends on how samples are spread over threads.
// Normals come from Box-Muller on top of std::mt19937_64, whose output is fixed
// by the standard; fixtures replay bit-for-bit wherever libm agrees on log/sin/cos.
//
// Complex Gaussians follow the E|z|^2 = 1 convention (density pi^{-1} e^{-|z|^2}).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>

#include "condmoments/bwspace.hpp"
#include "condmoments/cxla.hpp"

namespace condmoments {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class RngStream {
 public:
  /// `gaussian_variance` exists for mutation tests of the convention checks;
  /// production code leaves it at 1.
  RngStream(std::uint64_t seed, std::uint64_t stream_index, double gaussian_variance = 1.0)
      : seed_(seed),
        stream_index_(stream_index),
        engine_(splitmix64(seed ^ splitmix64(stream_index ^ 0x5851f42d4c957f2dULL))),
        scale_(std::sqrt(gaussian_variance)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on (0, 1] with 53 random bits.
  double uniform() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    spare_ = rad * std::sin(ang);
    has_spare_ = true;
    return rad * std::cos(ang);
  }

  Complex complex_gaussian() {
    const double re = normal();
    const double im = normal();
    return Complex(re, im) * (scale_ * std::numbers::sqrt2 / 2.0);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 engine_;
  double scale_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline CVector complex_gaussian_vector(RngStream& rng, std::size_t n) {
  if (n < 1) throw DomainError("complex_gaussian_vector: n must be >= 1");
  CVector v(n);
  for (auto& z : v) z = rng.complex_gaussian();
  return v;
}

/// r x m matrix with i.i.d. standard complex Gaussian entries (Ginibre).
inline ComplexMatrix gaussian_matrix(RngStream& rng, std::size_t r, std::size_t m) {
  return ComplexMatrix(r, m, complex_gaussian_vector(rng, r * m));
}

/// Standard Gaussian system: i.i.d. standard complex Gaussian BW coordinates.
inline SystemCoords gaussian_system(RngStream& rng, const std::shared_ptr<const SystemShape>& shape) {
  std::vector<CVector> coords;
  for (const auto& b : shape->bases) coords.push_back(complex_gaussian_vector(rng, b->size()));
  return SystemCoords(shape, std::move(coords));
}

inline SystemCoords gaussian_system(RngStream& rng, int n, const DegreeList& degrees) {
  return gaussian_system(rng, make_shape(n, degrees));
}

namespace detail {

// Modified Gram-Schmidt with one reorthogonalization pass. The R diagonal it
// implies is real positive, so no extra phase normalization is needed for Haar.
inline std::vector<CVector> orthonormalize(std::vector<CVector> cols) {
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t i = 0; i < j; ++i) {
        const Complex proj = dot(cols[i], cols[j]);
        for (std::size_t k = 0; k < cols[j].size(); ++k) cols[j][k] -= proj * cols[i][k];
      }
    const double nrm = norm2(cols[j]);
    if (nrm == 0.0) throw NumericFailure("orthonormalize: dependent columns");
    for (auto& z : cols[j]) z /= nrm;
  }
  return cols;
}

}  // namespace detail

/// Haar-distributed n x n unitary (QR of a Ginibre matrix, R diagonal positive).
inline ComplexMatrix haar_unitary(RngStream& rng, std::size_t n) {
  std::vector<CVector> cols(n);
  for (auto& c : cols) c = complex_gaussian_vector(rng, n);
  cols = detail::orthonormalize(std::move(cols));
  ComplexMatrix u(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) u(i, j) = cols[j][i];
  return u;
}

/// sigma h : v -> h(u^{-1} v) for unitary u.
inline SystemCoords rotate_system(const SystemCoords& h, const ComplexMatrix& u) {
  return compose_linear(h, u.adjoint());
}

/// Standard Gaussian on the fiber V_x = {h : h(x) = 0}, by projecting each
/// equation away from its unit reproducing kernel <., x>^{d_i}.
inline SystemCoords sample_fiber(RngStream& rng, const ProjectivePoint& x,
                                 const std::shared_ptr<const SystemShape>& shape) {
  if (x.dim() != shape->vars()) throw ShapeError("sample_fiber: point dimension mismatch");
  const auto h = gaussian_system(rng, shape);
  const auto values = evaluate(h, x.rep());
  std::vector<CVector> coords = h.all_coords();
  for (std::size_t i = 0; i < shape->r(); ++i) {
    const auto k = kernel_poly(x.rep(), shape->degrees[i]);
    const auto& kc = k.coords(0);
    for (std::size_t m = 0; m < kc.size(); ++m) coords[i][m] -= values[i] * kc[m];
  }
  return SystemCoords(shape, std::move(coords));
}

inline SystemCoords sample_fiber(RngStream& rng, const ProjectivePoint& x, int n, const DegreeList& degrees) {
  return sample_fiber(rng, x, make_shape(n, degrees));
}

/// Orthonormal pair (u, v) in C^{n+1} spanning a uniformly distributed 2-plane.
inline std::pair<CVector, CVector> random_projective_line(RngStream& rng, int n) {
  if (n < 1) throw DomainError("random_projective_line: n must be >= 1");
  const auto dim = static_cast<std::size_t>(n) + 1;
  auto q = detail::orthonormalize({complex_gaussian_vector(rng, dim), complex_gaussian_vector(rng, dim)});
  return {std::move(q[0]), std::move(q[1])};
}

}  // namespace condmoments
