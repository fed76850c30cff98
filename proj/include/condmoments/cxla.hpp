#pragma once

// Dense complex linear algebra for the small matrices that appear in the
// conditioning computations: one-sided Jacobi SVD, Moore-Penrose
// pseudoinverse, norms, Gram determinants and null-space bases.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "condmoments/errors.hpp"

namespace condmoments {

using Complex = std::complex<double>;
using CVector = std::vector<Complex>;

/// Singular values at or below `kRankTol * sigma_max` count as zero.
inline constexpr double kRankTol = 1e-12;
inline constexpr int kJacobiMaxSweeps = 60;
inline constexpr double kJacobiTol = 1e-14;

inline bool all_finite(std::span<const Complex> v) {
  return std::all_of(v.begin(), v.end(), [](const Complex& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

inline double norm2(std::span<const Complex> v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return std::sqrt(s);
}

/// <a, b> = sum conj(a_i) b_i
inline Complex dot(std::span<const Complex> a, std::span<const Complex> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  Complex s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

/// Dense row-major complex matrix with at least one row and one column.
class ComplexMatrix {
 public:
  ComplexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {
    if (rows == 0 || cols == 0) throw ShapeError("ComplexMatrix: dimensions must be positive");
  }

  ComplexMatrix(std::size_t rows, std::size_t cols, CVector entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (rows == 0 || cols == 0) throw ShapeError("ComplexMatrix: dimensions must be positive");
    if (data_.size() != rows * cols) throw ShapeError("ComplexMatrix: entry count does not match shape");
    if (!all_finite(data_)) throw DomainError("ComplexMatrix: non-finite entry");
  }

  static ComplexMatrix identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  Complex& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const Complex& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const Complex> entries() const { return data_; }
  std::span<const Complex> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  CVector column(std::size_t j) const {
    CVector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  ComplexMatrix adjoint() const {
    ComplexMatrix a(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) a(j, i) = std::conj((*this)(i, j));
    return a;
  }

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols_ != b.rows_) throw ShapeError("matrix product: inner dimensions differ");
    ComplexMatrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const Complex aik = a(i, k);
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  friend CVector operator*(const ComplexMatrix& a, std::span<const Complex> x) {
    if (a.cols_ != x.size()) throw ShapeError("matrix-vector product: length mismatch");
    CVector y(a.rows_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t j = 0; j < a.cols_; ++j) y[i] += a(i, j) * x[j];
    return y;
  }

  friend ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw ShapeError("matrix difference: shapes differ");
    ComplexMatrix c = a;
    for (std::size_t k = 0; k < c.data_.size(); ++k) c.data_[k] -= b.data_[k];
    return c;
  }

  friend ComplexMatrix operator*(Complex s, ComplexMatrix a) {
    for (auto& z : a.data_) z *= s;
    return a;
  }

  bool operator==(const ComplexMatrix&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  CVector data_;
};

/// m = u * diag(singular_values) * v^*, u is rows x rows, v is cols x cols.
struct SvdFactors {
  ComplexMatrix u;
  std::vector<double> singular_values;  // min(rows, cols) entries, nonincreasing
  ComplexMatrix v;
};

inline double frobenius_norm(const ComplexMatrix& m) { return norm2(m.entries()); }

namespace detail {

using Columns = std::vector<CVector>;

// Hestenes one-sided Jacobi on the columns of `g`. Rotations are mirrored into
// `acc` when it is non-null. On return the columns of g are mutually orthogonal.
inline void jacobi_orthogonalize(Columns& g, Columns* acc) {
  const std::size_t k = g.size();
  for (int sweep = 0; sweep < kJacobiMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        double alpha = 0.0, beta = 0.0;
        for (const auto& z : g[p]) alpha += std::norm(z);
        for (const auto& z : g[q]) beta += std::norm(z);
        const Complex gamma = dot(g[p], g[q]);
        const double abs_gamma = std::abs(gamma);
        if (abs_gamma == 0.0 || abs_gamma <= kJacobiTol * std::sqrt(alpha * beta)) continue;
        rotated = true;

        const Complex phase_conj = std::conj(gamma) / abs_gamma;
        const double zeta = (beta - alpha) / (2.0 * abs_gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;

        auto rotate = [&](CVector& a, CVector& b) {
          for (std::size_t i = 0; i < a.size(); ++i) {
            const Complex ap = a[i];
            const Complex bq = b[i] * phase_conj;
            a[i] = c * ap - s * bq;
            b[i] = s * ap + c * bq;
          }
        };
        rotate(g[p], g[q]);
        if (acc) rotate((*acc)[p], (*acc)[q]);
      }
    }
    if (!rotated) return;
  }
  throw NumericFailure("svd: one-sided Jacobi did not converge within " + std::to_string(kJacobiMaxSweeps) +
                       " sweeps");
}

// Extends `cols` (orthonormal vectors in C^m) to an orthonormal basis of C^m by
// pivoted Gram-Schmidt over the standard basis.
inline void complete_basis(Columns& cols, std::size_t m) {
  while (cols.size() < m) {
    CVector best;
    double best_norm = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      CVector e(m);
      e[i] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& c : cols) {
          const Complex proj = dot(c, e);
          for (std::size_t j = 0; j < m; ++j) e[j] -= proj * c[j];
        }
      const double nrm = norm2(e);
      if (nrm > best_norm) {
        best_norm = nrm;
        best = std::move(e);
      }
    }
    for (auto& z : best) z /= best_norm;
    cols.push_back(std::move(best));
  }
}

inline Columns columns_of(const ComplexMatrix& m) {
  Columns c(m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) c[j] = m.column(j);
  return c;
}

inline ComplexMatrix from_columns(const Columns& c, std::size_t rows) {
  ComplexMatrix m(rows, c.size());
  for (std::size_t j = 0; j < c.size(); ++j)
    for (std::size_t i = 0; i < rows; ++i) m(i, j) = c[j][i];
  return m;
}

inline std::vector<std::size_t> descending_order(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

// The tall operand (m or m^*) whose columns Jacobi orthogonalizes.
inline Columns tall_columns(const ComplexMatrix& m) {
  return m.rows() < m.cols() ? columns_of(m.adjoint()) : columns_of(m);
}

}  // namespace detail

/// Singular values only (no factor accumulation), nonincreasing.
inline std::vector<double> singular_values(const ComplexMatrix& m) {
  auto g = detail::tall_columns(m);
  detail::jacobi_orthogonalize(g, nullptr);
  std::vector<double> s(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) s[j] = norm2(g[j]);
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

inline SvdFactors svd(const ComplexMatrix& m) {
  const bool wide = m.rows() < m.cols();
  auto g = detail::tall_columns(m);
  const std::size_t k = g.size();
  const std::size_t tall_rows = g.front().size();

  detail::Columns acc(k, CVector(k));
  for (std::size_t j = 0; j < k; ++j) acc[j][j] = 1.0;
  detail::jacobi_orthogonalize(g, &acc);

  std::vector<double> s(k);
  for (std::size_t j = 0; j < k; ++j) s[j] = norm2(g[j]);
  const auto order = detail::descending_order(s);

  std::vector<double> sorted(k);
  detail::Columns left, right;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = order[j];
    sorted[j] = s[src];
    right.push_back(acc[src]);
    if (s[src] > 0.0) {
      CVector col = g[src];
      for (auto& z : col) z /= s[src];
      left.push_back(std::move(col));
    }
  }
  detail::complete_basis(left, tall_rows);

  // m_tall = left * diag(s) * right^*; m = m_tall or m_tall^*.
  ComplexMatrix left_m = detail::from_columns(left, tall_rows);
  ComplexMatrix right_m = detail::from_columns(right, k);
  if (wide) return SvdFactors{std::move(right_m), std::move(sorted), std::move(left_m)};
  return SvdFactors{std::move(left_m), std::move(sorted), std::move(right_m)};
}

/// Number of singular values above kRankTol * sigma_max.
inline std::size_t numerical_rank(std::span<const double> sv) {
  if (sv.empty() || sv.front() <= 0.0) return 0;
  const double cut = kRankTol * sv.front();
  return static_cast<std::size_t>(std::count_if(sv.begin(), sv.end(), [&](double s) { return s > cut; }));
}

inline std::size_t numerical_rank(const ComplexMatrix& m) { return numerical_rank(singular_values(m)); }

inline ComplexMatrix pinv_from_svd(const SvdFactors& f) {
  const std::size_t rows = f.u.rows(), cols = f.v.rows();
  const std::size_t rank = numerical_rank(f.singular_values);
  ComplexMatrix p(cols, rows);
  for (std::size_t k = 0; k < rank; ++k) {
    const double inv = 1.0 / f.singular_values[k];
    for (std::size_t i = 0; i < cols; ++i) {
      const Complex vik = f.v(i, k) * inv;
      for (std::size_t j = 0; j < rows; ++j) p(i, j) += vik * std::conj(f.u(j, k));
    }
  }
  return p;
}

/// Moore-Penrose pseudoinverse with rank truncation at kRankTol.
inline ComplexMatrix pinv(const ComplexMatrix& m) { return pinv_from_svd(svd(m)); }

inline double operator_norm(const ComplexMatrix& m) { return singular_values(m).front(); }

/// log |det(m m^*)|; -inf when m has an exactly zero singular value.
inline double log_abs_det_gram(const ComplexMatrix& m) {
  if (m.rows() > m.cols()) throw ShapeError("abs_det_gram: requires rows <= cols");
  double acc = 0.0;
  for (double s : singular_values(m)) {
    if (s == 0.0) return -std::numeric_limits<double>::infinity();
    acc += 2.0 * std::log(s);
  }
  return acc;
}

/// |det(m m^*)| = product of squared singular values.
inline double abs_det_gram(const ComplexMatrix& m) { return std::exp(log_abs_det_gram(m)); }

/// Orthonormal basis of ker m as the columns of a cols x (cols - rank) matrix.
/// A square full-rank m has no kernel; that case raises DomainError.
inline ComplexMatrix kernel_basis(const ComplexMatrix& m) {
  if (m.rows() > m.cols()) throw ShapeError("kernel_basis: requires rows <= cols");
  const auto f = svd(m);
  const std::size_t rank = numerical_rank(f.singular_values);
  const std::size_t c = m.cols();
  if (rank == c) throw DomainError("kernel_basis: matrix has trivial kernel");
  ComplexMatrix k(c, c - rank);
  for (std::size_t j = rank; j < c; ++j)
    for (std::size_t i = 0; i < c; ++i) k(i, j - rank) = f.v(i, j);
  return k;
}

}  // namespace condmoments
