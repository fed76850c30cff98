#pragma once

// Condition numbers of a polynomial system at a zero.
//
//   mu_F(h, x)  = ||h|| * || Dh(x)^+ Delta(d_i^{1/2}) ||_F
//   mu_op(h, x) = ||h|| * || Dh(x)^+ Delta(d_i^{1/2}) ||_op
//
// with x a unit representative, so the ||x||^{d_i - 1} factors are all 1. Both
// are +infinity when Dh(x) has numerical rank below r.

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "condmoments/bwspace.hpp"
#include "condmoments/cxla.hpp"

namespace condmoments {

/// h(x) must vanish to within this multiple of ||h||.
inline constexpr double kZeroTol = 1e-8;

enum class MatrixNorm { Frobenius, Operator };

inline const char* to_string(MatrixNorm n) { return n == MatrixNorm::Frobenius ? "frobenius" : "operator"; }

inline MatrixNorm parse_norm(const std::string& s) {
  if (s == "frobenius") return MatrixNorm::Frobenius;
  if (s == "operator") return MatrixNorm::Operator;
  throw DomainError("unknown norm '" + s + "' (expected frobenius or operator)");
}

struct ConditionValue {
  double value = 0.0;
  bool rank_deficient = false;

  static ConditionValue infinite() { return {std::numeric_limits<double>::infinity(), true}; }
};

/// Norm of Dh(x)^+ Delta(d_i^{1/2}) from the Jacobian alone. Returns +inf when
/// the Jacobian is rank deficient.
inline double scaled_pinv_norm(const ComplexMatrix& jac, const DegreeList& degrees, MatrixNorm norm) {
  const auto f = svd(jac);
  if (numerical_rank(f.singular_values) < jac.rows()) return std::numeric_limits<double>::infinity();
  auto p = pinv_from_svd(f);
  for (std::size_t j = 0; j < p.cols(); ++j) {
    const double s = std::sqrt(static_cast<double>(degrees[j]));
    for (std::size_t i = 0; i < p.rows(); ++i) p(i, j) *= s;
  }
  return norm == MatrixNorm::Frobenius ? frobenius_norm(p) : operator_norm(p);
}

namespace detail {

inline ConditionValue condition(const SystemCoords& h, const ProjectivePoint& x, MatrixNorm norm) {
  if (x.dim() != h.shape().vars()) throw ShapeError("condition number: point dimension mismatch");
  const double nh = h.norm();
  const double residual = norm2(evaluate(h, x.rep()));
  if (residual > kZeroTol * nh)
    throw DomainError("condition number: x is not a zero of h (|h(x)| = " + std::to_string(residual) +
                      ", ||h|| = " + std::to_string(nh) + ")");
  const double p = scaled_pinv_norm(jacobian(h, x.rep()), h.degrees(), norm);
  if (!std::isfinite(p)) return ConditionValue::infinite();
  return {nh * p, false};
}

}  // namespace detail

inline ConditionValue mu_frobenius(const SystemCoords& h, const ProjectivePoint& x) {
  return detail::condition(h, x, MatrixNorm::Frobenius);
}

inline ConditionValue mu_operator(const SystemCoords& h, const ProjectivePoint& x) {
  return detail::condition(h, x, MatrixNorm::Operator);
}

inline ConditionValue mu(const SystemCoords& h, const ProjectivePoint& x, MatrixNorm norm) {
  return detail::condition(h, x, norm);
}

/// Mean of mu(h, x)^alpha over the listed zeros, divided by ||h||^alpha when
/// `relative`. Any rank-deficient zero makes the result infinite (flagged).
inline ConditionValue empirical_moment(const SystemCoords& h, std::span<const ProjectivePoint> zeros, double alpha,
                                       bool relative, MatrixNorm norm = MatrixNorm::Frobenius) {
  if (zeros.empty()) throw DomainError("empirical_moment: no zeros given");
  if (!(alpha > 0.0)) throw DomainError("empirical_moment: alpha must be positive");
  const double scale = relative ? h.norm() : 1.0;
  double acc = 0.0;
  for (const auto& x : zeros) {
    const auto c = detail::condition(h, x, norm);
    if (c.rank_deficient) return ConditionValue::infinite();
    acc += std::pow(c.value / scale, alpha);
  }
  return {acc / static_cast<double>(zeros.size()), false};
}

}  // namespace condmoments
