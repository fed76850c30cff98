#pragma once

// Monte Carlo estimators for the moment identities, and their comparison with
// closed forms or with each other.
//
// Every sample i draws from its own RngStream(seed, i) and returns the log of a
// nonnegative integrand. Values are exponentiated against the global maximum
// and reduced by pairwise summation in index order, so results are identical
// for any worker count. When the integrand's second moment is infinite the
// estimate switches to median-of-means.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <algorithm>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "condmoments/bwspace.hpp"
#include "condmoments/conditioning.hpp"
#include "condmoments/cxla.hpp"
#include "condmoments/formulas.hpp"
#include "condmoments/randgeom.hpp"
#include "condmoments/roots.hpp"

namespace condmoments {

enum class EstimateMethod { PlainMean, MedianOfMeans };

inline const char* to_string(EstimateMethod m) {
  return m == EstimateMethod::PlainMean ? "plain-mean" : "median-of-means";
}

inline constexpr int kDefaultBuckets = 32;
inline constexpr std::uint64_t kDefaultMatrixSamples = 100000;
inline constexpr std::uint64_t kDefaultSystems = 10000;
inline constexpr std::size_t kDefaultLinesPerSystem = 8;
/// Abort a polynomial estimate when more than this fraction of line sections fail.
inline constexpr double kMaxLineFailureRate = 1e-3;
/// Relative resolution of double-precision integrands; floors every dispersion.
inline constexpr double kResolutionFloor = 1e-12;

struct McConfig {
  std::uint64_t samples = kDefaultMatrixSamples;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  int buckets = kDefaultBuckets;
  std::optional<EstimateMethod> force_method;
  std::size_t lines_per_system = kDefaultLinesPerSystem;
  double gaussian_variance = 1.0;  // test hook, see RngStream
  bool validate_only = false;       // check preconditions, draw nothing
};

struct EstimateResult {
  double mean = 0.0;
  double stderr_ = 0.0;  // plain: standard error; median-of-means: standard error of the bucket median
  std::uint64_t n_samples = 0;
  EstimateMethod method = EstimateMethod::PlainMean;
  int buckets = 0;
  std::uint64_t seed = 0;
  std::string estimator_id;
  nlohmann::ordered_json params;
};

namespace detail {

inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

/// Evaluates `log_integrand` on samples 0..count-1, each with its own stream.
inline std::vector<double> run_log_samples(std::uint64_t count, const McConfig& cfg,
                                           const std::function<double(RngStream&)>& log_integrand) {
  std::vector<double> out(count);
  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(std::max<std::uint64_t>(count, 1))));
  auto body = [&](unsigned w) {
    for (std::uint64_t i = w; i < count; i += workers) {
      RngStream rng(cfg.seed, i, cfg.gaussian_variance);
      out[i] = log_integrand(rng);
    }
  };
  if (workers == 1) {
    body(0);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        body(w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Mean and dispersion of exp(log_values).
inline std::pair<double, double> summarize_logs(std::span<const double> logs, EstimateMethod method, int buckets) {
  const std::size_t n = logs.size();
  if (n < 2) throw DomainError("estimate: at least two samples are required");
  double top = -std::numeric_limits<double>::infinity();
  for (double l : logs) {
    if (std::isnan(l) || l == std::numeric_limits<double>::infinity())
      throw NumericFailure("estimate: integrand is infinite or NaN at some sample");
    top = std::max(top, l);
  }
  if (top == -std::numeric_limits<double>::infinity()) return {0.0, 0.0};

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(logs[i] - top);
  // exp(top) alone may overflow even when the mean is representable.
  auto scale = [top](double v) { return v == 0.0 ? 0.0 : std::exp(top + std::log(v)); };

  if (method == EstimateMethod::PlainMean) {
    const double m = detail::pairwise_sum(y) / static_cast<double>(n);
    std::vector<double> dev(n);
    for (std::size_t i = 0; i < n; ++i) dev[i] = (y[i] - m) * (y[i] - m);
    const double var = detail::pairwise_sum(dev) / static_cast<double>(n - 1);
    return {scale(m), scale(std::sqrt(var / static_cast<double>(n)))};
  }

  if (buckets < 2 || static_cast<std::size_t>(buckets) > n)
    throw DomainError("median-of-means: need 2 <= buckets <= samples");
  const auto b = static_cast<std::size_t>(buckets);
  std::vector<double> means(b);
  for (std::size_t k = 0; k < b; ++k) {
    const std::size_t lo = k * n / b, hi = (k + 1) * n / b;
    means[k] = detail::pairwise_sum(std::span<const double>(y).subspan(lo, hi - lo)) / static_cast<double>(hi - lo);
  }
  const double mu = detail::pairwise_sum(means) / static_cast<double>(b);
  double ss = 0.0;
  for (double m : means) ss += (m - mu) * (m - mu);
  const double sd = std::sqrt(ss / static_cast<double>(b - 1));
  // Standard error of the median of b roughly normal bucket means.
  const double se = std::sqrt(std::numbers::pi / 2.0) * sd / std::sqrt(static_cast<double>(b));
  return {scale(detail::median(std::move(means))), scale(se)};
}

namespace detail {

inline EstimateResult run_estimator(std::string id, nlohmann::ordered_json params, const McConfig& cfg,
                                    std::uint64_t samples, bool variance_finite,
                                    const std::function<double(RngStream&)>& log_integrand) {
  if (cfg.validate_only) return EstimateResult{0.0, 0.0, 0, EstimateMethod::PlainMean, 0, cfg.seed, std::move(id), std::move(params)};
  const EstimateMethod method =
      cfg.force_method.value_or(variance_finite ? EstimateMethod::PlainMean : EstimateMethod::MedianOfMeans);
  const auto logs = run_log_samples(samples, cfg, log_integrand);
  const auto [mean, se] = summarize_logs(logs, method, cfg.buckets);
  return EstimateResult{mean,
                        se,
                        samples,
                        method,
                        method == EstimateMethod::MedianOfMeans ? cfg.buckets : 0,
                        cfg.seed,
                        std::move(id),
                        std::move(params)};
}

inline double log_pinv_norm(std::span<const double> sv, MatrixNorm norm) {
  const double smin = sv.back();
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  if (norm == MatrixNorm::Operator) return -std::log(smin);
  double s = 0.0;
  for (double x : sv) s += 1.0 / (x * x);
  return 0.5 * std::log(s);
}

inline double log_gram(std::span<const double> sv) {
  double acc = 0.0;
  for (double s : sv) acc += 2.0 * std::log(s);
  return acc;
}

inline void require_positive_alpha(double alpha, const char* where) {
  if (!(alpha > 0.0)) throw DomainError(std::string(where) + ": requires alpha > 0");
}

}  // namespace detail

/// E ||v||^alpha, v standard Gaussian in C^n. Finite for alpha > -2n.
inline EstimateResult estimate_espnorm(int n, double alpha, const McConfig& cfg) {
  if (n < 1) throw DomainError("espnorm estimator: n must be >= 1");
  if (!(alpha > -2.0 * n)) throw DomainError("espnorm estimator: requires alpha > -2n for a finite mean");
  return detail::run_estimator("espnorm", {{"n", n}, {"alpha", alpha}}, cfg, cfg.samples, alpha > -1.0 * n,
                               [=](RngStream& rng) {
                                 double s = 0.0;
                                 for (const auto& z : complex_gaussian_vector(rng, static_cast<std::size_t>(n)))
                                   s += std::norm(z);
                                 return 0.5 * alpha * std::log(s);
                               });
}

/// E ||M^+||^alpha over r x m Ginibre. Finite for alpha < 2(m-r+1).
inline EstimateResult estimate_pinv_moment(int r, int m, double alpha, MatrixNorm norm, const McConfig& cfg) {
  if (r < 1 || m < r) throw DomainError("pinv_moment estimator: requires 1 <= r <= m");
  detail::require_positive_alpha(alpha, "pinv_moment estimator");
  const double limit = 2.0 * (m - r + 1);
  if (!(alpha < limit))
    throw DomainError("pinv_moment estimator: requires alpha < 2(m-r+1) = " + std::to_string(limit));
  return detail::run_estimator("pinv_moment", {{"r", r}, {"m", m}, {"alpha", alpha}, {"norm", to_string(norm)}}, cfg,
                               cfg.samples, 2.0 * alpha < limit, [=](RngStream& rng) {
                                 const auto sv = singular_values(gaussian_matrix(rng, r, m));
                                 return alpha * detail::log_pinv_norm(sv, norm);
                               });
}

/// E ||A^+||^alpha |det A A^*| over r x n Ginibre. Finite for alpha < 2(n-r+2).
inline EstimateResult estimate_detweighted_rect(int r, int n, double alpha, MatrixNorm norm, const McConfig& cfg) {
  if (r < 1 || n < r) throw DomainError("detweighted_rect estimator: requires 1 <= r <= n");
  detail::require_positive_alpha(alpha, "detweighted_rect estimator");
  const double limit = 2.0 * (n - r + 2);
  if (!(alpha < limit))
    throw DomainError("detweighted_rect estimator: requires alpha < 2(n-r+2) = " + std::to_string(limit));
  return detail::run_estimator("detweighted_rect", {{"r", r}, {"n", n}, {"alpha", alpha}, {"norm", to_string(norm)}},
                               cfg, cfg.samples, alpha < n - r + 3.0, [=](RngStream& rng) {
                                 const auto sv = singular_values(gaussian_matrix(rng, r, n));
                                 return alpha * detail::log_pinv_norm(sv, norm) + detail::log_gram(sv);
                               });
}

/// E ||B^{-1}||^alpha |det B|^{2k} over r x r Ginibre. Finite for alpha < 2k + 2.
inline EstimateResult estimate_detweighted_square_k(int r, double k, double alpha, MatrixNorm norm,
                                                    const McConfig& cfg) {
  if (r < 1) throw DomainError("detweighted_square estimator: r must be >= 1");
  if (!(k >= 0.0)) throw DomainError("detweighted_square estimator: k must be >= 0");
  detail::require_positive_alpha(alpha, "detweighted_square estimator");
  const double limit = 2.0 * k + 2.0;
  if (!(alpha < limit))
    throw DomainError("detweighted_square estimator: requires alpha < 2k+2 = " + std::to_string(limit));
  return detail::run_estimator("detweighted_square",
                               {{"r", r}, {"k", k}, {"alpha", alpha}, {"norm", to_string(norm)}}, cfg, cfg.samples,
                               alpha < 2.0 * k + 1.0, [=](RngStream& rng) {
                                 const auto sv = singular_values(gaussian_matrix(rng, r, r));
                                 return alpha * detail::log_pinv_norm(sv, norm) + k * detail::log_gram(sv);
                               });
}

/// Weight exponent 2(n_ambient - r + 1), as in the general moment theorem.
inline EstimateResult estimate_detweighted_square(int r, int n_ambient, double alpha, MatrixNorm norm,
                                                  const McConfig& cfg) {
  if (n_ambient < r) throw DomainError("detweighted_square estimator: requires r <= n_ambient");
  return estimate_detweighted_square_k(r, n_ambient - r + 1, alpha, norm, cfg);
}

/// E ||v||^{2 alpha} ||P v||^beta with P dropping the last of n coordinates.
inline EstimateResult estimate_espnormrest(int n, int alpha, double beta, const McConfig& cfg) {
  if (n < 2) throw DomainError("espnormrest estimator: n must be >= 2");
  if (alpha < 0) throw DomainError("espnormrest estimator: alpha must be a nonnegative integer");
  if (!(beta > -2.0 * (n - 1))) throw DomainError("espnormrest estimator: requires beta > -2(n-1)");
  return detail::run_estimator("espnormrest", {{"n", n}, {"alpha", alpha}, {"beta", beta}}, cfg, cfg.samples,
                               beta > -1.0 * (n - 1), [=](RngStream& rng) {
                                 const auto v = complex_gaussian_vector(rng, static_cast<std::size_t>(n));
                                 double head = 0.0;
                                 for (int k = 0; k + 1 < n; ++k) head += std::norm(v[static_cast<std::size_t>(k)]);
                                 const double all = head + std::norm(v.back());
                                 return alpha * std::log(all) + 0.5 * beta * std::log(head);
                               });
}

/// E over Gaussian systems of the zero-set average of mu^alpha (or (mu/||h||)^alpha
/// when `relative`). Single equations only; zero sets are sampled by line sections,
/// `cfg.samples` systems with `cfg.lines_per_system` lines each (one line when n = 1).
inline EstimateResult estimate_poly_moment(int n, const DegreeList& degrees, double alpha, bool relative,
                                           MatrixNorm norm, const McConfig& cfg) {
  if (degrees.size() != 1) throw DomainError("poly_moment estimator: only single equations (r = 1) are supported");
  if (n < 1) throw DomainError("poly_moment estimator: n must be >= 1");
  const int r = 1;
  const double limit = 2.0 * (n - r + 2);
  if (!(alpha > 0.0 && alpha < limit))
    throw DomainError("poly_moment estimator: requires 0 < alpha < 2(n-r+2) = " + std::to_string(limit));
  if (cfg.lines_per_system < 1) throw DomainError("poly_moment estimator: lines_per_system must be >= 1");

  const auto shape = make_shape(n, degrees);
  const std::size_t lines = n == 1 ? 1 : cfg.lines_per_system;
  std::atomic<std::uint64_t> attempts{0}, failures{0};

  auto integrand = [&](RngStream& rng) {
    const auto h = gaussian_system(rng, shape);
    const double nh = h.norm();
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t l = 0; l < lines; ++l) {
      std::vector<ProjectivePoint> pts;
      for (int attempt = 0;; ++attempt) {
        ++attempts;
        try {
          pts = sample_line_section(h, rng);
          break;
        } catch (const NumericFailure&) {
          ++failures;
          if (attempt == 2) throw NumericFailure("poly_moment estimator: three consecutive line sections failed");
        }
      }
      for (const auto& x : pts) {
        const auto c = mu(h, x, norm);
        if (c.rank_deficient) throw NumericFailure("poly_moment estimator: sampled a singular zero");
        acc += std::pow(relative ? c.value / nh : c.value, alpha);
        ++count;
      }
    }
    return std::log(acc / static_cast<double>(count));
  };

  auto result = detail::run_estimator(
      relative ? "poly_moment_relative" : "poly_moment",
      {{"n", n}, {"degrees", degrees.values()}, {"alpha", alpha}, {"relative", relative}, {"norm", to_string(norm)},
       {"lines_per_system", lines}},
      cfg, cfg.samples, 2.0 * alpha < limit, integrand);
  if (static_cast<double>(failures) > kMaxLineFailureRate * static_cast<double>(attempts))
    throw NumericFailure("poly_moment estimator: " + std::to_string(failures.load()) + " of " +
                         std::to_string(attempts.load()) + " line sections failed");
  return result;
}

/// Estimate against a closed form or against another (scaled) estimate.
struct Comparison {
  EstimateResult estimate;
  double estimate_scale = 1.0;
  std::optional<FormulaValue> closed_form;
  std::optional<EstimateResult> reference;
  double reference_scale = 1.0;
  double target = 0.0;  // closed form, or scaled reference mean
  double sigma = 0.0;   // combined dispersion of the difference
  double z_score = 0.0;
  bool pass = false;
  double tolerance_sigmas = 3.0;
};

namespace detail {

inline void finish(Comparison& c, double lhs) {
  // Differences below double resolution of the values themselves are not evidence.
  const double floor = kResolutionFloor * std::max(std::abs(c.target), std::abs(lhs));
  const double diff = lhs - c.target;
  if (c.sigma == 0.0)
    c.z_score = std::abs(diff) <= floor ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  else
    c.z_score = diff / std::sqrt(c.sigma * c.sigma + floor * floor);
  c.pass = std::abs(c.z_score) <= c.tolerance_sigmas;
}

}  // namespace detail

/// z = (mean - closed form) / stderr; pass iff |z| <= tolerance_sigmas.
inline Comparison compare(const EstimateResult& est, const FormulaValue& cf, double tolerance_sigmas) {
  Comparison c;
  c.estimate = est;
  c.closed_form = cf;
  c.target = cf.value;
  c.sigma = est.stderr_;
  c.tolerance_sigmas = tolerance_sigmas;
  detail::finish(c, est.mean);
  return c;
}

/// z = (sa * a - sb * b) / sqrt((sa se_a)^2 + (sb se_b)^2) for independent estimates.
inline Comparison compare_estimates(const EstimateResult& a, double scale_a, const EstimateResult& b, double scale_b,
                                    double tolerance_sigmas) {
  Comparison c;
  c.estimate = a;
  c.estimate_scale = scale_a;
  c.reference = b;
  c.reference_scale = scale_b;
  c.target = scale_b * b.mean;
  c.sigma = std::hypot(scale_a * a.stderr_, scale_b * b.stderr_);
  c.tolerance_sigmas = tolerance_sigmas;
  detail::finish(c, scale_a * a.mean);
  return c;
}

inline nlohmann::ordered_json to_json(const EstimateResult& e) {
  return {{"estimator_id", e.estimator_id},
          {"params", e.params},
          {"mean", e.mean},
          {"stderr", e.stderr_},
          {"n_samples", e.n_samples},
          {"method", to_string(e.method)},
          {"buckets", e.buckets},
          {"seed", e.seed}};
}

inline nlohmann::ordered_json to_json(const Comparison& c) {
  nlohmann::ordered_json j{{"estimate", to_json(c.estimate)}, {"estimate_scale", c.estimate_scale}};
  if (c.closed_form) j["closed_form"] = to_json(*c.closed_form);
  if (c.reference) {
    j["reference"] = to_json(*c.reference);
    j["reference_scale"] = c.reference_scale;
  }
  j["target"] = c.target;
  j["sigma"] = c.sigma;
  j["z_score"] = std::isfinite(c.z_score) ? nlohmann::ordered_json(c.z_score) : nlohmann::ordered_json(c.z_score > 0 ? "inf" : "-inf");
  j["tolerance_sigmas"] = c.tolerance_sigmas;
  j["pass"] = c.pass;
  return j;
}

}  // namespace condmoments
