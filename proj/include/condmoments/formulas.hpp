#pragma once

// Closed-form moment identities for Gaussian matrices and polynomial systems,
// evaluated through log-Gamma so that ratios at large arguments stay finite.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "condmoments/bwspace.hpp"
#include "condmoments/errors.hpp"

namespace condmoments {

struct FormulaValue {
  double value = 0.0;
  double log_value = 0.0;
  std::string formula_id;
  nlohmann::ordered_json params;

  static FormulaValue from_log(double log_value, std::string id, nlohmann::ordered_json params) {
    return {std::exp(log_value), log_value, std::move(id), std::move(params)};
  }
};

/// log Gamma(x) for x > 0; poles and the negative axis are domain errors here
/// because every identity in this module needs positive arguments.
inline double log_gamma(double x, const char* where) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw DomainError(std::string(where) + ": Gamma argument " + std::to_string(x) + " is not positive");
  return std::lgamma(x);
}

/// E ||v||^alpha for v standard Gaussian in C^n: Gamma(n + alpha/2) / Gamma(n).
inline FormulaValue espnorm_value(int n, double alpha) {
  if (n < 1) throw DomainError("espnorm: n must be >= 1");
  if (!(alpha > -2.0 * n)) throw DomainError("espnorm: requires alpha > -2n");
  const double lv = log_gamma(n + alpha / 2.0, "espnorm") - log_gamma(n, "espnorm");
  return FormulaValue::from_log(lv, "espnorm", {{"n", n}, {"alpha", alpha}});
}

/// E ||v||^{2 alpha} ||P v||^beta, P dropping the last coordinate, in two forms.
/// The closed form only matches the binomial sum when beta = 2.
struct EspnormrestForms {
  FormulaValue closed_form;
  FormulaValue sum_form;

  bool agree(double rel_tol = 1e-12) const {
    return std::abs(closed_form.value - sum_form.value) <= rel_tol * std::abs(sum_form.value);
  }
};

inline EspnormrestForms espnormrest_value(int n, int alpha, double beta) {
  if (n < 2) throw DomainError("espnormrest: n must be >= 2");
  if (alpha < 0) throw DomainError("espnormrest: alpha must be a nonnegative integer");
  if (!(2.0 * alpha + beta > 1.0 - 2.0 * n)) throw DomainError("espnormrest: requires 2 alpha + beta > 1 - 2n");
  const nlohmann::ordered_json params{{"n", n}, {"alpha", alpha}, {"beta", beta}};

  const double closed = log_gamma(n + alpha + beta / 2.0, "espnormrest closed form") - std::log(static_cast<double>(n)) -
                        log_gamma(n - 1, "espnormrest closed form");

  // sum_i alpha!/(alpha-i)! * Gamma(n-1+alpha+beta/2-i) / Gamma(n-1), combined with log-sum-exp
  std::vector<double> terms;
  for (int i = 0; i <= alpha; ++i)
    terms.push_back(log_gamma(alpha + 1, "espnormrest") - log_gamma(alpha - i + 1, "espnormrest") +
                    log_gamma(n - 1 + alpha + beta / 2.0 - i, "espnormrest sum form") -
                    log_gamma(n - 1, "espnormrest"));
  const double top = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);

  return {FormulaValue::from_log(closed, "espnormrest_closed", params),
          FormulaValue::from_log(top + std::log(acc), "espnormrest_sum", params)};
}

/// E ||A^{-1}||_F^2 |det A|^{2k} over r x r Ginibre: (r/k) prod_{i=1}^r Gamma(k+i)/Gamma(i).
inline FormulaValue invnor2mdet_value(int r, double k) {
  if (r < 1) throw DomainError("invnor2mdet: r must be >= 1");
  if (!(k > 0.0)) throw DomainError("invnor2mdet: k must be positive");
  double lv = std::log(static_cast<double>(r)) - std::log(k);
  for (int i = 1; i <= r; ++i) lv += log_gamma(k + i, "invnor2mdet") - log_gamma(i, "invnor2mdet");
  return FormulaValue::from_log(lv, "invnor2mdet", {{"r", r}, {"k", k}});
}

inline void check_underdetermined(int n, const DegreeList& degrees, const char* where) {
  if (n < 1) throw DomainError(std::string(where) + ": n must be >= 1");
  if (degrees.size() > static_cast<std::size_t>(n))
    throw DomainError(std::string(where) + ": requires r = len(degrees) <= n");
}

/// Expected second moment of mu_F averaged over the zero set: (N-1) r / (n-r+1).
inline FormulaValue main_theorem_value(int n, const DegreeList& degrees) {
  check_underdetermined(n, degrees, "main_theorem");
  const double big_n = static_cast<double>(dim_space(n, degrees));
  const double r = static_cast<double>(degrees.size());
  const double v = (big_n - 1.0) * r / (n - r + 1.0);
  return FormulaValue::from_log(std::log(v), "main_theorem", {{"n", n}, {"degrees", degrees.values()}});
}

/// Gamma(N)/Gamma(N - alpha/2) prod_{i=1}^{n-r+1} Gamma(i)/Gamma(r+i), for 0 < alpha < 2(n-r+2).
inline FormulaValue exmualpha_constant(int n, const DegreeList& degrees, double alpha) {
  check_underdetermined(n, degrees, "exmualpha_constant");
  const int r = static_cast<int>(degrees.size());
  if (!(alpha > 0.0 && alpha < 2.0 * (n - r + 2)))
    throw DomainError("exmualpha_constant: requires 0 < alpha < 2(n-r+2) = " + std::to_string(2 * (n - r + 2)));
  const double big_n = static_cast<double>(dim_space(n, degrees));
  if (!(alpha / 2.0 < big_n)) throw DomainError("exmualpha_constant: requires alpha/2 < N");
  double lv = log_gamma(big_n, "exmualpha_constant") - log_gamma(big_n - alpha / 2.0, "exmualpha_constant");
  for (int i = 1; i <= n - r + 1; ++i) lv += log_gamma(i, "exmualpha_constant") - log_gamma(r + i, "exmualpha_constant");
  return FormulaValue::from_log(lv, "exmualpha_constant",
                                {{"n", n}, {"degrees", degrees.values()}, {"alpha", alpha}});
}

/// E ||M^+||_F^2 over r x m Ginibre: r / (m - r).
inline FormulaValue pinv_moment_value(int r, int m) {
  if (r < 1) throw DomainError("pinv_moment: r must be >= 1");
  if (m <= r) throw DomainError("pinv_moment: requires m > r");
  return FormulaValue::from_log(std::log(static_cast<double>(r) / (m - r)), "pinv_moment", {{"r", r}, {"m", m}});
}

/// Gamma(n-r+1)/Gamma(n+1): converts the determinant-weighted (0|A) average
/// over r x n into the plain average over r x (n+1).
inline FormulaValue linvar_factor(int r, int n) {
  if (r < 1 || n < r) throw DomainError("linvar_factor: requires 1 <= r <= n");
  return FormulaValue::from_log(log_gamma(n - r + 1, "linvar_factor") - log_gamma(n + 1, "linvar_factor"),
                                "linvar_factor", {{"r", r}, {"n", n}});
}

/// prod_{i=1}^{n-r} Gamma(i)/Gamma(r+i): kernel-variety weight for r x n matrices.
inline FormulaValue kervar_factor(int r, int n) {
  if (r < 1 || n < r) throw DomainError("kervar_factor: requires 1 <= r <= n");
  double lv = 0.0;
  for (int i = 1; i <= n - r; ++i) lv += log_gamma(i, "kervar_factor") - log_gamma(r + i, "kervar_factor");
  return FormulaValue::from_log(lv, "kervar_factor", {{"r", r}, {"n", n}});
}

/// Gamma(N)/Gamma(N - alpha/2): ratio of absolute to relative moments.
inline FormulaValue moment_rescaling(int n, const DegreeList& degrees, double alpha) {
  check_underdetermined(n, degrees, "moment_rescaling");
  const double big_n = static_cast<double>(dim_space(n, degrees));
  if (!(alpha / 2.0 < big_n)) throw DomainError("moment_rescaling: requires alpha/2 < N");
  return FormulaValue::from_log(
      log_gamma(big_n, "moment_rescaling") - log_gamma(big_n - alpha / 2.0, "moment_rescaling"), "moment_rescaling",
      {{"n", n}, {"degrees", degrees.values()}, {"alpha", alpha}});
}

/// (N-1) / ((N~-1)(n-r+1)), N~ the dimension of the determined space H^{r,r}_{(d)}:
/// underdetermined second moment over the determined one.
inline FormulaValue determined_ratio(int n, const DegreeList& degrees) {
  check_underdetermined(n, degrees, "determined_ratio");
  const int r = static_cast<int>(degrees.size());
  const double big_n = static_cast<double>(dim_space(n, degrees));
  const double det_n = static_cast<double>(dim_space(r, degrees));
  const double v = (big_n - 1.0) / ((det_n - 1.0) * (n - r + 1));
  return FormulaValue::from_log(std::log(v), "determined_ratio", {{"n", n}, {"degrees", degrees.values()}});
}

/// vol P(C^{n+1}) = pi^n / Gamma(n+1)
inline double log_vol_projective(int n) {
  if (n < 0) throw DomainError("vol_projective: n must be >= 0");
  return n * std::log(std::numbers::pi) - log_gamma(n + 1, "vol_projective");
}

/// vol G(k, l) = pi^{k(l-k)} prod_{i=1}^k Gamma(i)/Gamma(l-k+i)
inline double log_vol_grassmann(int k, int l) {
  if (!(1 <= k && k < l)) throw DomainError("vol_grassmann: requires 1 <= k < l");
  double lv = k * (l - k) * std::log(std::numbers::pi);
  for (int i = 1; i <= k; ++i) lv += log_gamma(i, "vol_grassmann") - log_gamma(l - k + i, "vol_grassmann");
  return lv;
}

/// vol V_h = D pi^{n-r} / Gamma(n-r+1) for h outside the discriminant.
inline double log_vol_variety(int n, const DegreeList& degrees) {
  check_underdetermined(n, degrees, "vol_variety");
  const int r = static_cast<int>(degrees.size());
  return std::log(static_cast<double>(bezout(degrees))) + log_vol_projective(n - r);
}

struct Volumes {
  FormulaValue projective;
  FormulaValue grassmann;
  FormulaValue variety;
};

inline Volumes volumes(int n, int k, int l, const DegreeList& degrees) {
  return {FormulaValue::from_log(log_vol_projective(n), "vol_projective", {{"n", n}}),
          FormulaValue::from_log(log_vol_grassmann(k, l), "vol_grassmann", {{"k", k}, {"l", l}}),
          FormulaValue::from_log(log_vol_variety(n, degrees), "vol_variety",
                                 {{"n", n}, {"degrees", degrees.values()}})};
}

namespace detail {

inline DegreeList degrees_param(const nlohmann::json& p) {
  return DegreeList(p.at("degrees").get<std::vector<int>>());
}

}  // namespace detail

/// Identifiers accepted by evaluate_formula.
inline const std::vector<std::string>& formula_ids() {
  static const std::vector<std::string> ids{
      "espnorm",         "espnormrest_closed", "espnormrest_sum", "invnor2mdet",   "main_theorem",
      "exmualpha_constant", "pinv_moment",     "linvar_factor",   "kervar_factor", "moment_rescaling",
      "determined_ratio",   "vol_projective",  "vol_grassmann",   "vol_variety"};
  return ids;
}

/// Evaluates a formula by identifier from a JSON parameter record.
inline FormulaValue evaluate_formula(const std::string& id, const nlohmann::json& p) {
  try {
    if (id == "espnorm") return espnorm_value(p.at("n").get<int>(), p.at("alpha").get<double>());
    if (id == "espnormrest_closed" || id == "espnormrest_sum") {
      const auto forms = espnormrest_value(p.at("n").get<int>(), p.at("alpha").get<int>(), p.at("beta").get<double>());
      return id == "espnormrest_closed" ? forms.closed_form : forms.sum_form;
    }
    if (id == "invnor2mdet") return invnor2mdet_value(p.at("r").get<int>(), p.at("k").get<double>());
    if (id == "main_theorem") return main_theorem_value(p.at("n").get<int>(), detail::degrees_param(p));
    if (id == "exmualpha_constant")
      return exmualpha_constant(p.at("n").get<int>(), detail::degrees_param(p), p.at("alpha").get<double>());
    if (id == "pinv_moment") return pinv_moment_value(p.at("r").get<int>(), p.at("m").get<int>());
    if (id == "linvar_factor") return linvar_factor(p.at("r").get<int>(), p.at("n").get<int>());
    if (id == "kervar_factor") return kervar_factor(p.at("r").get<int>(), p.at("n").get<int>());
    if (id == "moment_rescaling")
      return moment_rescaling(p.at("n").get<int>(), detail::degrees_param(p), p.at("alpha").get<double>());
    if (id == "determined_ratio") return determined_ratio(p.at("n").get<int>(), detail::degrees_param(p));
    if (id == "vol_projective") {
      const int n = p.at("n").get<int>();
      return FormulaValue::from_log(log_vol_projective(n), id, {{"n", n}});
    }
    if (id == "vol_grassmann") {
      const int k = p.at("k").get<int>(), l = p.at("l").get<int>();
      return FormulaValue::from_log(log_vol_grassmann(k, l), id, {{"k", k}, {"l", l}});
    }
    if (id == "vol_variety") {
      const int n = p.at("n").get<int>();
      const auto d = detail::degrees_param(p);
      return FormulaValue::from_log(log_vol_variety(n, d), id, {{"n", n}, {"degrees", d.values()}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("formula '" + id + "': bad or missing parameter (" + e.what() + ")");
  }
  throw DomainError("unknown formula '" + id + "'");
}

inline nlohmann::ordered_json to_json(const FormulaValue& f) {
  return {{"formula_id", f.formula_id}, {"params", f.params}, {"value", f.value}, {"log_value", f.log_value}};
}

}  // namespace condmoments
