#pragma once

// Declarative verification suites: parse a JSON suite, run each experiment,
// and collect the comparisons into a report (JSON + CSV).
//
// Suite file:
//   { "version": 1, "seed": <u64>, "workers": <n>, "experiments": [ ... ] }
// Experiment:
//   { "id", "estimator", "params", "samples", "lines_per_system"?, "seed"?,
//     "method"?, "buckets"?, "tolerance_sigmas"?, "estimate_scale"?: formula,
//     "closed_form": formula | "reference": { "estimator", "params", "samples"?, "scale"?: formula },
//     "probe"?, "expect"?: "agree" | "disagree", "disagree_sigmas"? }
// Formula: { "id", "params" }.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "condmoments/errors.hpp"
#include "condmoments/formulas.hpp"
#include "condmoments/montecarlo.hpp"

namespace condmoments {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kConfigVersion = 1;
inline constexpr std::uint64_t kDefaultSuiteSeed = 0x5eedc0de2024ULL;

using ojson = nlohmann::ordered_json;

/// FNV-1a, used to derive per-experiment seeds from ids (stable across platforms).
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  return splitmix64(base ^ fnv1a(label));
}

struct FormulaRef {
  std::string id;
  ojson params = ojson::object();

  FormulaValue evaluate() const { return evaluate_formula(id, params); }
};

struct ReferenceSide {
  std::string estimator;
  ojson params = ojson::object();
  std::optional<std::uint64_t> samples;
  std::optional<FormulaRef> scale;
};

enum class Expectation { Agree, Disagree };

struct ExperimentConfig {
  std::string id;
  std::string estimator;
  ojson params = ojson::object();
  std::uint64_t samples = kDefaultMatrixSamples;
  std::optional<std::size_t> lines_per_system;
  std::optional<std::uint64_t> seed;
  std::optional<EstimateMethod> method;
  int buckets = kDefaultBuckets;
  double tolerance_sigmas = 3.0;
  std::optional<FormulaRef> estimate_scale;
  std::optional<FormulaRef> closed_form;
  std::optional<ReferenceSide> reference;
  bool probe = false;
  Expectation expect = Expectation::Agree;
  double disagree_sigmas = 5.0;
};

struct SuiteConfig {
  int version = kConfigVersion;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  std::vector<ExperimentConfig> experiments;
};

// ---------------------------------------------------------------------------
// Estimator dispatch

inline const std::vector<std::string>& estimator_ids() {
  static const std::vector<std::string> ids{"espnorm",          "espnormrest",        "pinv_moment",
                                            "detweighted_rect", "detweighted_square", "poly_moment",
                                            "poly_moment_relative"};
  return ids;
}

/// Runs (or, with cfg.validate_only, just validates) an estimator named by id.
inline EstimateResult run_estimator(const std::string& id, const ojson& p, const McConfig& cfg) {
  auto norm = [&] { return parse_norm(p.value("norm", std::string("frobenius"))); };
  try {
    if (id == "espnorm") return estimate_espnorm(p.at("n").get<int>(), p.at("alpha").get<double>(), cfg);
    if (id == "espnormrest")
      return estimate_espnormrest(p.at("n").get<int>(), p.at("alpha").get<int>(), p.at("beta").get<double>(), cfg);
    if (id == "pinv_moment")
      return estimate_pinv_moment(p.at("r").get<int>(), p.at("m").get<int>(), p.value("alpha", 2.0), norm(), cfg);
    if (id == "detweighted_rect")
      return estimate_detweighted_rect(p.at("r").get<int>(), p.at("n").get<int>(), p.value("alpha", 2.0), norm(),
                                       cfg);
    if (id == "detweighted_square") {
      const int r = p.at("r").get<int>();
      if (p.contains("k") == p.contains("n"))
        throw DomainError("detweighted_square: give exactly one of k (weight |det|^{2k}) or n (k = n-r+1)");
      if (p.contains("k")) return estimate_detweighted_square_k(r, p.at("k").get<double>(), p.value("alpha", 2.0), norm(), cfg);
      return estimate_detweighted_square(r, p.at("n").get<int>(), p.value("alpha", 2.0), norm(), cfg);
    }
    if (id == "poly_moment" || id == "poly_moment_relative")
      return estimate_poly_moment(p.at("n").get<int>(), DegreeList(p.at("degrees").get<std::vector<int>>()),
                                  p.value("alpha", 2.0), id == "poly_moment_relative", norm(), cfg);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("estimator '" + id + "': bad or missing parameter (" + e.what() + ")");
  }
  throw DomainError("unknown estimator '" + id + "'");
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline void reject_unknown_keys(const ojson& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <class T>
T get_field(const ojson& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": '" + key + "' has the wrong type");
  }
}

inline FormulaRef parse_formula(const ojson& j, const std::string& where) {
  reject_unknown_keys(j, {"id", "params"}, where);
  FormulaRef f{get_field<std::string>(j, "id", where), j.value("params", ojson::object())};
  if (!f.params.is_object()) throw ConfigError(where + ": 'params' must be an object");
  return f;
}

inline ojson to_json(const FormulaRef& f) { return {{"id", f.id}, {"params", f.params}}; }

inline std::uint64_t positive_count(const ojson& j, const char* key, const std::string& where) {
  const auto v = get_field<std::int64_t>(j, key, where);
  if (v < 2) throw ConfigError(where + ": '" + key + "' must be >= 2");
  return static_cast<std::uint64_t>(v);
}

}  // namespace detail

inline ExperimentConfig parse_experiment(const ojson& j) {
  const std::string where0 = "experiment";
  detail::reject_unknown_keys(j,
                              {"id", "estimator", "params", "samples", "lines_per_system", "seed", "method", "buckets",
                               "tolerance_sigmas", "estimate_scale", "closed_form", "reference", "probe", "expect",
                               "disagree_sigmas"},
                              where0);
  ExperimentConfig e;
  e.id = detail::get_field<std::string>(j, "id", where0);
  const std::string where = "experiment '" + e.id + "'";
  e.estimator = detail::get_field<std::string>(j, "estimator", where);
  e.params = j.value("params", ojson::object());
  if (!e.params.is_object()) throw ConfigError(where + ": 'params' must be an object");
  e.samples = detail::positive_count(j, "samples", where);
  if (j.contains("lines_per_system")) {
    const auto l = detail::get_field<std::int64_t>(j, "lines_per_system", where);
    if (l < 1) throw ConfigError(where + ": 'lines_per_system' must be >= 1");
    e.lines_per_system = static_cast<std::size_t>(l);
  }
  if (j.contains("seed")) e.seed = detail::get_field<std::uint64_t>(j, "seed", where);
  if (j.contains("method")) {
    const auto m = detail::get_field<std::string>(j, "method", where);
    if (m == "plain-mean") e.method = EstimateMethod::PlainMean;
    else if (m == "median-of-means") e.method = EstimateMethod::MedianOfMeans;
    else throw ConfigError(where + ": 'method' must be plain-mean or median-of-means");
  }
  e.buckets = j.contains("buckets") ? detail::get_field<int>(j, "buckets", where) : kDefaultBuckets;
  if (e.buckets < 2) throw ConfigError(where + ": 'buckets' must be >= 2");
  e.tolerance_sigmas = j.contains("tolerance_sigmas") ? detail::get_field<double>(j, "tolerance_sigmas", where) : 3.0;
  if (!(e.tolerance_sigmas > 0.0)) throw ConfigError(where + ": 'tolerance_sigmas' must be positive");
  if (j.contains("estimate_scale")) e.estimate_scale = detail::parse_formula(j.at("estimate_scale"), where + " estimate_scale");
  if (j.contains("closed_form")) e.closed_form = detail::parse_formula(j.at("closed_form"), where + " closed_form");
  if (j.contains("reference")) {
    const auto& r = j.at("reference");
    const std::string rw = where + " reference";
    detail::reject_unknown_keys(r, {"estimator", "params", "samples", "scale"}, rw);
    ReferenceSide ref{detail::get_field<std::string>(r, "estimator", rw), r.value("params", ojson::object()),
                      std::nullopt, std::nullopt};
    if (r.contains("samples")) ref.samples = detail::positive_count(r, "samples", rw);
    if (r.contains("scale")) ref.scale = detail::parse_formula(r.at("scale"), rw + " scale");
    e.reference = std::move(ref);
  }
  if (e.closed_form.has_value() == e.reference.has_value())
    throw ConfigError(where + ": give exactly one of 'closed_form' or 'reference'");
  e.probe = j.contains("probe") ? detail::get_field<bool>(j, "probe", where) : false;
  if (j.contains("expect")) {
    const auto x = detail::get_field<std::string>(j, "expect", where);
    if (x == "agree") e.expect = Expectation::Agree;
    else if (x == "disagree") e.expect = Expectation::Disagree;
    else throw ConfigError(where + ": 'expect' must be agree or disagree");
  }
  e.disagree_sigmas = j.contains("disagree_sigmas") ? detail::get_field<double>(j, "disagree_sigmas", where) : 5.0;
  return e;
}

/// Normalized form: every field written explicitly, so serialize(parse(.)) is idempotent.
inline ojson to_json(const ExperimentConfig& e) {
  ojson j{{"id", e.id}, {"estimator", e.estimator}, {"params", e.params}, {"samples", e.samples}};
  if (e.lines_per_system) j["lines_per_system"] = *e.lines_per_system;
  if (e.seed) j["seed"] = *e.seed;
  if (e.method) j["method"] = to_string(*e.method);
  j["buckets"] = e.buckets;
  j["tolerance_sigmas"] = e.tolerance_sigmas;
  if (e.estimate_scale) j["estimate_scale"] = detail::to_json(*e.estimate_scale);
  if (e.closed_form) j["closed_form"] = detail::to_json(*e.closed_form);
  if (e.reference) {
    ojson r{{"estimator", e.reference->estimator}, {"params", e.reference->params}};
    if (e.reference->samples) r["samples"] = *e.reference->samples;
    if (e.reference->scale) r["scale"] = detail::to_json(*e.reference->scale);
    j["reference"] = std::move(r);
  }
  j["probe"] = e.probe;
  j["expect"] = e.expect == Expectation::Agree ? "agree" : "disagree";
  j["disagree_sigmas"] = e.disagree_sigmas;
  return j;
}

/// Parses and validates a suite: every estimator and formula is checked
/// against its preconditions before anything is sampled.
inline SuiteConfig parse_suite(const ojson& j) {
  detail::reject_unknown_keys(j, {"version", "seed", "workers", "experiments"}, "suite");
  SuiteConfig s;
  if (j.contains("version")) {
    s.version = detail::get_field<int>(j, "version", "suite");
    if (s.version != kConfigVersion)
      throw ConfigError("suite: unsupported version " + std::to_string(s.version));
  }
  if (j.contains("seed")) s.seed = detail::get_field<std::uint64_t>(j, "seed", "suite");
  if (j.contains("workers")) {
    const int w = detail::get_field<int>(j, "workers", "suite");
    if (w < 1) throw ConfigError("suite: 'workers' must be >= 1");
    s.workers = static_cast<unsigned>(w);
  }
  if (!j.contains("experiments") || !j.at("experiments").is_array() || j.at("experiments").empty())
    throw ConfigError("suite: 'experiments' must be a non-empty list");
  std::set<std::string> seen;
  for (const auto& ej : j.at("experiments")) {
    auto e = parse_experiment(ej);
    if (!seen.insert(e.id).second) throw ConfigError("suite: duplicate experiment id '" + e.id + "'");
    const std::string where = "experiment '" + e.id + "'";
    McConfig probe_cfg;
    probe_cfg.validate_only = true;
    try {
      run_estimator(e.estimator, e.params, probe_cfg);
      if (e.estimate_scale) e.estimate_scale->evaluate();
      if (e.closed_form) e.closed_form->evaluate();
      if (e.reference) {
        run_estimator(e.reference->estimator, e.reference->params, probe_cfg);
        if (e.reference->scale) e.reference->scale->evaluate();
      }
    } catch (const std::invalid_argument& err) {
      throw ConfigError(where + ": " + err.what());
    }
    s.experiments.push_back(std::move(e));
  }
  return s;
}

inline ojson to_json(const SuiteConfig& s) {
  ojson j{{"version", s.version}};
  if (s.seed) j["seed"] = *s.seed;
  j["workers"] = s.workers;
  ojson list = ojson::array();
  for (const auto& e : s.experiments) list.push_back(to_json(e));
  j["experiments"] = std::move(list);
  return j;
}

inline SuiteConfig load_suite(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  std::string text;
  char buf[4096];
  for (std::size_t k; (k = std::fread(buf, 1, sizeof buf, f)) > 0;) text.append(buf, k);
  std::fclose(f);
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_suite(j);
}

// ---------------------------------------------------------------------------
// Running

struct RunOptions {
  std::optional<std::uint64_t> seed;     // overrides the suite seed and per-experiment seeds
  double sample_scale = 1.0;             // multiplies every sample count
  std::optional<unsigned> workers;       // overrides the suite's worker count
  double gaussian_variance = 1.0;        // test hook
};

/// Seed precedence: --seed, then the suite file, then CONDMOMENTS_SEED, then a built-in default.
inline std::uint64_t resolve_base_seed(const SuiteConfig& s, const RunOptions& opt) {
  if (opt.seed) return *opt.seed;
  if (s.seed) return *s.seed;
  if (const char* env = std::getenv("CONDMOMENTS_SEED")) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 0);
    if (end == env || *end != '\0') throw ConfigError("CONDMOMENTS_SEED is not an unsigned integer");
    return v;
  }
  return kDefaultSuiteSeed;
}

struct ExperimentResult {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  std::optional<Comparison> comparison;
  std::string error;
  bool expectation_met = false;
};

struct Report {
  std::vector<ExperimentResult> results;
  bool pass = false;
  std::uint64_t base_seed = 0;
  unsigned workers = 1;
  double runtime_seconds = 0.0;
  std::string timestamp;
};

namespace detail {

inline std::uint64_t scaled_samples(std::uint64_t n, double scale, int buckets) {
  const double v = std::ceil(static_cast<double>(n) * scale);
  return std::max<std::uint64_t>(static_cast<std::uint64_t>(v), 2 * static_cast<std::uint64_t>(buckets));
}

inline std::string utc_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& e, std::uint64_t base_seed, bool seed_forced,
                                       unsigned workers, const RunOptions& opt) {
  ExperimentResult res;
  res.config = e;
  res.seed = (!seed_forced && e.seed) ? *e.seed : derive_seed(base_seed, e.id);

  McConfig cfg;
  cfg.seed = res.seed;
  cfg.workers = workers;
  cfg.buckets = e.buckets;
  cfg.force_method = e.method;
  cfg.gaussian_variance = opt.gaussian_variance;
  cfg.samples = detail::scaled_samples(e.samples, opt.sample_scale, e.buckets);
  if (e.lines_per_system) cfg.lines_per_system = *e.lines_per_system;

  try {
    const auto est = run_estimator(e.estimator, e.params, cfg);
    const double sa = e.estimate_scale ? e.estimate_scale->evaluate().value : 1.0;
    if (e.closed_form) {
      auto cf = e.closed_form->evaluate();
      if (sa != 1.0) {
        // Compare sa * estimate against the closed form.
        EstimateResult scaled = est;
        scaled.mean *= sa;
        scaled.stderr_ *= sa;
        res.comparison = compare(scaled, cf, e.tolerance_sigmas);
        res.comparison->estimate = est;
        res.comparison->estimate_scale = sa;
      } else {
        res.comparison = compare(est, cf, e.tolerance_sigmas);
      }
    } else {
      McConfig rcfg = cfg;
      rcfg.seed = derive_seed(res.seed, "reference");
      rcfg.samples = detail::scaled_samples(e.reference->samples.value_or(e.samples), opt.sample_scale, e.buckets);
      const auto ref = run_estimator(e.reference->estimator, e.reference->params, rcfg);
      const double sb = e.reference->scale ? e.reference->scale->evaluate().value : 1.0;
      res.comparison = compare_estimates(est, sa, ref, sb, e.tolerance_sigmas);
    }
    const auto& c = *res.comparison;
    res.expectation_met = e.expect == Expectation::Agree ? c.pass : std::abs(c.z_score) > e.disagree_sigmas;
  } catch (const std::exception& err) {
    res.error = err.what();
    res.expectation_met = false;
  }
  return res;
}

inline Report run_verify(const SuiteConfig& suite, const RunOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  Report rep;
  rep.timestamp = detail::utc_timestamp();
  rep.base_seed = resolve_base_seed(suite, opt);
  rep.workers = opt.workers.value_or(suite.workers);
  rep.pass = true;
  for (const auto& e : suite.experiments) {
    rep.results.push_back(run_experiment(e, rep.base_seed, opt.seed.has_value(), rep.workers, opt));
    if (!e.probe) rep.pass = rep.pass && rep.results.back().expectation_met;
  }
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline ojson to_json(const ExperimentResult& r) {
  ojson j{{"experiment_id", r.config.id}, {"seed", r.seed}, {"probe", r.config.probe},
          {"expect", r.config.expect == Expectation::Agree ? "agree" : "disagree"}};
  if (r.comparison) j["comparison"] = to_json(*r.comparison);
  if (!r.error.empty()) j["error"] = r.error;
  j["expectation_met"] = r.expectation_met;
  if (r.config.probe && r.comparison && r.config.expect == Expectation::Disagree && r.expectation_met)
    j["flag"] = "discrepancy: estimate differs from the closed form by more than " +
                std::to_string(r.config.disagree_sigmas) + " sigma";
  return j;
}

inline ojson to_json(const Report& rep) {
  ojson list = ojson::array();
  for (const auto& r : rep.results) list.push_back(to_json(r));
  return {{"version", kVersion}, {"timestamp", rep.timestamp},   {"runtime_seconds", rep.runtime_seconds},
          {"seed", rep.base_seed}, {"workers", rep.workers},      {"pass", rep.pass},
          {"experiments", std::move(list)}};
}

namespace detail {

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// One row per experiment; no timestamps, so identical runs give identical bytes.
inline std::string to_csv(const Report& rep) {
  std::ostringstream os;
  os << "experiment_id,estimator_id,params,n_samples,mean,stderr,closed_form,z,pass\n";
  for (const auto& r : rep.results) {
    os << detail::csv_quote(r.config.id) << ',' << detail::csv_quote(r.config.estimator) << ','
       << detail::csv_quote(r.config.params.dump()) << ',';
    if (r.comparison) {
      const auto& c = *r.comparison;
      os << c.estimate.n_samples << ',' << detail::fmt_double(c.estimate_scale * c.estimate.mean) << ','
         << detail::fmt_double(c.estimate_scale * c.estimate.stderr_) << ',' << detail::fmt_double(c.target) << ','
         << detail::fmt_double(c.z_score) << ',' << (c.pass ? "true" : "false") << '\n';
    } else {
      os << "0,nan,nan,nan,nan,false\n";
    }
  }
  return os.str();
}

}  // namespace condmoments
