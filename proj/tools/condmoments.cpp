// condmoments: verify moment identities, print closed forms, run single
// estimators, and run the property self-tests.
//
// Exit codes: 0 success / all checks pass, 1 a check or estimator failed,
// 2 usage or configuration error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "condmoments/experiment.hpp"
#include "condmoments/formulas.hpp"
#include "condmoments/montecarlo.hpp"
#include "condmoments/selftest.hpp"

namespace cm = condmoments;
using cm::ojson;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

ojson parse_params(const std::string& text) {
  try {
    auto j = ojson::parse(text.empty() ? "{}" : text);
    if (!j.is_object()) throw cm::ConfigError("--params must be a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw cm::ConfigError(std::string("--params is not valid JSON: ") + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw cm::ConfigError("cannot write '" + path + "'");
  f << text;
}

// --out report.json writes report.json and report.csv; without --out the JSON goes to stdout.
int cmd_verify(const std::string& config, std::optional<std::uint64_t> seed, double scale,
               std::optional<unsigned> workers, const std::string& out) {
  const auto suite = cm::load_suite(config);
  cm::RunOptions opt;
  opt.seed = seed;
  opt.sample_scale = scale;
  opt.workers = workers;
  const auto rep = cm::run_verify(suite, opt);

  for (const auto& r : rep.results) {
    std::fprintf(stderr, "%-40s ", r.config.id.c_str());
    if (!r.error.empty()) {
      std::fprintf(stderr, "ERROR %s\n", r.error.c_str());
      continue;
    }
    const auto& c = *r.comparison;
    std::fprintf(stderr, "mean %.6g  target %.6g  z %+.2f  %s%s\n", c.estimate_scale * c.estimate.mean, c.target,
                 c.z_score, r.expectation_met ? "ok" : "FAIL", r.config.probe ? " (probe)" : "");
  }
  std::fprintf(stderr, "overall: %s (%.1f s)\n", rep.pass ? "PASS" : "FAIL", rep.runtime_seconds);

  const std::string json = cm::to_json(rep).dump(2) + "\n";
  if (out.empty()) {
    std::cout << json;
  } else {
    write_text(out, json);
    std::string csv_path = out;
    if (csv_path.size() > 5 && csv_path.ends_with(".json")) csv_path.resize(csv_path.size() - 5);
    write_text(csv_path + ".csv", cm::to_csv(rep));
  }
  return rep.pass ? 0 : kExitFail;
}

int cmd_formulas(const std::string& id, const std::string& params) {
  const auto p = parse_params(params);
  if (id == "list") {
    for (const auto& f : cm::formula_ids()) std::cout << f << "\n";
    std::cout << "espnormrest\nvolumes\n";
    return 0;
  }
  ojson out;
  try {
    if (id == "espnormrest") {
      const auto forms =
          cm::espnormrest_value(p.at("n").get<int>(), p.at("alpha").get<int>(), p.at("beta").get<double>());
      out = {{"closed_form", cm::to_json(forms.closed_form)},
             {"sum_form", cm::to_json(forms.sum_form)},
             {"forms_agree", forms.agree()}};
    } else if (id == "volumes") {
      const auto v = cm::volumes(p.at("n").get<int>(), p.at("k").get<int>(), p.at("l").get<int>(),
                                 cm::DegreeList(p.at("degrees").get<std::vector<int>>()));
      out = {{"projective", cm::to_json(v.projective)},
             {"grassmann", cm::to_json(v.grassmann)},
             {"variety", cm::to_json(v.variety)}};
    } else {
      out = cm::to_json(cm::evaluate_formula(id, p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw cm::DomainError("formula '" + id + "': bad or missing parameter (" + e.what() + ")");
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_estimate(const std::string& id, const std::string& params, std::uint64_t samples,
                 std::optional<std::uint64_t> seed, unsigned workers, std::optional<std::size_t> lines) {
  cm::McConfig cfg;
  cfg.samples = samples;
  cfg.workers = workers;
  if (lines) cfg.lines_per_system = *lines;
  if (seed) {
    cfg.seed = *seed;
  } else {
    cm::SuiteConfig empty;
    cfg.seed = cm::resolve_base_seed(empty, {});
  }
  const auto est = cm::run_estimator(id, parse_params(params), cfg);
  std::cout << cm::to_json(est).dump(2) << "\n";
  return 0;
}

int cmd_selftest(unsigned workers) {
  cm::SelftestOptions opt;
  opt.workers = workers;
  bool all = true;
  for (const auto& r : cm::run_selftest(opt)) {
    std::printf("%-24s %s  %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL", r.detail.c_str());
    all = all && r.pass;
  }
  std::printf("selftest: %s\n", all ? "PASS" : "FAIL");
  return all ? 0 : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Condition-number moments of random polynomial systems"};
  app.set_version_flag("--version", cm::kVersion);
  app.require_subcommand(1);

  std::string config, out, params;
  std::optional<std::uint64_t> seed;
  double scale = 1.0;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::optional<unsigned> verify_workers;

  auto* verify = app.add_subcommand("verify", "Run a verification suite and write a report");
  verify->add_option("--config", config, "Suite file (JSON)")->required()->check(CLI::ExistingFile);
  verify->add_option("--seed", seed, "Override every experiment seed");
  verify->add_option("--samples", scale, "Scale factor applied to all sample counts")->check(CLI::PositiveNumber);
  verify->add_option("--workers", verify_workers, "Worker threads per estimator")->check(CLI::PositiveNumber);
  verify->add_option("--out", out, "Report path (JSON); the CSV summary goes next to it");

  std::string formula_id;
  auto* formulas = app.add_subcommand("formulas", "Print a closed-form value");
  formulas->add_option("formula", formula_id, "Formula id, 'espnormrest', 'volumes' or 'list'")->required();
  formulas->add_option("--params", params, "Parameters as a JSON object");

  std::string estimator_id;
  std::uint64_t samples = cm::kDefaultMatrixSamples;
  std::optional<std::size_t> lines;
  auto* estimate = app.add_subcommand("estimate", "Run one Monte Carlo estimator");
  estimate->add_option("estimator", estimator_id, "Estimator id")->required();
  estimate->add_option("--params", params, "Parameters as a JSON object");
  estimate->add_option("--samples", samples, "Number of samples (systems for polynomial estimators)")
      ->check(CLI::Range(std::uint64_t{2}, std::uint64_t{1} << 40));
  estimate->add_option("--seed", seed, "Seed");
  estimate->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  estimate->add_option("--lines", lines, "Lines per system for polynomial estimators")->check(CLI::PositiveNumber);

  auto* selftest = app.add_subcommand("selftest", "Run the property self-tests");
  selftest->add_option("--workers", workers, "Threads for the determinism check")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*verify) return cmd_verify(config, seed, scale, verify_workers, out);
    if (*formulas) return cmd_formulas(formula_id, params);
    if (*estimate) return cmd_estimate(estimator_id, params, samples, seed, workers, lines);
    if (*selftest) return cmd_selftest(workers);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFail;
  }
  return kExitUsage;
}
