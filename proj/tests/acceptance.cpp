// Runs the bundled verification suite and the property self-tests, and prints
// one PASS/FAIL line per acceptance criterion. Exit status 0 iff all pass.

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "condmoments/experiment.hpp"
#include "condmoments/selftest.hpp"

using namespace condmoments;

namespace {

struct Criterion {
  int number;
  std::string title;
  std::vector<std::string> rows;   // must meet their expectation and pass
  std::vector<std::string> probes;  // must meet their expectation
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> c{
      {1, "pseudoinverse moment E||M^+||_F^2 = r/(m-r)",
       {"pinv-r1-m3", "pinv-r2-m4", "pinv-r3-m5", "pinv-r2-m5"}, {}},
      {2, "determinant-weighted inverse moment (values 1, 4, 12, 18)",
       {"detweighted-square-r1-k1", "detweighted-square-r2-k1", "detweighted-square-r2-k2", "detweighted-square-r3-k1"},
       {}},
      {3, "linear-variety identity, r=2 n=3, Frobenius and operator",
       {"linear-variety-r2-n3-frobenius", "linear-variety-r2-n3-operator"}, {}},
      {4, "kernel-variety identity, r=2 n=3", {"kernel-variety-r2-n3"}, {}},
      {5, "second moment, determined n=r=1, d=1,2,3 (median-of-means, 4 sigma)",
       {"theorem-determined-n1-d1", "theorem-determined-n1-d2", "theorem-determined-n1-d3"}, {}},
      {6, "second moment, underdetermined n=2 d=2 equals 5/2", {"theorem-underdetermined-n2-d2"}, {}},
      {7, "relative moment n=2 d=2 equals E||M^+||_F^2 over 1x3", {"relative-moment-n2-d2"}, {}},
      {8, "absolute = Gamma(N)/Gamma(N-1) * relative, n=r=1 d=2", {"absolute-vs-relative-n1-d2"}, {}},
      {9, "E||v||^alpha = Gamma(n+alpha/2)/Gamma(n)", {"espnorm-n3-alpha4", "espnorm-n2-alpha-2", "espnorm-n4-alpha2"}, {}},
      {10, "E||v||^{2a}||Pv||^2 closed form; beta=0 probe matches sum form, refutes closed form",
       {"espnormrest-n3-alpha1-beta2", "espnormrest-n4-alpha2-beta2"},
       {"espnormrest-n3-alpha1-beta0-sum-form", "espnormrest-n3-alpha1-beta0-closed-form"}},
  };
  return c;
}

std::string describe(const ExperimentResult& r) {
  if (!r.error.empty()) return r.config.id + " error: " + r.error;
  const auto& c = *r.comparison;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s mean=%.6g target=%.6g z=%+.2f", r.config.id.c_str(),
                c.estimate_scale * c.estimate.mean, c.target, c.z_score);
  return buf;
}

}  // namespace

int main() {
  const auto suite = load_suite(std::string(CONDMOMENTS_SOURCE_DIR) + "/configs/default_suite.json");
  RunOptions opt;
  opt.workers = std::max(1u, std::thread::hardware_concurrency());  // results do not depend on this
  const auto rep = run_verify(suite, opt);

  std::map<std::string, const ExperimentResult*> by_id;
  for (const auto& r : rep.results) by_id[r.config.id] = &r;

  bool all = true;
  for (const auto& c : criteria()) {
    bool ok = true;
    std::string detail;
    auto check = [&](const std::string& id, bool must_pass) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) {
        ok = false;
        detail += " [" + id + " missing]";
        return;
      }
      const auto& r = *it->second;
      const bool good = r.expectation_met && (!must_pass || (r.comparison && r.comparison->pass));
      ok = ok && good;
      detail += " [" + describe(r) + (good ? "" : " FAILED") + "]";
    };
    for (const auto& id : c.rows) check(id, true);
    for (const auto& id : c.probes) check(id, false);
    std::printf("criterion %2d: %s  %s\n   %s\n", c.number, ok ? "PASS" : "FAIL", c.title.c_str(), detail.c_str());
    all = all && ok;
  }

  bool self_ok = true;
  std::string failed;
  for (const auto& s : run_selftest()) {
    if (!s.pass) {
      self_ok = false;
      failed += " [" + s.name + ": " + s.detail + "]";
    }
  }
  std::printf("criterion 11: %s  property suites (selftest)%s\n", self_ok ? "PASS" : "FAIL", failed.c_str());
  all = all && self_ok;

  std::printf("acceptance: %s (suite runtime %.1f s)\n", all ? "PASS" : "FAIL", rep.runtime_seconds);
  return all ? 0 : 1;
}
