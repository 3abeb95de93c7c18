#include "descramble/harness/verification.hpp"

#include "descramble/matrix.hpp"
#include "descramble/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace descramble::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(CheckRole r) {
  switch (r) {
    case CheckRole::kGate: return "gate";
    case CheckRole::kControl: return "control";
    case CheckRole::kRecord: return "record";
  }
  return "?";
}

bool Check::ok() const {
  switch (role) {
    case CheckRole::kGate: return pass;
    case CheckRole::kControl: return !pass;
    case CheckRole::kRecord: return true;
  }
  return false;
}

namespace {

Check make(std::string d, double m, std::string rel, double t, double hi, bool pass, CheckRole role) {
  Check c;
  c.description = std::move(d);
  c.measured = m;
  c.relation = std::move(rel);
  c.threshold = t;
  c.threshold_hi = hi;
  c.pass = pass && std::isfinite(m);
  c.role = role;
  return c;
}

}  // namespace

Check check_le(std::string d, double m, double t, CheckRole role) { return make(std::move(d), m, "<=", t, 0, m <= t, role); }
Check check_lt(std::string d, double m, double t, CheckRole role) { return make(std::move(d), m, "<", t, 0, m < t, role); }
Check check_ge(std::string d, double m, double t, CheckRole role) { return make(std::move(d), m, ">=", t, 0, m >= t, role); }
Check check_gt(std::string d, double m, double t, CheckRole role) { return make(std::move(d), m, ">", t, 0, m > t, role); }
Check check_in(std::string d, double m, double lo, double hi, CheckRole role) {
  return make(std::move(d), m, "in", lo, hi, m >= lo && m <= hi, role);
}
Check record(std::string d, double m) {
  Check c = make(std::move(d), m, "", 0, 0, true, CheckRole::kRecord);
  c.pass = true;
  return c;
}

bool VerificationResult::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.ok(); });
}

const Check* VerificationResult::find(const std::string& prefix) const {
  for (const Check& c : checks)
    if (c.description.rfind(prefix, 0) == 0) return &c;
  return nullptr;
}

long long RunContext::samples(const std::string& key, long long fallback) const {
  const long long n = config.get_int(key, fallback);
  return quick ? std::min(n, config.get_int("quick.n_max", 10000)) : n;
}

int RunContext::epochs(const std::string& key, int fallback) const {
  const long long e = config.get_int(key, fallback);
  if (!quick) return static_cast<int>(e);
  const long long div = std::max<long long>(1, config.get_int("quick.epoch_divisor", 10));
  return static_cast<int>(std::max<long long>(1, e / div));
}

double RunContext::mc_threshold(const std::string& key, double fallback, long long n_full, long long n_used) const {
  const double t = config.get_double(key, fallback);
  if (n_used >= n_full || n_used <= 0) return t;
  return t * std::sqrt(static_cast<double>(n_full) / static_cast<double>(n_used));
}

std::uint64_t RunContext::seed(const std::string& key) const {
  // FNV-1a keeps per-experiment seeds stable across builds.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : key) h = (h ^ c) * 1099511628211ull;
  const auto base = static_cast<std::uint64_t>(config.get_int("seeds.base", 20240601));
  return static_cast<std::uint64_t>(config.get_int("seeds." + key, static_cast<long long>(splitmix64(base ^ h) >> 1)));
}

const std::vector<NamedVerifier>& verification_registry() {
  static const std::vector<NamedVerifier> reg = {
      {"solvers", "closed form and manifold descramblers agree", verify_solvers},
      {"thm1", "large-N limit for isotropic data", verify_thm1},
      {"thm2", "sigma^-2 convergence under signal plus noise", verify_thm2},
      {"cnn", "symmetric circulant layers descramble to themselves", verify_cnn},
      {"oda", "uniform-phase oscillatory data", verify_oda},
      {"mds", "maximum diagonal sum descrambler", verify_mds},
      {"jacobian", "Jacobian-linearized descrambling", verify_jacobian},
      {"kernel", "Fresnel integrals and DEER kernel", verify_kernel},
      {"splitting", "signal/noise splitting of the objective", verify_splitting},
      {"dln", "covariance structure of linear forward maps", verify_dln_covariance},
      {"deernet", "DEER network case study", run_deernet},
      {"ilr", "biexponential input-layer regularization case study", run_ilr},
  };
  return reg;
}

const NamedVerifier* find_verifier(const std::string& name) {
  for (const auto& v : verification_registry())
    if (v.name == name) return &v;
  return nullptr;
}

namespace {

json check_json(const Check& c) {
  json j = {{"description", c.description}, {"role", to_string(c.role)}, {"measured", c.measured},
            {"pass", c.pass},               {"ok", c.ok()}};
  if (!c.relation.empty()) {
    j["relation"] = c.relation;
    j["threshold"] = c.threshold;
    if (c.relation == "in") j["threshold_hi"] = c.threshold_hi;
  }
  if (!std::isfinite(c.measured)) j["measured"] = nullptr;
  return j;
}

json result_json(const VerificationResult& r, bool include_timing) {
  json j;
  j["name"] = r.name;
  j["ok"] = r.ok();
  j["checks"] = json::array();
  for (const Check& c : r.checks) j["checks"].push_back(check_json(c));
  j["tables"] = json::array();
  for (const auto& t : r.tables) j["tables"].push_back(t.filename().string());
  j["figures"] = json::array();
  for (const auto& f : r.figures) j["figures"].push_back(f.filename().string());
  j["notes"] = r.notes;
  if (include_timing) j["seconds"] = r.seconds;
  return j;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) out += (c == '"') ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

VerificationResult run_verification(const NamedVerifier& v, const Config& config, const fs::path& out_root,
                                    bool quick) {
  RunContext ctx{config, out_root / v.name, quick};
  fs::create_directories(ctx.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  VerificationResult r = v.run(ctx);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.name = v.name;

  std::ofstream csv(ctx.file("checks.csv"));
  csv << "description,role,measured,relation,threshold,threshold_hi,pass,ok\n";
  char buf[40];
  for (const Check& c : r.checks) {
    std::snprintf(buf, sizeof buf, "%.17g", c.measured);
    csv << csv_quote(c.description) << ',' << to_string(c.role) << ',' << buf << ',' << c.relation << ','
        << c.threshold << ',' << c.threshold_hi << ',' << (c.pass ? 1 : 0) << ',' << (c.ok() ? 1 : 0) << '\n';
  }
  json j = result_json(r, true);
  j["quick"] = quick;
  std::ofstream(ctx.file("summary.json")) << j.dump(2) << '\n';
  return r;
}

std::string format_result_table(const std::vector<VerificationResult>& results) {
  std::ostringstream out;
  char line[512];
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-10s %-4s %8.1fs\n", r.name.c_str(), r.ok() ? "PASS" : "FAIL", r.seconds);
    out << line;
    for (const Check& c : r.checks) {
      std::string rel;
      if (c.relation == "in") {
        char b[96];
        std::snprintf(b, sizeof b, "in [%.4g, %.4g]", c.threshold, c.threshold_hi);
        rel = b;
      } else if (!c.relation.empty()) {
        char b[64];
        std::snprintf(b, sizeof b, "%s %.4g", c.relation.c_str(), c.threshold);
        rel = b;
      }
      std::snprintf(line, sizeof line, "    [%s] %-7s %-62s %12.5g %s\n", c.ok() ? "ok" : "!!", to_string(c.role).c_str(),
                    c.description.substr(0, 62).c_str(), c.measured, rel.c_str());
      out << line;
    }
  }
  return out.str();
}

void write_suite_summary(const std::vector<VerificationResult>& results, const fs::path& out_root, bool quick) {
  fs::create_directories(out_root);
  json j;
  j["quick"] = quick;
  j["ok"] = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.ok(); });
  j["experiments"] = json::array();
  double total = 0.0;
  for (const auto& r : results) {
    j["experiments"].push_back(result_json(r, true));
    total += r.seconds;
  }
  j["seconds"] = total;
  std::ofstream(out_root / "summary.json") << j.dump(2) << '\n';
  std::ofstream(out_root / "summary.txt") << format_result_table(results);
}

}  // namespace descramble::harness
