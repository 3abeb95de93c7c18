#pragma once

#include "descramble/harness/config.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace descramble::harness {

/// gate: must pass. control: a negative control that must fail.
/// record: informational, never affects the outcome.
enum class CheckRole { kGate, kControl, kRecord };

std::string to_string(CheckRole r);

struct Check {
  std::string description;
  double measured = 0.0;
  std::string relation;  // "<=", ">=", "<", ">" or "in"
  double threshold = 0.0;
  double threshold_hi = 0.0;  // upper end for "in"
  bool pass = false;          // the relation holds
  CheckRole role = CheckRole::kGate;

  /// Whether this check is consistent with a healthy suite.
  bool ok() const;
};

Check check_le(std::string description, double measured, double threshold, CheckRole role = CheckRole::kGate);
Check check_lt(std::string description, double measured, double threshold, CheckRole role = CheckRole::kGate);
Check check_ge(std::string description, double measured, double threshold, CheckRole role = CheckRole::kGate);
Check check_gt(std::string description, double measured, double threshold, CheckRole role = CheckRole::kGate);
Check check_in(std::string description, double measured, double lo, double hi, CheckRole role = CheckRole::kGate);
Check record(std::string description, double measured);

struct VerificationResult {
  std::string name;
  std::vector<Check> checks;
  std::vector<std::filesystem::path> tables;
  std::vector<std::filesystem::path> figures;
  std::vector<std::string> notes;
  double seconds = 0.0;

  bool ok() const;
  void add(Check c) { checks.push_back(std::move(c)); }
  const Check* find(const std::string& prefix) const;
};

struct RunContext {
  Config config;
  std::filesystem::path out_dir;  // the experiment's own directory
  bool quick = false;

  /// Sample budget: the configured value, capped at quick.n_max in quick mode.
  long long samples(const std::string& key, long long fallback) const;
  /// Training epochs, divided by quick.epoch_divisor in quick mode.
  int epochs(const std::string& key, int fallback) const;
  /// Convergence threshold, widened by sqrt(N_full / N_quick) in quick mode.
  double mc_threshold(const std::string& key, double fallback, long long n_full, long long n_used) const;
  std::uint64_t seed(const std::string& key) const;
  std::filesystem::path file(const std::string& name) const { return out_dir / name; }
};

using Verifier = std::function<VerificationResult(const RunContext&)>;

VerificationResult verify_solvers(const RunContext& ctx);
VerificationResult verify_thm1(const RunContext& ctx);
VerificationResult verify_thm2(const RunContext& ctx);
VerificationResult verify_cnn(const RunContext& ctx);
VerificationResult verify_oda(const RunContext& ctx);
VerificationResult verify_mds(const RunContext& ctx);
VerificationResult verify_kernel(const RunContext& ctx);
VerificationResult verify_splitting(const RunContext& ctx);
VerificationResult verify_jacobian(const RunContext& ctx);
VerificationResult verify_dln_covariance(const RunContext& ctx);
VerificationResult run_deernet(const RunContext& ctx);
VerificationResult run_ilr(const RunContext& ctx);

struct NamedVerifier {
  std::string name;
  std::string summary;
  Verifier run;
};

const std::vector<NamedVerifier>& verification_registry();
const NamedVerifier* find_verifier(const std::string& name);

/// Runs one verification into out_root/<name>, timing it and writing
/// checks.csv and summary.json there.
VerificationResult run_verification(const NamedVerifier& v, const Config& config,
                                    const std::filesystem::path& out_root, bool quick);

/// Writes out_root/summary.json and out_root/summary.txt for a batch of results.
void write_suite_summary(const std::vector<VerificationResult>& results, const std::filesystem::path& out_root,
                         bool quick);

std::string format_result_table(const std::vector<VerificationResult>& results);

}  // namespace descramble::harness
