#pragma once

// Subcommands of the kahlerlab executable.  Each returns the process exit
// code: 0 all checks pass, 1 some check fails, 2 configuration error.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kahlerlab/scenario.hpp"

namespace kl {

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitConfig = 2;

/// Environment variable consulted when neither the command line nor the
/// scenario sets a seed.
inline constexpr const char* kSeedEnv = "KAHLERLAB_SEED";

struct CliOptions {
  std::optional<double> tol;
  std::optional<int> samples;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  int order = 4;
};

/// Seed precedence: command line, scenario, environment, built-in default.
std::uint64_t resolve_seed(const CliOptions& opt, const Scenario& sc);

/// Applies the command-line overrides to the scenario tolerances.
ToleranceConfig effective_tolerances(const CliOptions& opt, const Scenario& sc);

/// Fields accepted by scan, with the jet order each needs.
const std::vector<std::pair<std::string, int>>& scan_fields();

struct VerifyOutcome {
  std::vector<CheckReport> checks;
  std::vector<ConstantFit> constants;
  std::optional<ClassifyResult> classification;
  int exit_code = kExitPass;
};

VerifyOutcome run_verify(const Scenario& sc, const FamilyInstance& inst, const ToleranceConfig& tol);
void write_report(std::ostream& os, const Scenario& sc, const FamilyInstance& inst, const ToleranceConfig& tol,
                  const VerifyOutcome& outcome);

int cmd_verify(const std::string& scenario, const CliOptions& opt, std::ostream& out, std::ostream& err);
int cmd_scan(const std::string& scenario, const std::vector<std::string>& fields, const CliOptions& opt,
             std::ostream& out, std::ostream& err);
int cmd_classify(const std::string& scenario, const CliOptions& opt, std::ostream& out, std::ostream& err);

struct TableParams {
  double a = 0.0;
  double b = 0.0;
  std::optional<int> k;
  std::optional<double> eps;
  std::optional<double> kb;
};

int cmd_table(const TableParams& p, std::ostream& out, std::ostream& err);

}  // namespace kl
