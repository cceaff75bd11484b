#pragma once

// Named check suites over sampled points of an instance's box, the
// weakly-selfdual classification and constant extraction.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kahlerlab/instance.hpp"

namespace kl {

inline constexpr std::uint64_t kDefaultSeed = 20240611;

struct ToleranceConfig {
  double identity_tol = 1e-8;
  double zero_tol = 1e-9;
  double nonzero_floor = 1e-3;
  double constancy_tol = 1e-7;
  int samples_per_box = 64;
  std::uint64_t rng_seed = kDefaultSeed;
  /// Worker threads for per-sample evaluation; 0 picks the hardware count.
  int threads = 0;

  /// Throws ConfigError unless all tolerances are positive and the floor
  /// exceeds identity_tol.
  void validate() const;
};

/// Corners of the box first, then a randomly shifted Sobol sequence, n points in total.
std::vector<Point> sample_points(const Box& box, int n, std::uint64_t seed);

enum class Verdict { pass, fail, not_applicable };
enum class Bound { upper, lower };

const char* to_string(Verdict v);

struct CheckReport {
  std::string suite;
  std::string name;
  std::string tag;
  Bound bound = Bound::upper;
  double tolerance = 0.0;
  /// Lower-bound checks pass when at least this fraction of samples clears the floor.
  double required_fraction = 1.0;
  int evaluated = 0;
  int skipped = 0;
  double max = 0.0;
  double min = 0.0;
  double mean = 0.0;
  /// Fraction of evaluated samples on the passing side of the tolerance.
  double fraction = 0.0;
  /// Sample with the largest value (upper) or the smallest value (lower).
  Point worst{};
  Verdict verdict = Verdict::not_applicable;
  std::string note;
};

enum class Suite { kahler, weak_sd, extremal, biextremal, bach, hamiltonian, almost_kahler, lagrangian };

const char* to_string(Suite s);
/// Throws ConfigError on an unknown name.
Suite parse_suite(const std::string& name);
const std::vector<Suite>& all_suites();

/// Reports of one suite, in a fixed member order.
std::vector<CheckReport> run_suite(const FamilyInstance& inst, Suite suite, const ToleranceConfig& tol);
/// Several suites sharing the per-sample curvature evaluation.
std::vector<CheckReport> run_suites(const FamilyInstance& inst, const std::vector<Suite>& suites,
                                    const ToleranceConfig& tol);

enum class Classification { einstein, parallel_ricci_product, selfdual_nonconstant_s, degenerate_wminus, none };

const char* to_string(Classification c);

struct ClassifyResult {
  Classification verdict = Classification::none;
  /// Some samples satisfy a vanishing condition that others violate.
  bool ambiguous = false;
  std::string detail;
  std::vector<CheckReport> evidence;
};

/// Decides the case of the weakly selfdual trichotomy on the sampled domain.
ClassifyResult classify(const FamilyInstance& inst, const ToleranceConfig& tol);

enum class ConstantExpr { kappa_lambda3, p_affine_in_s, wminus_over_kappa };

const char* to_string(ConstantExpr e);
ConstantExpr parse_constant_expr(const std::string& name);

struct ConstantFit {
  ConstantExpr expr = ConstantExpr::kappa_lambda3;
  std::vector<double> values;
  double constant = 0.0;
  /// (max - min)/|mean|, or max - min when the mean is below zero_tol.  For
  /// p_affine_in_s: the largest relative deviation from the fitted line.
  double spread = 0.0;
  /// p_affine_in_s only: the fitted intercept.
  double intercept = 0.0;
  /// kappa_lambda3 only: the same product with the instance's conformal factor.
  std::optional<double> alt_constant;
  std::optional<double> alt_spread;
  Verdict verdict = Verdict::not_applicable;
  std::string note;
};

ConstantFit extract_constant(const FamilyInstance& inst, ConstantExpr expr, const ToleranceConfig& tol);

}  // namespace kl
