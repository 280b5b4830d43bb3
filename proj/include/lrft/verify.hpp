#pragma once

// Registry of named, seeded numerical checks. Each check evaluates one
// identity, bound, or closed form at a given scale and reports a signed
// margin to its threshold instead of throwing on statistical failure.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lrft/matcore.hpp"
#include "lrft/rng.hpp"
#include "lrft/taskgen.hpp"

namespace lrft {

enum class CheckStatus { kPass, kFail, kSkipped };

std::string to_string(CheckStatus s);

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::kSkipped;
  /// Signed distance to the threshold; pass iff margin >= 0.
  double margin = 0.0;
  Index trials = 0;
  std::uint64_t seed = 0;
  double elapsed = 0.0;  // seconds, wall clock
  /// Set when a statistical check failed on `seed` and was rerun on the
  /// fallback seed; `first_margin` keeps the original outcome.
  bool retried = false;
  std::optional<double> first_margin;
  std::string detail;
};

enum class Scale { kSmoke, kFull };

struct CheckInfo {
  std::string_view name;
  Index full_trials;
  bool statistical;
};

/// Registered checks in execution order.
const std::vector<CheckInfo>& check_registry();

/// Trial count used by run_all for `name` at `scale`. Smoke runs use one
/// tenth of the full count.
Index trials_for(std::string_view name, Scale scale);

/// Runs one check. Statistical tolerances widen by sqrt(full / trials) when
/// trials is below the full count. Throws UnknownCheck for unregistered names.
CheckResult run_check(std::string_view name, std::uint64_t seed, Index trials);

/// Runs every registered check. Failures are listed first; order is
/// otherwise registry order.
std::vector<CheckResult> run_all(std::uint64_t seed, Scale scale);

/// Seed used for the single rerun of a failed statistical check.
std::uint64_t fallback_seed(std::uint64_t seed);

/// Monte Carlo estimate of R(a_hat) - R(A*) from `samples` fresh test pairs.
/// Independent of exact_excess_risk; used as its oracle.
double monte_carlo_excess_risk(const Mat& a_hat, const TaskSpec& task, Index samples, RngHandle rng);

}  // namespace lrft
