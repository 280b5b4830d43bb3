#pragma once

// Seeded Monte Carlo sweeps over one experiment parameter, aggregated per
// (grid point, method), plus CSV and gnuplot writers and built-in presets.

#include <string>
#include <vector>

#include "lrft/config.hpp"
#include "lrft/estimators.hpp"
#include "lrft/rng.hpp"
#include "lrft/taskgen.hpp"

namespace lrft {

struct SweepRecord {
  double swept_value = 0.0;
  MethodTag method;
  double mean_excess_risk = 0.0;
  double std_excess_risk = 0.0;  // sample std (n - 1), 0 for one seed
  Index seeds_used = 0;
  Index nonunique_count = 0;
  bool skipped_threshold = false;
};

/// Task for (grid point, seed). Streams depend on the seed index only, so
/// neighbouring grid points share A0, Delta* factors and data draws.
TaskSpec build_task(const SweepConfig& cfg, double value, Index seed_index);

Dataset build_dataset(const SweepConfig& cfg, const TaskSpec& task, double value, Index seed_index);

/// True when |n - dx| <= 1 and closed forms were requested.
bool at_threshold(const SweepConfig& cfg, double value);

/// Records in grid-major order, then methods in config order. Output does not
/// depend on cfg.workers.
std::vector<SweepRecord> run_sweep(const SweepConfig& cfg);

void emit_csv(const std::vector<SweepRecord>& records, const std::string& path);

/// Long-format CSV `swept_value,quantity,value` of the FFT closed forms and
/// LoRA asymptotic variances; `undefined` where the precondition fails.
void emit_closed_form_overlay(const SweepConfig& cfg, const std::string& path);

/// One gnuplot data block per method (columns: value mean std), blocks
/// separated by two blank lines.
void emit_gnuplot(const std::vector<SweepRecord>& records, const std::string& path);

const std::vector<std::string>& preset_names();

/// Throws ConfigError for unknown names.
SweepConfig preset(const std::string& name);

/// Runs `cfg` and writes <name>.csv, <name>_closed_form.csv, <name>.dat and
/// the effective <name>.ini into `dir` (created if missing).
std::vector<SweepRecord> run_and_write(const SweepConfig& cfg, const std::string& dir);

/// "%.17g" formatting used by every writer.
std::string format_real(double v);

}  // namespace lrft
