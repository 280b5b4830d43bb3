#pragma once

// Sweep configuration and its INI-style text format. See README for the
// full key list.

#include <cstdint>
#include <string>
#include <vector>

#include "lrft/estimators.hpp"
#include "lrft/matcore.hpp"

namespace lrft {

enum class Experiment { kDimension, kNoise, kRank, kDecay };

std::string to_string(Experiment e);

enum class DeltaKind { kLowRank, kExpDecay };

struct SweepConfig {
  std::string name = "sweep";
  Experiment experiment = Experiment::kNoise;
  /// Swept values: dx/n ratio, noise std, rank(Delta*), or decay rate.
  std::vector<double> grid;

  Index dx = 100;
  Index dy = 100;
  Index n = 50;
  double sigma_noise = 1.0;
  DeltaKind delta = DeltaKind::kLowRank;
  Index delta_rank = 4;
  double decay_rate = 0.0;
  double decay_scale = 5.0;
  bool zero_pretrained = false;

  std::vector<MethodTag> methods;

  Index seeds = 100;
  std::uint64_t base_seed = 0;
  Index workers = 1;
  bool pin_task = false;
  /// Annotate grid points where the FFT closed forms are undefined.
  bool closed_form = true;
  std::string output_path = ".";
};

/// Sample count used at grid point `value` (dimension sweeps derive it).
Index sample_count(const SweepConfig& cfg, double value);

/// Throws ConfigError naming the offending field.
void validate(const SweepConfig& cfg);

SweepConfig parse_config(const std::string& text);
SweepConfig load_config(const std::string& path);

/// Round-trips through parse_config. Omits run.workers, which never affects
/// results, so the text is identical across worker counts.
std::string to_ini(const SweepConfig& cfg);

/// n evenly spaced values over [start, stop]; log spacing is geometric.
std::vector<double> linear_grid(double start, double stop, Index points);
std::vector<double> log_grid(double start, double stop, Index points);

}  // namespace lrft
