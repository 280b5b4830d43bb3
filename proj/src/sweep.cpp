#include "lrft/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>

#include "lrft/errors.hpp"
#include "lrft/risk.hpp"

namespace lrft {

namespace {

struct CellResult {
  std::vector<double> risk;  // NaN when the seed failed
  std::vector<char> nonunique;
};

bool has_lora(const SweepConfig& cfg) {
  for (const MethodTag& m : cfg.methods) {
    if (m.kind == MethodKind::kLora) return true;
  }
  return false;
}

CellResult run_cell(const SweepConfig& cfg, double value, Index seed) {
  const std::size_t m = cfg.methods.size();
  CellResult out{std::vector<double>(m, std::numeric_limits<double>::quiet_NaN()),
                 std::vector<char>(m, 0)};
  try {
    const TaskSpec task = build_task(cfg, value, seed);
    const Dataset data = build_dataset(cfg, task, value, seed);
    std::optional<LoraSolver> solver;
    if (has_lora(cfg)) solver.emplace(task.a0(), data);
    for (std::size_t i = 0; i < m; ++i) {
      const MethodTag& tag = cfg.methods[i];
      FineTuneEstimate est;
      switch (tag.kind) {
        case MethodKind::kFft:
          est = fit_fft(task.a0(), data);
          break;
        case MethodKind::kLora:
          est = solver->fit(tag.param);
          break;
        case MethodKind::kGd:
          est = fit_fft_gd(task.a0(), data);
          break;
        case MethodKind::kAls:
          est = als_lora(task.a0(), data, tag.param, AlsOptions{},
                         stream_for(cfg.base_seed, seed, StreamRole::kSolver).child(i));
          break;
      }
      out.risk[i] = exact_excess_risk(est.a_hat, task);
      out.nonunique[i] = est.nonunique_truncation ? 1 : 0;
    }
  } catch (const Error&) {
    // Seed dropped; seeds_used reports the shortfall.
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << content;
  f.flush();
  if (!f) throw IoError("write to '" + path + "' failed");
}

double expected_delta_norm_sq(const SweepConfig& cfg, double value) {
  if (cfg.pin_task) return build_task(cfg, value, 0).delta_star().squaredNorm();
  const Index k = std::min(cfg.dx, cfg.dy);
  const Index rank = cfg.experiment == Experiment::kRank ? static_cast<Index>(value) : cfg.delta_rank;
  if (cfg.delta == DeltaKind::kLowRank) {
    // E||U V||^2 / r = dx dy for Gaussian factors.
    return rank == 0 ? 0.0 : static_cast<double>(cfg.dx) * static_cast<double>(cfg.dy);
  }
  const double rate = cfg.experiment == Experiment::kDecay ? value : cfg.decay_rate;
  double s = 0.0;
  for (Index i = 1; i <= k; ++i) s += std::pow(cfg.decay_scale * std::exp(-rate * static_cast<double>(i)), 2);
  return s;
}

double noise_std(const SweepConfig& cfg, double value) {
  return cfg.experiment == Experiment::kNoise ? value : cfg.sigma_noise;
}

}  // namespace

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

TaskSpec build_task(const SweepConfig& cfg, double value, Index seed_index) {
  TaskRecipe recipe;
  recipe.dx = cfg.dx;
  recipe.dy = cfg.dy;
  recipe.zero_pretrained = cfg.zero_pretrained;
  switch (cfg.experiment) {
    case Experiment::kRank: {
      const Index r = static_cast<Index>(value);
      recipe.delta = r == 0 ? SpectrumSpec{spectrum::Zero{}} : SpectrumSpec{spectrum::LowRankGaussian{r}};
      break;
    }
    case Experiment::kDecay:
      recipe.delta = spectrum::ExpDecay{value, cfg.decay_scale};
      break;
    default:
      recipe.delta = cfg.delta == DeltaKind::kLowRank
                         ? SpectrumSpec{spectrum::LowRankGaussian{cfg.delta_rank}}
                         : SpectrumSpec{spectrum::ExpDecay{cfg.decay_rate, cfg.decay_scale}};
  }
  const double sd = noise_std(cfg, value);
  recipe.noise = covariance::Isotropic{sd * sd};
  const Index task_seed = cfg.pin_task ? 0 : seed_index;
  return make_task(recipe, stream_for(cfg.base_seed, static_cast<std::uint64_t>(task_seed), StreamRole::kTask));
}

Dataset build_dataset(const SweepConfig& cfg, const TaskSpec& task, double value, Index seed_index) {
  const auto s = static_cast<std::uint64_t>(seed_index);
  return sample_dataset(task, sample_count(cfg, value), stream_for(cfg.base_seed, s, StreamRole::kFeatures),
                        stream_for(cfg.base_seed, s, StreamRole::kNoise));
}

bool at_threshold(const SweepConfig& cfg, double value) {
  if (!cfg.closed_form) return false;
  const Index n = sample_count(cfg, value);
  return n >= cfg.dx - 1 && n <= cfg.dx + 1;
}

std::vector<SweepRecord> run_sweep(const SweepConfig& cfg) {
  validate(cfg);
  const std::size_t grid = cfg.grid.size();
  const std::size_t seeds = static_cast<std::size_t>(cfg.seeds);
  const std::size_t cells = grid * seeds;
  std::vector<CellResult> results(cells);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t c = next++; c < cells; c = next++) {
      try {
        results[c] = run_cell(cfg, cfg.grid[c / seeds], static_cast<Index>(c % seeds));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const auto n_workers = static_cast<std::size_t>(std::min<Index>(cfg.workers, static_cast<Index>(cells)));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Reduction in fixed cell order, independent of completion order.
  std::vector<SweepRecord> records;
  records.reserve(grid * cfg.methods.size());
  for (std::size_t g = 0; g < grid; ++g) {
    const bool threshold = at_threshold(cfg, cfg.grid[g]);
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      SweepRecord rec;
      rec.swept_value = cfg.grid[g];
      rec.method = cfg.methods[m];
      rec.skipped_threshold = threshold;
      double sum = 0.0;
      for (std::size_t s = 0; s < seeds; ++s) {
        const CellResult& cell = results[g * seeds + s];
        if (std::isnan(cell.risk[m])) continue;
        sum += cell.risk[m];
        ++rec.seeds_used;
        rec.nonunique_count += cell.nonunique[m];
      }
      if (rec.seeds_used == 0) {
        rec.mean_excess_risk = std::numeric_limits<double>::quiet_NaN();
        rec.std_excess_risk = std::numeric_limits<double>::quiet_NaN();
      } else {
        rec.mean_excess_risk = sum / static_cast<double>(rec.seeds_used);
        double ss = 0.0;
        for (std::size_t s = 0; s < seeds; ++s) {
          const double r = results[g * seeds + s].risk[m];
          if (!std::isnan(r)) ss += (r - rec.mean_excess_risk) * (r - rec.mean_excess_risk);
        }
        rec.std_excess_risk =
            rec.seeds_used > 1 ? std::sqrt(ss / static_cast<double>(rec.seeds_used - 1)) : 0.0;
      }
      records.push_back(rec);
    }
  }
  return records;
}

void emit_csv(const std::vector<SweepRecord>& records, const std::string& path) {
  std::string out =
      "swept_value,method,mean_excess_risk,std_excess_risk,seeds_used,nonunique_count,skipped_threshold\n";
  for (const SweepRecord& r : records) {
    out += format_real(r.swept_value) + "," + r.method.label() + "," + format_real(r.mean_excess_risk) + "," +
           format_real(r.std_excess_risk) + "," + std::to_string(r.seeds_used) + "," +
           std::to_string(r.nonunique_count) + "," + (r.skipped_threshold ? "1" : "0") + "\n";
  }
  write_file(path, out);
}

void emit_closed_form_overlay(const SweepConfig& cfg, const std::string& path) {
  validate(cfg);
  std::string out = "swept_value,quantity,value\n";
  for (double value : cfg.grid) {
    const Index n = sample_count(cfg, value);
    const double sd = noise_std(cfg, value);
    const double tr = static_cast<double>(cfg.dy) * sd * sd;
    const std::string v = format_real(value) + ",";
    std::string risk = "undefined", bias = "undefined", variance = "undefined";
    if (n > cfg.dx + 1) {
      const double f = fft_over_gaussian_closed_form(tr, cfg.dx, n);
      risk = variance = format_real(f);
      bias = format_real(0.0);
    } else if (n < cfg.dx - 1) {
      const FftUnderClosedForm f =
          fft_under_gaussian_closed_form(expected_delta_norm_sq(cfg, value), tr, cfg.dx, n);
      risk = format_real(f.bias + f.variance);
      bias = format_real(f.bias);
      variance = format_real(f.variance);
    }
    out += v + "fft_risk," + risk + "\n";
    out += v + "fft_bias," + bias + "\n";
    out += v + "fft_variance," + variance + "\n";
    for (const MethodTag& m : cfg.methods) {
      if (m.kind != MethodKind::kLora) continue;
      std::string asym = "undefined";
      if (n != cfg.dx) {
        asym = format_real(lora_variance_asymptotic(regime_of(n, cfg.dx), m.param, cfg.dx, cfg.dy, n, sd * sd));
      }
      out += v + m.label() + "_variance_asymptotic," + asym + "\n";
    }
  }
  write_file(path, out);
}

void emit_gnuplot(const std::vector<SweepRecord>& records, const std::string& path) {
  std::vector<MethodTag> order;
  for (const SweepRecord& r : records) {
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
  }
  std::string out;
  for (std::size_t b = 0; b < order.size(); ++b) {
    if (b > 0) out += "\n\n";
    out += "# " + order[b].label() + "\n# swept_value mean std\n";
    for (const SweepRecord& r : records) {
      if (!(r.method == order[b])) continue;
      out += format_real(r.swept_value) + " " + format_real(r.mean_excess_risk) + " " +
             format_real(r.std_excess_risk) + "\n";
    }
  }
  write_file(path, out);
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"fig1a", "fig1b", "fig6a", "fig6b", "fig7", "fig8"};
  return names;
}

SweepConfig preset(const std::string& name) {
  SweepConfig cfg;
  cfg.name = name;
  cfg.methods = {MethodTag::fft(), MethodTag::lora(1), MethodTag::lora(2), MethodTag::lora(4),
                 MethodTag::lora(8), MethodTag::lora(16)};
  cfg.seeds = 100;
  cfg.dx = cfg.dy = 100;
  cfg.delta = DeltaKind::kLowRank;
  if (name == "fig1a" || name == "fig6a") {
    cfg.experiment = Experiment::kDimension;
    cfg.sigma_noise = name == "fig1a" ? 12.0 : 1.0;
    cfg.delta_rank = 4;
    cfg.grid = log_grid(0.1, 10.0, 16);
  } else if (name == "fig1b" || name == "fig6b") {
    cfg.experiment = Experiment::kNoise;
    cfg.n = name == "fig1b" ? 50 : 1000;
    cfg.delta_rank = 10;
    cfg.grid = log_grid(1.0, 100.0, 16);
  } else if (name == "fig7") {
    cfg.experiment = Experiment::kRank;
    cfg.dx = cfg.dy = 40;
    cfg.n = 30;
    cfg.sigma_noise = 2.0;
    cfg.grid = linear_grid(1.0, 40.0, 40);
  } else if (name == "fig8") {
    cfg.experiment = Experiment::kDecay;
    cfg.dx = cfg.dy = 40;
    cfg.n = 200;
    cfg.sigma_noise = 0.5;
    cfg.delta = DeltaKind::kExpDecay;
    cfg.decay_scale = 5.0;
    cfg.grid = linear_grid(0.0, 2.5, 11);
  } else {
    throw ConfigError("preset", "unknown preset '" + name + "'");
  }
  validate(cfg);
  return cfg;
}

std::vector<SweepRecord> run_and_write(const SweepConfig& cfg, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  const std::string stem = (std::filesystem::path(dir) / cfg.name).string();
  const std::vector<SweepRecord> records = run_sweep(cfg);
  emit_csv(records, stem + ".csv");
  emit_closed_form_overlay(cfg, stem + "_closed_form.csv");
  emit_gnuplot(records, stem + ".dat");
  SweepConfig effective = cfg;
  effective.output_path = dir;
  write_file(stem + ".ini", to_ini(effective));
  return records;
}

}  // namespace lrft
