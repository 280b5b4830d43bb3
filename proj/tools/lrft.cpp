// Command-line harness: seeded sweeps, presets, closed-form overlays and the
// verification registry.
//
// Exit codes: 0 success, 1 failed check or runtime error, 2 config/usage error.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lrft/config.hpp"
#include "lrft/errors.hpp"
#include "lrft/sweep.hpp"
#include "lrft/verify.hpp"

namespace {

constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

struct RunFlags {
  std::optional<long long> seeds;
  std::optional<long long> workers;
  bool pin_task = false;
  std::optional<std::string> out;
};

void apply_flags(lrft::SweepConfig& cfg, const RunFlags& f) {
  if (f.seeds) cfg.seeds = *f.seeds;
  if (f.workers) cfg.workers = *f.workers;
  if (f.pin_task) cfg.pin_task = true;
  if (f.out) cfg.output_path = *f.out;
  lrft::validate(cfg);
}

void print_summary(const lrft::SweepConfig& cfg, const std::string& dir) {
  std::cout << "wrote " << cfg.name << ".csv, " << cfg.name << "_closed_form.csv, " << cfg.name
            << ".dat, " << cfg.name << ".ini to " << dir << "\n";
}

int run_verify(const std::string& scale_name, std::uint64_t seed, bool json, bool timing) {
  const lrft::Scale scale = scale_name == "full" ? lrft::Scale::kFull : lrft::Scale::kSmoke;
  const auto results = lrft::run_all(seed, scale);
  int failures = 0;
  for (const auto& r : results) {
    if (r.status == lrft::CheckStatus::kFail) ++failures;
    if (json) {
      nlohmann::ordered_json j;
      j["name"] = r.name;
      j["status"] = lrft::to_string(r.status);
      j["margin"] = r.margin;
      j["trials"] = r.trials;
      j["seed"] = r.seed;
      if (timing) j["elapsed"] = r.elapsed;
      j["retried"] = r.retried;
      if (r.first_margin) j["first_margin"] = *r.first_margin;
      j["detail"] = r.detail;
      std::cout << j.dump() << "\n";
    } else {
      std::cout << lrft::to_string(r.status) << "\t" << r.name << "\tmargin=" << lrft::format_real(r.margin)
                << "\ttrials=" << r.trials << "\tseed=" << r.seed;
      if (timing) std::cout << "\telapsed=" << r.elapsed;
      if (r.retried) std::cout << "\tretried";
      std::cout << "\t" << r.detail << "\n";
    }
  }
  if (!json) {
    std::cout << (failures == 0 ? "all " + std::to_string(results.size()) + " checks passed"
                                : std::to_string(failures) + " of " + std::to_string(results.size()) +
                                      " checks failed")
              << "\n";
  }
  return failures == 0 ? 0 : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LoRA vs full fine-tuning linear-regression experiments"};
  app.require_subcommand(1);

  RunFlags sweep_flags;
  std::string sweep_config;
  auto* sweep = app.add_subcommand("sweep", "Run a sweep described by a config file");
  sweep->add_option("--config", sweep_config, "Config file")->required();
  sweep->add_option("--seeds", sweep_flags.seeds, "Overrides run.seeds");
  sweep->add_option("--workers", sweep_flags.workers, "Overrides run.workers");
  sweep->add_flag("--pin-task", sweep_flags.pin_task, "Sets run.pin_task");
  sweep->add_option("--out", sweep_flags.out, "Overrides run.output_path");

  std::string scale = "smoke";
  std::uint64_t verify_seed = 0;
  bool json = false;
  bool timing = false;
  auto* verify = app.add_subcommand("verify", "Run the verification registry");
  verify->add_option("--scale", scale, "smoke or full")->check(CLI::IsMember({"smoke", "full"}));
  verify->add_option("--seed", verify_seed, "Base seed");
  verify->add_flag("--json", json, "One JSON record per line");
  verify->add_flag("--timing", timing, "Include wall-clock seconds (output no longer reproducible)");

  std::string cf_config, cf_out;
  auto* closed = app.add_subcommand("closed-form", "Write the analytic overlay for a config");
  closed->add_option("--config", cf_config, "Config file")->required();
  closed->add_option("--out", cf_out, "Output CSV path")->required();

  std::string preset_name;
  RunFlags preset_flags;
  auto* pre = app.add_subcommand("preset", "Run a built-in figure preset");
  pre->add_option("name", preset_name, "Preset name")
      ->required()
      ->check(CLI::IsMember(lrft::preset_names()));
  pre->add_option("--seeds", preset_flags.seeds, "Seed count (default 100)");
  pre->add_option("--workers", preset_flags.workers, "Worker threads");
  pre->add_flag("--pin-task", preset_flags.pin_task, "Freeze A0 and Delta* across seeds");
  pre->add_option("--out", preset_flags.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sweep) {
      lrft::SweepConfig cfg = lrft::load_config(sweep_config);
      apply_flags(cfg, sweep_flags);
      lrft::run_and_write(cfg, cfg.output_path);
      print_summary(cfg, cfg.output_path);
    } else if (*verify) {
      return run_verify(scale, verify_seed, json, timing);
    } else if (*closed) {
      lrft::emit_closed_form_overlay(lrft::load_config(cf_config), cf_out);
      std::cout << "wrote " << cf_out << "\n";
    } else if (*pre) {
      lrft::SweepConfig cfg = lrft::preset(preset_name);
      apply_flags(cfg, preset_flags);
      lrft::run_and_write(cfg, cfg.output_path);
      print_summary(cfg, cfg.output_path);
    }
  } catch (const lrft::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
  return 0;
}
