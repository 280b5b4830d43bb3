#include "lrft/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "lrft/errors.hpp"

namespace lrft {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& field, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(d)) {
    throw ConfigError(field, "expected a finite number, got '" + v + "'");
  }
  return d;
}

std::int64_t to_int(const std::string& field, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE) {
    throw ConfigError(field, "expected an integer, got '" + v + "'");
  }
  return i;
}

std::uint64_t to_uint64(const std::string& field, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || *end != '\0' || errno == ERANGE) {
    throw ConfigError(field, "expected an unsigned 64-bit integer, got '" + v + "'");
  }
  return u;
}

bool to_bool(const std::string& field, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(field, "expected true or false, got '" + v + "'");
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Experiment parse_experiment(const std::string& v) {
  if (v == "dimension_sweep") return Experiment::kDimension;
  if (v == "noise_sweep") return Experiment::kNoise;
  if (v == "rank_sweep") return Experiment::kRank;
  if (v == "decay_sweep") return Experiment::kDecay;
  throw ConfigError("experiment.type",
                    "expected dimension_sweep, noise_sweep, rank_sweep or decay_sweep, got '" + v + "'");
}

struct GridSpec {
  std::string spacing;  // empty, "log" or "linear"
  std::vector<double> values;
  double start = 0.0;
  double stop = 0.0;
  Index points = 0;
  bool has_values = false;
  bool has_range = false;
};

}  // namespace

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::kDimension:
      return "dimension_sweep";
    case Experiment::kNoise:
      return "noise_sweep";
    case Experiment::kRank:
      return "rank_sweep";
    case Experiment::kDecay:
      return "decay_sweep";
  }
  return "unknown";
}

std::vector<double> linear_grid(double start, double stop, Index points) {
  std::vector<double> g(static_cast<std::size_t>(points));
  for (Index i = 0; i < points; ++i) {
    g[i] = points == 1 ? start : start + (stop - start) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return g;
}

std::vector<double> log_grid(double start, double stop, Index points) {
  std::vector<double> g = linear_grid(std::log10(start), std::log10(stop), points);
  for (double& v : g) v = std::pow(10.0, v);
  return g;
}

Index sample_count(const SweepConfig& cfg, double value) {
  if (cfg.experiment != Experiment::kDimension) return cfg.n;
  return std::max<Index>(1, std::llround(static_cast<double>(cfg.dx) / value));
}

void validate(const SweepConfig& cfg) {
  if (cfg.name.empty() || cfg.name.find_first_of("/\\ ") != std::string::npos) {
    throw ConfigError("experiment.name", "must be a nonempty file stem without spaces or slashes");
  }
  if (cfg.dx < 1) throw ConfigError("task.dx", "must be >= 1");
  if (cfg.dy < 1) throw ConfigError("task.dy", "must be >= 1");
  if (cfg.experiment != Experiment::kDimension && cfg.n < 1) throw ConfigError("task.n", "must be >= 1");
  if (!(cfg.sigma_noise >= 0.0)) throw ConfigError("task.sigma_noise", "must be >= 0");
  const Index k = std::min(cfg.dx, cfg.dy);
  if (cfg.delta == DeltaKind::kLowRank) {
    if (cfg.experiment != Experiment::kRank && (cfg.delta_rank < 1 || cfg.delta_rank > k)) {
      throw ConfigError("task.delta_rank", "must lie in [1, min(dx, dy)]");
    }
  } else {
    if (!(cfg.decay_rate >= 0.0)) throw ConfigError("task.decay_rate", "must be >= 0");
    if (!(cfg.decay_scale > 0.0)) throw ConfigError("task.decay_scale", "must be > 0");
  }
  if (cfg.experiment == Experiment::kRank && cfg.delta != DeltaKind::kLowRank) {
    throw ConfigError("task.delta", "rank_sweep needs delta = low_rank");
  }
  if (cfg.experiment == Experiment::kDecay && cfg.delta != DeltaKind::kExpDecay) {
    throw ConfigError("task.delta", "decay_sweep needs delta = exp_decay");
  }

  if (cfg.grid.empty()) throw ConfigError("grid", "grid is empty");
  const bool up = cfg.grid.size() < 2 || cfg.grid[1] > cfg.grid[0];
  for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
    const double v = cfg.grid[i];
    if (!std::isfinite(v)) throw ConfigError("grid", "values must be finite");
    if (i > 0 && (up ? !(v > cfg.grid[i - 1]) : !(v < cfg.grid[i - 1]))) {
      throw ConfigError("grid", "values must be strictly monotone");
    }
    switch (cfg.experiment) {
      case Experiment::kDimension:
        if (!(v > 0.0)) throw ConfigError("grid", "dimension ratios must be > 0");
        break;
      case Experiment::kNoise:
        if (!(v >= 0.0)) throw ConfigError("grid", "noise levels must be >= 0");
        break;
      case Experiment::kRank:
        if (v != std::floor(v) || v < 0.0 || v > static_cast<double>(k)) {
          throw ConfigError("grid", "ranks must be integers in [0, min(dx, dy)]");
        }
        break;
      case Experiment::kDecay:
        if (!(v >= 0.0)) throw ConfigError("grid", "decay rates must be >= 0");
        break;
    }
  }

  if (cfg.methods.empty()) throw ConfigError("methods", "no methods configured");
  for (const MethodTag& m : cfg.methods) {
    if ((m.kind == MethodKind::kLora || m.kind == MethodKind::kAls) && (m.param < 1 || m.param > k)) {
      throw ConfigError(m.kind == MethodKind::kLora ? "methods.lora_ranks" : "methods.als_ranks",
                        "rank " + std::to_string(m.param) + " outside [1, min(dx, dy)]");
    }
  }
  if (cfg.seeds < 1) throw ConfigError("run.seeds", "must be >= 1");
  if (cfg.workers < 1) throw ConfigError("run.workers", "must be >= 1");
}

SweepConfig parse_config(const std::string& text) {
  SweepConfig cfg;
  GridSpec grid;
  bool methods_seen = false;
  std::vector<MethodTag> fft, lora, gd, als;
  std::map<std::string, int> seen;

  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "line " + std::to_string(lineno) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string field = section + "." + key;
    if (seen[field]++) throw ConfigError(field, "duplicate key");

    if (field == "experiment.type") {
      cfg.experiment = parse_experiment(value);
    } else if (field == "experiment.name") {
      cfg.name = value;
    } else if (field == "grid.values") {
      for (const auto& v : split_list(value)) grid.values.push_back(to_double(field, v));
      grid.has_values = true;
    } else if (field == "grid.spacing") {
      if (value != "log" && value != "linear") throw ConfigError(field, "expected log or linear");
      grid.spacing = value;
    } else if (field == "grid.start") {
      grid.start = to_double(field, value);
      grid.has_range = true;
    } else if (field == "grid.stop") {
      grid.stop = to_double(field, value);
      grid.has_range = true;
    } else if (field == "grid.points") {
      grid.points = to_int(field, value);
      grid.has_range = true;
    } else if (field == "task.dx") {
      cfg.dx = to_int(field, value);
    } else if (field == "task.dy") {
      cfg.dy = to_int(field, value);
    } else if (field == "task.n") {
      cfg.n = to_int(field, value);
    } else if (field == "task.sigma_noise") {
      cfg.sigma_noise = to_double(field, value);
    } else if (field == "task.delta") {
      if (value == "low_rank") {
        cfg.delta = DeltaKind::kLowRank;
      } else if (value == "exp_decay") {
        cfg.delta = DeltaKind::kExpDecay;
      } else {
        throw ConfigError(field, "expected low_rank or exp_decay");
      }
    } else if (field == "task.delta_rank") {
      cfg.delta_rank = to_int(field, value);
    } else if (field == "task.decay_rate") {
      cfg.decay_rate = to_double(field, value);
    } else if (field == "task.decay_scale") {
      cfg.decay_scale = to_double(field, value);
    } else if (field == "task.pretrained") {
      if (value != "gaussian" && value != "zero") throw ConfigError(field, "expected gaussian or zero");
      cfg.zero_pretrained = value == "zero";
    } else if (field == "methods.fft") {
      methods_seen = true;
      if (to_bool(field, value)) fft.push_back(MethodTag::fft());
    } else if (field == "methods.gd") {
      methods_seen = true;
      if (to_bool(field, value)) gd.push_back({MethodKind::kGd, 0});
    } else if (field == "methods.lora_ranks" || field == "methods.als_ranks") {
      methods_seen = true;
      auto& dst = key == "lora_ranks" ? lora : als;
      for (const auto& v : split_list(value)) {
        dst.push_back({key == "lora_ranks" ? MethodKind::kLora : MethodKind::kAls, to_int(field, v)});
      }
    } else if (field == "run.seeds") {
      cfg.seeds = to_int(field, value);
    } else if (field == "run.base_seed") {
      cfg.base_seed = to_uint64(field, value);
    } else if (field == "run.workers") {
      cfg.workers = to_int(field, value);
    } else if (field == "run.pin_task") {
      cfg.pin_task = to_bool(field, value);
    } else if (field == "run.closed_form") {
      cfg.closed_form = to_bool(field, value);
    } else if (field == "run.output_path") {
      cfg.output_path = value;
    } else {
      throw ConfigError(field, "unknown key");
    }
  }

  if (!seen.count("experiment.type")) throw ConfigError("experiment.type", "missing");
  if (grid.has_values && grid.has_range) {
    throw ConfigError("grid", "give either values or start/stop/points, not both");
  }
  if (grid.has_values) {
    cfg.grid = grid.values;
  } else if (grid.has_range) {
    if (grid.points < 1) throw ConfigError("grid.points", "must be >= 1");
    if (grid.spacing == "log") {
      if (!(grid.start > 0.0) || !(grid.stop > 0.0)) throw ConfigError("grid.start", "log spacing needs positive bounds");
      cfg.grid = log_grid(grid.start, grid.stop, grid.points);
    } else {
      cfg.grid = linear_grid(grid.start, grid.stop, grid.points);
    }
  }
  if (methods_seen) {
    // Fixed order: fft, lora ranks, gd, als ranks.
    cfg.methods = fft;
    cfg.methods.insert(cfg.methods.end(), lora.begin(), lora.end());
    cfg.methods.insert(cfg.methods.end(), gd.begin(), gd.end());
    cfg.methods.insert(cfg.methods.end(), als.begin(), als.end());
  }
  validate(cfg);
  return cfg;
}

SweepConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string to_ini(const SweepConfig& cfg) {
  std::ostringstream os;
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
    return s;
  };
  std::vector<std::string> grid, lora, als;
  for (double v : cfg.grid) grid.push_back(fmt17(v));
  bool fft = false, gd = false;
  for (const MethodTag& m : cfg.methods) {
    switch (m.kind) {
      case MethodKind::kFft:
        fft = true;
        break;
      case MethodKind::kGd:
        gd = true;
        break;
      case MethodKind::kLora:
        lora.push_back(std::to_string(m.param));
        break;
      case MethodKind::kAls:
        als.push_back(std::to_string(m.param));
        break;
    }
  }
  os << "[experiment]\n"
     << "name = " << cfg.name << "\n"
     << "type = " << to_string(cfg.experiment) << "\n\n"
     << "[grid]\n"
     << "values = " << join(grid) << "\n\n"
     << "[task]\n"
     << "dx = " << cfg.dx << "\n"
     << "dy = " << cfg.dy << "\n"
     << "n = " << cfg.n << "\n"
     << "sigma_noise = " << fmt17(cfg.sigma_noise) << "\n"
     << "delta = " << (cfg.delta == DeltaKind::kLowRank ? "low_rank" : "exp_decay") << "\n"
     << "delta_rank = " << cfg.delta_rank << "\n"
     << "decay_rate = " << fmt17(cfg.decay_rate) << "\n"
     << "decay_scale = " << fmt17(cfg.decay_scale) << "\n"
     << "pretrained = " << (cfg.zero_pretrained ? "zero" : "gaussian") << "\n\n"
     << "[methods]\n"
     << "fft = " << (fft ? "true" : "false") << "\n"
     << "lora_ranks = " << join(lora) << "\n"
     << "gd = " << (gd ? "true" : "false") << "\n"
     << "als_ranks = " << join(als) << "\n\n"
     << "[run]\n"
     << "seeds = " << cfg.seeds << "\n"
     << "base_seed = " << cfg.base_seed << "\n"
     << "pin_task = " << (cfg.pin_task ? "true" : "false") << "\n"
     << "closed_form = " << (cfg.closed_form ? "true" : "false") << "\n"
     << "output_path = " << cfg.output_path << "\n";
  return os.str();
}

}  // namespace lrft
