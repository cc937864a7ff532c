#include "isg/config.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include "isg/errors.hpp"

namespace isg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return "";
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

struct RawConfig {
  // section -> key -> value, plus consumption tracking for strictness
  std::map<std::string, std::map<std::string, std::string>> values;
  mutable std::map<std::string, std::map<std::string, bool>> used;

  bool has(const std::string& sec, const std::string& key) const {
    const auto s = values.find(sec);
    return s != values.end() && s->second.count(key) > 0;
  }
  std::string take(const std::string& sec, const std::string& key) const {
    used[sec][key] = true;
    return values.at(sec).at(key);
  }
};

RawConfig parse_raw(std::istream& in) {
  RawConfig raw;
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) + ": malformed section");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value inside a section");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));
    if (key.empty() || value.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key or value");
    }
    if (!raw.values[section].emplace(key, value).second) {
      throw ConfigError("config: duplicate key " + section + "." + key);
    }
  }
  return raw;
}

double to_double(const std::string& sec, const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) {
      throw std::invalid_argument(v);
    }
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: " + sec + "." + key + " is not a number: " + v);
  }
}

long long to_int(const std::string& sec, const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) {
      throw std::invalid_argument(v);
    }
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config: " + sec + "." + key + " is not an integer: " + v);
  }
}

bool to_bool(const std::string& sec, const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") {
    return true;
  }
  if (v == "false" || v == "0") {
    return false;
  }
  throw ConfigError("config: " + sec + "." + key + " is not a boolean: " + v);
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in) {
  const RawConfig raw = parse_raw(in);
  ExperimentConfig cfg;

  auto dbl = [&raw](const std::string& s, const std::string& k, double& out) {
    if (raw.has(s, k)) out = to_double(s, k, raw.take(s, k));
  };
  auto integer = [&raw](const std::string& s, const std::string& k, int& out) {
    if (raw.has(s, k)) out = static_cast<int>(to_int(s, k, raw.take(s, k)));
  };
  auto boolean = [&raw](const std::string& s, const std::string& k, bool& out) {
    if (raw.has(s, k)) out = to_bool(s, k, raw.take(s, k));
  };
  auto str = [&raw](const std::string& s, const std::string& k, std::string& out) {
    if (raw.has(s, k)) out = raw.take(s, k);
  };

  integer("model", "layers", cfg.model.num_layers);
  integer("model", "hidden", cfg.model.hidden_dim);
  dbl("model", "alpha", cfg.model.alpha);
  dbl("model", "theta_id", cfg.model.theta_id);
  boolean("model", "weight_sharing", cfg.model.weight_sharing);

  dbl("ising", "beta", cfg.ising.beta);
  dbl("ising", "coupling", cfg.ising.coupling);
  integer("ising", "sweeps", cfg.ising_sweeps);
  boolean("ising", "alg1_double_beta", cfg.ising.double_beta_acceptance);

  dbl("train", "learning_rate", cfg.train.learning_rate);
  integer("train", "epochs", cfg.train.epochs);
  dbl("train", "eta_target", cfg.train.eta_target);
  dbl("train", "penalty_weight", cfg.train.penalty_weight);
  integer("train", "rloo_k", cfg.train.rloo_k);
  dbl("train", "adam_beta1", cfg.train.adam_beta1);
  dbl("train", "adam_beta2", cfg.train.adam_beta2);
  dbl("train", "adam_epsilon", cfg.train.adam_epsilon);
  integer("train", "batch_size", cfg.train.batch_size);
  boolean("train", "stochastic_fraction_reg", cfg.train.stochastic_fraction_reg);

  str("task", "name", cfg.task.name);
  if (cfg.task.name.empty()) {
    throw ConfigError("config: task.name is required (sai or mesh)");
  }
  if (cfg.task.name != "sai" && cfg.task.name != "mesh") {
    throw ConfigError("config: task.name must be sai or mesh, got " + cfg.task.name);
  }
  if (cfg.task.name == "sai") {
    if (raw.has("task", "mode")) {
      const std::string mode = raw.take("task", "mode");
      if (mode == "a2") {
        cfg.task.sai_mode = sai::PatternMode::PatternOfASquared;
      } else if (mode == "full") {
        cfg.task.sai_mode = sai::PatternMode::Full;
      } else {
        throw ConfigError("config: task.mode must be a2 or full, got " + mode);
      }
    }
    boolean("task", "symmetrize", cfg.task.sai_symmetrize);
    boolean("task", "force_diagonal", cfg.task.sai_force_diagonal);
    integer("task", "dim_cap", cfg.task.sai_dim_cap);
  }

  str("io", "data", cfg.io.data_dir);
  str("io", "out", cfg.io.out_dir);
  if (raw.has("io", "seed")) {
    cfg.io.seed = static_cast<std::uint64_t>(to_int("io", "seed", raw.take("io", "seed")));
  }
  cfg.train.rng_seed = cfg.io.seed;
  cfg.train.sweeps = cfg.ising_sweeps;

  // Strictness: anything not consumed is an error (catches typos and keys
  // that do not apply to the selected task).
  static const std::map<std::string, bool> known_sections = {
      {"model", true}, {"ising", true}, {"train", true}, {"task", true}, {"io", true}};
  for (const auto& [section, kv] : raw.values) {
    if (known_sections.count(section) == 0) {
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, value] : kv) {
      if (!raw.used[section][key]) {
        throw ConfigError("config: unknown key " + section + "." + key);
      }
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config: " + path);
  }
  return parse_experiment_config(in);
}

std::string resolved_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[model] layers=" << cfg.model.num_layers << " hidden=" << cfg.model.hidden_dim
      << " alpha=" << cfg.model.alpha << " theta_id=" << cfg.model.theta_id
      << " weight_sharing=" << (cfg.model.weight_sharing ? "true" : "false") << "\n";
  out << "[ising] beta=" << cfg.ising.beta << " coupling=" << cfg.ising.coupling
      << " sweeps=" << cfg.ising_sweeps
      << " alg1_double_beta=" << (cfg.ising.double_beta_acceptance ? "true" : "false") << "\n";
  out << "[train] learning_rate=" << cfg.train.learning_rate << " epochs=" << cfg.train.epochs
      << " eta_target=" << cfg.train.eta_target
      << " penalty_weight=" << cfg.train.penalty_weight << " rloo_k=" << cfg.train.rloo_k
      << " adam_beta1=" << cfg.train.adam_beta1 << " adam_beta2=" << cfg.train.adam_beta2
      << " adam_epsilon=" << cfg.train.adam_epsilon << " batch_size=" << cfg.train.batch_size
      << " stochastic_fraction_reg=" << (cfg.train.stochastic_fraction_reg ? "true" : "false")
      << "\n";
  out << "[task] name=" << cfg.task.name;
  if (cfg.task.name == "sai") {
    out << " mode=" << (cfg.task.sai_mode == sai::PatternMode::Full ? "full" : "a2")
        << " symmetrize=" << (cfg.task.sai_symmetrize ? "true" : "false")
        << " force_diagonal=" << (cfg.task.sai_force_diagonal ? "true" : "false")
        << " dim_cap=" << cfg.task.sai_dim_cap;
  }
  out << "\n";
  out << "[io] data=" << cfg.io.data_dir << " out=" << cfg.io.out_dir << " seed=" << cfg.io.seed
      << "\n";
  return out.str();
}

}  // namespace isg
