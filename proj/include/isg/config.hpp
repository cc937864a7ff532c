#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "isg/field_net.hpp"
#include "isg/sai.hpp"
#include "isg/trainer.hpp"

namespace isg {

// Experiment description: sections [model], [ising], [train], [task], [io]
// with key = value lines, '#' comments, optional double quotes around
// strings. Parsing is strict: unknown sections or keys fail, as do keys that
// do not apply to the selected task.
struct ExperimentConfig {
  FieldNetConfig model;  // input_dim is derived from the task, not the file
  IsingConfig ising;
  int ising_sweeps = 3;  // MCMC sweeps per sample, [ising] sweeps
  TrainConfig train;

  struct Task {
    std::string name;  // "sai" or "mesh"
    sai::PatternMode sai_mode = sai::PatternMode::PatternOfASquared;
    bool sai_symmetrize = false;
    bool sai_force_diagonal = false;
    int sai_dim_cap = 64;
  } task;

  struct Io {
    std::string data_dir;
    std::string out_dir;
    std::uint64_t seed = 1;
  } io;
};

ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::string& path);

// Canonical dump of every resolved value, for run logs.
std::string resolved_config(const ExperimentConfig& cfg);

}  // namespace isg
