#pragma once

#include <string>

#include "risnoma/channel.hpp"
#include "risnoma/training.hpp"

namespace rn::cfg {

/// Everything a run needs, mirroring the plain-text key=value file.
/// Unknown keys are rejected by name; echo() -> parse round-trips losslessly.
struct RunConfig {
  chan::ScenarioConfig scenario;
  chan::ModelKind model_kind = chan::ModelKind::Deterministic;
  bool partial_csi = false;  // csi_mode = full | partial
  bool mutual_coupling = true;
  train::TrainingConfig training;
  int n_train = 10240;
  int n_test = 1024;
  int hidden_width = 64;
  int full_depth = 8;
  int direct_opt_steps = 200;
  double direct_opt_lr = 0.05;

  void validate() const;
};

/// "paper": table defaults (36x36 panel, 10240/1024 samples).
/// "desk": 18x18 panel, 2048/512 samples, narrower net, CPU-sized budget.
RunConfig preset(const std::string& name);

/// Applies `key=value` lines from a file on top of `base`.
void apply_file(RunConfig& base, const std::string& path);

/// Single assignment; throws ConfigError naming the key on any problem.
void apply_kv(RunConfig& base, const std::string& key, const std::string& value);

/// Emits every key in a fixed order; parsing the result reproduces `c`.
std::string echo(const RunConfig& c);

}  // namespace rn::cfg
