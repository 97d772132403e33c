#pragma once

#include <string>
#include <vector>

#include "risnoma/channel.hpp"

namespace rn::data {

struct Dataset {
  chan::ScenarioConfig scenario;
  chan::ModelKind kind = chan::ModelKind::Deterministic;
  std::uint64_t master_seed = 0;
  std::vector<chan::ChannelSample> train;
  std::vector<chan::ChannelSample> test;
};

/// Draws train/test samples from one fixed scene. Train sample k uses the
/// derived seed stream k, test sample k stream 2^20 + k, so the splits
/// share no randomness.
Dataset generate_dataset(const chan::ScenarioConfig& sc, chan::ModelKind kind,
                         std::uint64_t master_seed, int n_train, int n_test);

/// Binary container, magic "RISN". Little-endian throughout; write/read
/// round-trips bit-exactly.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace rn::data
