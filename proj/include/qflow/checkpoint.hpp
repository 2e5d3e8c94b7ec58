#pragma once

#include <map>
#include <string>
#include <vector>

#include "qflow/nn.hpp"

namespace qflow {

// Checkpoint layout: <dir>/manifest.json plus <dir>/params.bin holding raw
// little-endian 64-bit float arrays concatenated in manifest-declared order.
// Fragments are keyed by component name (critic.q1, critic.q2, policy.source,
// policy.flow). The resolved run configuration snapshot travels alongside as
// <dir>/config.txt so a checkpoint is loadable without the original config.

struct CheckpointContents {
  long step = 0;
  std::map<std::string, MlpNetwork> fragments;
  std::string config_text;
};

void save_checkpoint(const std::string& dir, long step,
                     const std::vector<std::pair<std::string, const MlpNetwork*>>& fragments,
                     const std::string& config_text);

CheckpointContents load_checkpoint(const std::string& dir);

}  // namespace qflow
