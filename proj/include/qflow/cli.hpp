#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qflow {

// Exit codes: 0 success, 1 config error, 2 numeric failure, 3 I/O error.
int run_cli(int argc, const char* const* argv);

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides);
int cmd_eval(const std::string& checkpoint_dir, int episodes, std::uint64_t seed);
int cmd_analyze(const std::string& kind, const std::string& config_path,
                const std::vector<std::string>& overrides, const std::string& checkpoint_dir);

}  // namespace qflow
