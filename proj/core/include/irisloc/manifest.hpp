#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace irisloc {

/// Reproducibility record written next to every command's outputs: re-running
/// the command with this config and seed regenerates them (bitwise, for
/// anything that is not a timing).
struct RunManifest {
  std::string command;
  std::string tool_version;
  uint64_t seed = 0;
  std::map<std::string, std::string> config;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string weights_hash;  // hex FNV-1a of the weights file, when one is used

  void write(const std::string& path) const;
  static RunManifest read(const std::string& path);
};

}  // namespace irisloc
