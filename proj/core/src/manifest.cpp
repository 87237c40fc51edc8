#include "irisloc/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "irisloc/error.hpp"

namespace irisloc {

using nlohmann::json;

void RunManifest::write(const std::string& path) const {
  json j;
  j["command"] = command;
  j["tool_version"] = tool_version;
  j["seed"] = seed;
  j["config"] = config;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  if (!weights_hash.empty()) j["weights_hash"] = weights_hash;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("manifest: cannot write " + path);
  out << j.dump(2) << "\n";
}

RunManifest RunManifest::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("manifest: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw IoError("manifest: invalid JSON in " + path + ": " + e.what());
  }
  RunManifest m;
  m.command = j.value("command", "");
  m.tool_version = j.value("tool_version", "");
  m.seed = j.value("seed", uint64_t{0});
  if (j.contains("config"))
    m.config = j["config"].get<std::map<std::string, std::string>>();
  if (j.contains("inputs")) m.inputs = j["inputs"].get<std::vector<std::string>>();
  if (j.contains("outputs")) m.outputs = j["outputs"].get<std::vector<std::string>>();
  m.weights_hash = j.value("weights_hash", "");
  return m;
}

}  // namespace irisloc
