#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "souschef/util.hpp"

namespace souschef {

/// One pipeline stage as recorded in the run manifest.
struct StageRecord {
  std::string name;  // sample | revise | make-tasks | serve | analyze
  std::uint64_t seed = 0;
  std::string backend_id;  // revise only
  nlohmann::json inputs = nlohmann::json::object();   // flag -> value, enough to re-run
  std::vector<std::string> artifacts;                 // paths written
  Timestamp started_at{};
  Timestamp finished_at{};
};

/// Merges `stage` into the manifest at `path` (creating it with a fresh run_id),
/// replacing any earlier record of the same stage.
nlohmann::json record_stage(const std::filesystem::path& path, const StageRecord& stage);

}  // namespace souschef
