#include "souschef/manifest.hpp"

#include "souschef/error.hpp"

namespace souschef {

using nlohmann::json;

json record_stage(const std::filesystem::path& path, const StageRecord& stage) {
  json manifest = json::object();
  if (std::filesystem::exists(path)) {
    try {
      manifest = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw FormatError("manifest " + path.string() + ": " + e.what());
    }
  }
  if (!manifest.contains("run_id")) {
    manifest["run_id"] = sha256_hex(format_timestamp(stage.started_at) + "\n" +
                                    std::to_string(stage.seed) + "\n" + stage.name)
                             .substr(0, 12);
  }
  manifest["stages"][stage.name] = {{"seed", stage.seed},
                                    {"backend_id", stage.backend_id},
                                    {"inputs", stage.inputs},
                                    {"artifacts", stage.artifacts},
                                    {"started_at", format_timestamp(stage.started_at)},
                                    {"finished_at", format_timestamp(stage.finished_at)}};
  write_file(path, manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace souschef
