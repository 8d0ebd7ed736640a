#pragma once

#include <optional>
#include <string>

#include "ptkit/backbone.hpp"
#include "ptkit/tuning.hpp"

namespace ptkit {

/// Everything one file needs to re-run inference: the backbone (config,
/// vocabulary, parameters) and, when present, the tuned prompt table plus
/// the template/verbalizer/budget it was trained with.
struct ModelArchive {
  Backbone backbone;
  std::optional<PromptTable> prompts;
  std::optional<PromptTemplate> tmpl;
  std::optional<std::vector<std::pair<std::string, Label>>> verbalizer_pairs;
  std::optional<int> budget;
};

// Single-file archive: magic, JSON header (config, vocabulary, array
// directory with shapes), then the raw little-endian float64 arrays in
// directory order. save / load round-trips parameters bit-exactly.
void save_model(const std::string& path, const ModelArchive& archive);
ModelArchive load_model(const std::string& path);

void save_backbone(const std::string& path, const Backbone& backbone);
Backbone load_backbone(const std::string& path);

ModelArchive archive_from_task_model(const TaskModel& model);
TaskModel task_model_from_archive(const ModelArchive& archive);

/// FNV-1a of the whole archive file (checkpoint identity in run records).
std::string file_hash_hex(const std::string& path);

}  // namespace ptkit
