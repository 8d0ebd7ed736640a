#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ptkit/backbone.hpp"
#include "ptkit/prompting.hpp"
#include "ptkit/tuning.hpp"

namespace ptkit {

enum class ProtocolKind { zero_shot, few_shot_cross, monolingual };

std::string to_string(ProtocolKind k);
ProtocolKind protocol_kind_from_string(const std::string& s);

/// One experimental design: transfer from source to target with the given
/// slice sizes. zero_shot forbids target training data, monolingual pins
/// source == target.
struct Protocol {
  ProtocolKind kind = ProtocolKind::zero_shot;
  std::string source_language;
  std::string target_language;
  int source_train_size = 500;
  int target_train_size = 0;
  int test_size = 200;
  Task task = Task::clone_detection;

  void validate() const;
};

struct LanguageData {
  std::vector<TaskExample> train;
  std::vector<TaskExample> validation;
  std::vector<TaskExample> test;
};

using DatasetMap = std::map<std::string, LanguageData>;

/// Fraction of exact label matches. Errors on empty or mismatched inputs.
double accuracy(const std::vector<Label>& predictions, const std::vector<Label>& gold);

struct RunMetrics {
  double test_accuracy = 0.0;
  double precision = 0.0;  // auxiliary, positive class
  double recall = 0.0;     // auxiliary, positive class
  int test_count = 0;
  double best_val_accuracy = 0.0;
  int best_epoch = 0;
};

/// The persisted, replayable description of one experiment. Contains no
/// timestamps, so identical configurations persist byte-identically.
struct RunRecord {
  std::string run_id;
  Protocol protocol;
  PromptTemplate tmpl;
  std::vector<std::pair<std::string, Label>> verbalizer_pairs;
  TrainConfig train_config;
  TrainConfig few_shot_config;
  int budget = 128;
  uint64_t prompt_seed = 1;
  std::vector<EpochRecord> history;
  std::vector<EpochRecord> few_shot_history;
  RunMetrics metrics;
  std::map<std::string, std::string> parameter_hashes;  // group -> hex
  std::map<std::string, std::string> artifacts;         // name -> path
};

nlohmann::json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);
void save_run_record(const std::string& path, const RunRecord& record);
RunRecord load_run_record(const std::string& path);

/// Everything a protocol run needs besides the protocol itself.
struct RunInputs {
  const Backbone* backbone = nullptr;  // pretrained; copied per run
  const DatasetMap* datasets = nullptr;
  PromptTemplate tmpl;
  std::vector<std::pair<std::string, Label>> verbalizer_pairs;  // empty -> yes/no
  TrainConfig train_config;
  TrainConfig few_shot_config;  // few_shot_cross continuation settings
  int budget = 128;
  uint64_t prompt_seed = 1;
  std::string run_id = "run";
};

/// Trains on the source slices, optionally continues on a few target
/// samples, then applies the frozen result to the target test slice.
/// Repeatable bit-exactly for fixed seeds. When out_model is non-null the
/// trained model is copied there (for archiving).
RunRecord run_protocol(const Protocol& protocol, const RunInputs& inputs,
                       TaskModel* out_model = nullptr);

struct AblationGrid {
  std::vector<Placement> placements;
  std::vector<int> prompt_counts;
  std::vector<std::string> source_languages;

  void validate() const;
};

/// One run per grid point (cross product), all sharing the base seeds.
std::vector<RunRecord> run_ablation(const AblationGrid& grid, const Protocol& base,
                                    const RunInputs& inputs);

/// Tab-separated summary keyed by grid coordinates.
std::string ablation_summary(const std::vector<RunRecord>& records);

struct RankedCandidate {
  size_t index = 0;  // position in the input candidate list
  double score = 0.0;
};

/// Scores every candidate snippet against the query and sorts descending;
/// stable for equal scores.
std::vector<RankedCandidate> rank_candidates(const TaskModel& model, const std::string& query,
                                             const std::vector<std::string>& candidate_snippets);

}  // namespace ptkit
