#include "ptkit/evalharness.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ptkit/errors.hpp"
#include "ptkit/serialize.hpp"

namespace ptkit {

using nlohmann::json;

std::string to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::zero_shot: return "zero_shot";
    case ProtocolKind::few_shot_cross: return "few_shot_cross";
    case ProtocolKind::monolingual: return "monolingual";
  }
  return "zero_shot";
}

ProtocolKind protocol_kind_from_string(const std::string& s) {
  if (s == "zero_shot") return ProtocolKind::zero_shot;
  if (s == "few_shot_cross") return ProtocolKind::few_shot_cross;
  if (s == "monolingual") return ProtocolKind::monolingual;
  throw ConfigError("unknown protocol kind: " + s);
}

void Protocol::validate() const {
  if (source_language.empty() || target_language.empty()) {
    throw ConfigError("protocol: source and target languages are required");
  }
  if (source_train_size < 1) throw ConfigError("protocol: source_train_size must be >= 1");
  if (test_size < 1) throw ConfigError("protocol: test_size must be >= 1");
  switch (kind) {
    case ProtocolKind::zero_shot:
      if (target_train_size != 0) {
        throw ConfigError("protocol: zero_shot requires target_train_size == 0");
      }
      break;
    case ProtocolKind::few_shot_cross:
      if (target_train_size < 1) {
        throw ConfigError(
            "protocol: few_shot_cross requires target_train_size >= 1 (use zero_shot instead)");
      }
      break;
    case ProtocolKind::monolingual:
      if (source_language != target_language) {
        throw ConfigError("protocol: monolingual requires source_language == target_language");
      }
      if (target_train_size != 0) {
        throw ConfigError("protocol: monolingual requires target_train_size == 0");
      }
      break;
  }
}

double accuracy(const std::vector<Label>& predictions, const std::vector<Label>& gold) {
  if (predictions.empty()) throw ConfigError("accuracy: empty prediction list");
  if (predictions.size() != gold.size()) {
    throw ConfigError("accuracy: prediction/gold length mismatch: " +
                      std::to_string(predictions.size()) + " vs " + std::to_string(gold.size()));
  }
  size_t correct = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == gold[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

// --- run record serialization ----------------------------------------------

json to_json(const RunRecord& record) {
  json j;
  j["run_id"] = record.run_id;
  j["protocol"] = {
      {"kind", to_string(record.protocol.kind)},
      {"source_language", record.protocol.source_language},
      {"target_language", record.protocol.target_language},
      {"source_train_size", record.protocol.source_train_size},
      {"target_train_size", record.protocol.target_train_size},
      {"test_size", record.protocol.test_size},
      {"task", to_string(record.protocol.task)},
  };
  j["template"] = to_json(record.tmpl);
  j["verbalizer"] = verbalizer_pairs_to_json(record.verbalizer_pairs);
  j["train_config"] = to_json(record.train_config);
  j["few_shot_config"] = to_json(record.few_shot_config);
  j["budget"] = record.budget;
  j["prompt_seed"] = record.prompt_seed;
  json history = json::array();
  for (const auto& r : record.history) history.push_back(to_json(r));
  j["history"] = history;
  json few_history = json::array();
  for (const auto& r : record.few_shot_history) few_history.push_back(to_json(r));
  j["few_shot_history"] = few_history;
  j["metrics"] = {
      {"test_accuracy", record.metrics.test_accuracy},
      {"precision", record.metrics.precision},
      {"recall", record.metrics.recall},
      {"test_count", record.metrics.test_count},
      {"best_val_accuracy", record.metrics.best_val_accuracy},
      {"best_epoch", record.metrics.best_epoch},
  };
  j["parameter_hashes"] = record.parameter_hashes;
  j["artifacts"] = record.artifacts;
  return j;
}

RunRecord run_record_from_json(const json& j) {
  RunRecord record;
  record.run_id = get_string_or(j, "run_id", "run");
  const json& p = require_key(j, "protocol");
  record.protocol.kind = protocol_kind_from_string(require_string_key(p, "kind"));
  record.protocol.source_language = require_string_key(p, "source_language");
  record.protocol.target_language = require_string_key(p, "target_language");
  record.protocol.source_train_size = get_int_or(p, "source_train_size", 0);
  record.protocol.target_train_size = get_int_or(p, "target_train_size", 0);
  record.protocol.test_size = get_int_or(p, "test_size", 0);
  record.protocol.task = task_from_string(get_string_or(p, "task", "clone_detection"));
  record.tmpl = prompt_template_from_json(require_key(j, "template"));
  record.verbalizer_pairs = verbalizer_pairs_from_json(require_key(j, "verbalizer"));
  record.train_config = train_config_from_json(require_key(j, "train_config"));
  if (auto it = j.find("few_shot_config"); it != j.end()) {
    record.few_shot_config = train_config_from_json(*it);
  }
  record.budget = get_int_or(j, "budget", 128);
  record.prompt_seed = get_u64_or(j, "prompt_seed", 1);
  for (const auto& r : require_key(j, "history")) {
    record.history.push_back(epoch_record_from_json(r));
  }
  if (auto it = j.find("few_shot_history"); it != j.end()) {
    for (const auto& r : *it) record.few_shot_history.push_back(epoch_record_from_json(r));
  }
  const json& m = require_key(j, "metrics");
  record.metrics.test_accuracy = get_double_or(m, "test_accuracy", 0.0);
  record.metrics.precision = get_double_or(m, "precision", 0.0);
  record.metrics.recall = get_double_or(m, "recall", 0.0);
  record.metrics.test_count = get_int_or(m, "test_count", 0);
  record.metrics.best_val_accuracy = get_double_or(m, "best_val_accuracy", 0.0);
  record.metrics.best_epoch = get_int_or(m, "best_epoch", 0);
  if (auto it = j.find("parameter_hashes"); it != j.end()) {
    record.parameter_hashes = it->get<std::map<std::string, std::string>>();
  }
  if (auto it = j.find("artifacts"); it != j.end()) {
    record.artifacts = it->get<std::map<std::string, std::string>>();
  }
  return record;
}

void save_run_record(const std::string& path, const RunRecord& record) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write run record: " + path);
  out << to_json(record).dump(2) << '\n';
  if (!out) throw IoError("failed writing run record: " + path);
}

RunRecord load_run_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run record: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw SchemaError("corrupt run record: " + path);
  return run_record_from_json(j);
}

// --- protocol execution ------------------------------------------------------

namespace {

const LanguageData& require_language(const DatasetMap& datasets, const std::string& language) {
  auto it = datasets.find(language);
  if (it == datasets.end()) {
    throw ConfigError("datasets missing language split: " + language);
  }
  return it->second;
}

std::vector<TaskExample> take_slice(const std::vector<TaskExample>& pool, int count,
                                    const std::string& what) {
  if (static_cast<int>(pool.size()) < count) {
    throw ConfigError("split " + what + " holds " + std::to_string(pool.size()) +
                      " examples, need " + std::to_string(count));
  }
  return {pool.begin(), pool.begin() + count};
}

}  // namespace

RunRecord run_protocol(const Protocol& protocol, const RunInputs& inputs, TaskModel* out_model) {
  protocol.validate();
  if (!inputs.backbone || !inputs.datasets) {
    throw ConfigError("run_protocol: backbone and datasets are required");
  }

  const LanguageData& source = require_language(*inputs.datasets, protocol.source_language);
  const LanguageData& target = require_language(*inputs.datasets, protocol.target_language);

  auto train_slice = take_slice(source.train, protocol.source_train_size,
                                protocol.source_language + ".train");
  auto test_slice =
      take_slice(target.test, protocol.test_size, protocol.target_language + ".test");

  TaskModel model;
  model.backbone = *inputs.backbone;
  model.tmpl = inputs.tmpl;
  model.prompts = PromptTable::random_init(inputs.tmpl.prompt_count,
                                           model.backbone.hidden_dim(), inputs.prompt_seed);
  model.verbalizer = inputs.verbalizer_pairs.empty()
                         ? Verbalizer::yes_no(model.backbone.tokenizer)
                         : Verbalizer::make(model.backbone.tokenizer, inputs.verbalizer_pairs);
  model.budget = inputs.budget;

  RunRecord record;
  record.run_id = inputs.run_id;
  record.protocol = protocol;
  record.tmpl = inputs.tmpl;
  for (const auto& c : model.verbalizer.candidates()) {
    record.verbalizer_pairs.emplace_back(c.word, c.label);
  }
  record.train_config = inputs.train_config;
  record.few_shot_config = inputs.few_shot_config;
  record.budget = inputs.budget;
  record.prompt_seed = inputs.prompt_seed;

  TrainResult source_result = train(model, train_slice, source.validation, inputs.train_config);
  record.history = source_result.history;
  record.metrics.best_val_accuracy = source_result.best.validation_accuracy;
  record.metrics.best_epoch = source_result.best.epoch;

  if (protocol.kind == ProtocolKind::few_shot_cross) {
    auto few_slice = take_slice(target.train, protocol.target_train_size,
                                protocol.target_language + ".train");
    TrainResult few_result =
        few_shot_continue(model, few_slice, target.validation, inputs.few_shot_config);
    record.few_shot_history = few_result.history;
    record.metrics.best_val_accuracy = few_result.best.validation_accuracy;
    record.metrics.best_epoch = few_result.best.epoch;
  }

  // target evaluation must not touch any parameter
  std::map<ParamGroup, uint64_t> before;
  for (ParamGroup g : {ParamGroup::word_embeddings, ParamGroup::encoder, ParamGroup::mlm_head,
                       ParamGroup::prompt_table}) {
    before[g] = model.group_hash(g);
  }
  auto predictions = zero_shot_apply(model, test_slice);
  for (const auto& [group, hash] : before) {
    if (model.group_hash(group) != hash) {
      throw InvariantError("zero-shot evaluation mutated parameter group " + to_string(group));
    }
  }

  std::vector<Label> predicted;
  std::vector<Label> gold;
  predicted.reserve(predictions.size());
  gold.reserve(test_slice.size());
  for (const auto& p : predictions) predicted.push_back(p.label);
  for (const auto& ex : test_slice) gold.push_back(ex.label);

  record.metrics.test_accuracy = accuracy(predicted, gold);
  record.metrics.test_count = static_cast<int>(test_slice.size());
  if (record.metrics.test_count != protocol.test_size) {
    throw InvariantError("test-set size does not match the declared split size");
  }
  if (record.metrics.test_accuracy < 0.0 || record.metrics.test_accuracy > 1.0) {
    throw InvariantError("accuracy outside [0, 1]");
  }

  int true_pos = 0;
  int pred_pos = 0;
  int gold_pos = 0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == Label::positive) ++pred_pos;
    if (gold[i] == Label::positive) ++gold_pos;
    if (predicted[i] == Label::positive && gold[i] == Label::positive) ++true_pos;
  }
  record.metrics.precision = pred_pos == 0 ? 0.0 : static_cast<double>(true_pos) / pred_pos;
  record.metrics.recall = gold_pos == 0 ? 0.0 : static_cast<double>(true_pos) / gold_pos;

  for (ParamGroup g : {ParamGroup::word_embeddings, ParamGroup::encoder, ParamGroup::mlm_head,
                       ParamGroup::prompt_table}) {
    record.parameter_hashes[to_string(g)] = hash_group_hex(model.all_params(), g);
  }

  if (out_model) *out_model = std::move(model);
  return record;
}

void AblationGrid::validate() const {
  if (placements.empty() || prompt_counts.empty() || source_languages.empty()) {
    throw ConfigError("ablation grid: placements, prompt_counts and source_languages "
                      "must all be non-empty");
  }
}

std::vector<RunRecord> run_ablation(const AblationGrid& grid, const Protocol& base,
                                    const RunInputs& inputs) {
  grid.validate();
  std::vector<RunRecord> records;
  for (const auto& language : grid.source_languages) {
    for (Placement placement : grid.placements) {
      for (int count : grid.prompt_counts) {
        Protocol protocol = base;
        protocol.source_language = language;
        if (base.kind == ProtocolKind::monolingual) protocol.target_language = language;
        RunInputs point = inputs;
        point.tmpl.placement = placement;
        point.tmpl.prompt_count = count;
        point.run_id = inputs.run_id + "-" + language + "-" + to_string(placement) + "-k" +
                       std::to_string(count);
        records.push_back(run_protocol(protocol, point));
      }
    }
  }
  return records;
}

std::string ablation_summary(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << "source_language\tplacement\tprompt_count\ttest_accuracy\tbest_val_accuracy"
      << "\tbest_epoch\trun_id\n";
  for (const auto& r : records) {
    out << r.protocol.source_language << '\t' << to_string(r.tmpl.placement) << '\t'
        << r.tmpl.prompt_count << '\t' << r.metrics.test_accuracy << '\t'
        << r.metrics.best_val_accuracy << '\t' << r.metrics.best_epoch << '\t' << r.run_id
        << '\n';
  }
  return out.str();
}

std::vector<RankedCandidate> rank_candidates(const TaskModel& model, const std::string& query,
                                             const std::vector<std::string>& candidate_snippets) {
  if (candidate_snippets.empty()) throw ConfigError("rank_candidates: no candidates");
  std::vector<RankedCandidate> ranked;
  ranked.reserve(candidate_snippets.size());
  for (size_t i = 0; i < candidate_snippets.size(); ++i) {
    TaskExample ex;
    ex.id = "candidate-" + std::to_string(i);
    ex.task = Task::code_search;
    ex.language = "query";
    ex.text_a = candidate_snippets[i];
    ex.text_b = query;
    ex.label = Label::positive;
    MaskedSequence seq = render(model.tmpl, ex, model.backbone.tokenizer, model.budget);
    ranked.push_back({i, model.score(seq)});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) {
                     return a.score > b.score;
                   });
  return ranked;
}

}  // namespace ptkit
