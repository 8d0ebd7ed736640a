// ptkit command line: prepare-data, pretrain, train, eval, ablate.
//
// Every command is driven by a single declarative JSON config; flags only
// pick the config file and the output root (also settable through
// PTKIT_OUT_ROOT). Exit codes: 0 success, 2 configuration or input error,
// 3 runtime invariant failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ptkit/checkpoint.hpp"
#include "ptkit/corpus.hpp"
#include "ptkit/dialect.hpp"
#include "ptkit/errors.hpp"
#include "ptkit/evalharness.hpp"
#include "ptkit/serialize.hpp"
#include "ptkit/tuning.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ptkit;

namespace {

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json config = json::parse(in, nullptr, false);
  if (config.is_discarded() || !config.is_object()) {
    throw ConfigError("config file is not a JSON object: " + path);
  }
  return config;
}

/// Output paths resolve against the output root; absolute paths pass through.
std::string out_path(const std::string& root, const std::string& path) {
  fs::path p(path);
  fs::path resolved = p.is_absolute() ? p : fs::path(root) / p;
  if (resolved.has_parent_path()) fs::create_directories(resolved.parent_path());
  return resolved.string();
}

struct PartitionCounts {
  int train = 500;
  int validation = 200;
  int test = 200;
};

PartitionCounts partition_counts(const json& config) {
  PartitionCounts counts;
  if (auto it = config.find("examples"); it != config.end()) {
    counts.train = get_int_or(*it, "train", counts.train);
    counts.validation = get_int_or(*it, "validation", counts.validation);
    counts.test = get_int_or(*it, "test", counts.test);
  }
  for (int c : {counts.train, counts.validation, counts.test}) {
    if (c < 2 || c % 2 != 0) {
      throw ConfigError("partition example counts must be even and >= 2");
    }
  }
  return counts;
}

/// Balanced clone-detection examples for one dialect partition, built from a
/// disjoint program range.
std::vector<TaskExample> dialect_partition(const std::vector<CodeSnippet>& corpus,
                                           const std::vector<int>& family_of, size_t begin,
                                           size_t end, int want_total, uint64_t seed) {
  const int want_positive = want_total / 2;
  std::vector<std::pair<std::string, CodeSnippet>> submissions;
  for (size_t i = begin; i < end && i < corpus.size(); ++i) {
    submissions.emplace_back("fam" + std::to_string(family_of[i]), corpus[i]);
  }
  int families = 1;
  for (size_t i = begin; i < end && i < family_of.size(); ++i) {
    families = std::max(families, family_of[i] + 1);
  }
  const int cap = (want_positive + families - 1) / families + 2;
  auto positives = build_clone_pairs(submissions, cap, seed);
  if (static_cast<int>(positives.size()) < want_positive) {
    throw ConfigError("dialect partition can supply only " + std::to_string(positives.size()) +
                      " positive pairs, need " + std::to_string(want_positive) +
                      " (raise program_count)");
  }
  Rng rng(mix_seed(seed, 0xD1));
  rng.shuffle(positives);
  positives.resize(static_cast<size_t>(want_positive));
  for (auto& ex : positives) ex.origin = Origin::synthetic;
  auto balanced = balance_binary(positives, mix_seed(seed, 0xB2));
  rng.shuffle(balanced);
  return balanced;
}

int cmd_prepare_data(const json& config, const std::string& out_root) {
  const std::string mode = get_string_or(config, "mode", "dialect");
  const uint64_t seed = get_u64_or(config, "seed", 7);
  const std::string prefix = require_string_key(config, "out_prefix");

  if (mode == "dialect") {
    DialectSpec spec = dialect_spec_from_json(require_key(config, "dialect"));
    PartitionCounts counts = partition_counts(config);
    DialectCorpus corpus = generate_dialect_corpus(spec);

    // partition-disjoint program ranges, sized proportionally to demand
    const size_t n = corpus.corpus_a.size();
    const double total_want =
        static_cast<double>(counts.train + counts.validation + counts.test);
    const size_t train_end = static_cast<size_t>(
        static_cast<double>(n) * counts.train / total_want);
    const size_t val_end = train_end + static_cast<size_t>(static_cast<double>(n) *
                                                           counts.validation / total_want);
    struct Part {
      const char* name;
      size_t begin;
      size_t end;
      int want;
    };
    const Part parts[] = {{"train", 0, train_end, counts.train},
                          {"validation", train_end, val_end, counts.validation},
                          {"test", val_end, n, counts.test}};

    int dialect_index = 0;
    for (const auto* dialect : {&corpus.corpus_a, &corpus.corpus_b}) {
      const std::string language =
          dialect_index == 0 ? spec.language_a : spec.language_b;
      DatasetSplit split;
      split.source_language = language;
      split.target_language = language;
      uint64_t part_index = 0;
      for (const auto& part : parts) {
        auto examples =
            dialect_partition(*dialect, corpus.family_of, part.begin, part.end, part.want,
                              mix_seed(seed, 100 * static_cast<uint64_t>(dialect_index) +
                                                 part_index));
        auto& slot = part_index == 0 ? split.train
                                     : (part_index == 1 ? split.validation : split.test);
        slot = std::move(examples);
        ++part_index;
      }
      validate_split(split);
      uint64_t pi = 0;
      for (const auto& part : parts) {
        const auto& slot =
            pi == 0 ? split.train : (pi == 1 ? split.validation : split.test);
        const std::string path =
            out_path(out_root, prefix + "." + part.name + "." + language + ".jsonl");
        save_examples(path, slot);
        int pos = 0;
        int neg = 0;
        for (const auto& ex : slot) (ex.label == Label::positive ? pos : neg)++;
        std::cout << path << ": " << slot.size() << " examples (" << pos << " positive, "
                  << neg << " negative)\n";
        ++pi;
      }
      ++dialect_index;
    }
    if (get_bool_or(config, "write_pretrain_corpus", false)) {
      const std::string path_a =
          out_path(out_root, prefix + ".pretrain." + spec.language_a + ".jsonl");
      const std::string path_b =
          out_path(out_root, prefix + ".pretrain." + spec.language_b + ".jsonl");
      save_snippets(path_a, corpus.corpus_a);
      save_snippets(path_b, corpus.corpus_b);
      std::cout << path_a << ": " << corpus.corpus_a.size() << " programs\n";
      std::cout << path_b << ": " << corpus.corpus_b.size() << " programs\n";
    }
    return 0;
  }

  if (mode == "raw") {
    auto examples = load_examples(require_string_key(config, "input"));
    if (get_bool_or(config, "strip_comments", true)) {
      for (auto& ex : examples) {
        ex.text_a = strip_comments(ex.text_a);
        if (ex.task == Task::clone_detection) ex.text_b = strip_comments(ex.text_b);
      }
    }
    if (auto it = config.find("length_filter"); it != config.end() && !it->is_null()) {
      examples = filter_by_length(examples, get_int_or(*it, "min_tokens", 125),
                                  get_int_or(*it, "max_tokens", 250));
    }
    double train_frac = 0.8;
    double val_frac = 0.1;
    if (auto it = config.find("split"); it != config.end()) {
      train_frac = get_double_or(*it, "train", train_frac);
      val_frac = get_double_or(*it, "validation", val_frac);
    }
    Rng rng(seed);
    rng.shuffle(examples);
    const size_t n = examples.size();
    const size_t train_end = static_cast<size_t>(train_frac * static_cast<double>(n));
    const size_t val_end = train_end + static_cast<size_t>(val_frac * static_cast<double>(n));

    DatasetSplit split;
    split.train = {examples.begin(), examples.begin() + static_cast<long>(train_end)};
    split.validation = {examples.begin() + static_cast<long>(train_end),
                        examples.begin() + static_cast<long>(val_end)};
    split.test = {examples.begin() + static_cast<long>(val_end), examples.end()};
    split.train = balance_binary(split.train, mix_seed(seed, 1));
    split.validation = balance_binary(split.validation, mix_seed(seed, 2));
    split.test = balance_binary(split.test, mix_seed(seed, 3));
    validate_split(split);

    const char* names[] = {"train", "validation", "test"};
    const std::vector<TaskExample>* slots[] = {&split.train, &split.validation, &split.test};
    for (int i = 0; i < 3; ++i) {
      const std::string path = out_path(out_root, prefix + "." + names[i] + ".jsonl");
      save_examples(path, *slots[i]);
      int pos = 0;
      int neg = 0;
      for (const auto& ex : *slots[i]) (ex.label == Label::positive ? pos : neg)++;
      std::cout << path << ": " << slots[i]->size() << " examples (" << pos << " positive, "
                << neg << " negative)\n";
    }
    return 0;
  }

  throw ConfigError("prepare-data: unknown mode \"" + mode + "\"");
}

std::vector<CodeSnippet> pretrain_corpus(const json& corpus_config) {
  std::vector<CodeSnippet> corpus;
  if (auto it = corpus_config.find("dialect"); it != corpus_config.end()) {
    DialectCorpus dialect = generate_dialect_corpus(dialect_spec_from_json(*it));
    // interleave the dialects so the held-out tail stays mixed
    for (size_t i = 0; i < dialect.corpus_a.size(); ++i) {
      corpus.push_back(dialect.corpus_a[i]);
      corpus.push_back(dialect.corpus_b[i]);
    }
    return corpus;
  }
  if (auto it = corpus_config.find("files"); it != corpus_config.end()) {
    if (!it->is_array()) throw ConfigError("corpus.files must be an array of paths");
    for (const auto& path : *it) {
      auto snippets = load_snippets(path.get<std::string>());
      corpus.insert(corpus.end(), snippets.begin(), snippets.end());
    }
    return corpus;
  }
  throw ConfigError("pretrain config needs corpus.dialect or corpus.files");
}

int cmd_pretrain(const json& config, const std::string& out_root) {
  auto corpus = pretrain_corpus(require_key(config, "corpus"));
  EncoderConfig encoder_config = encoder_config_from_json(
      config.contains("encoder") ? config["encoder"] : json::object());

  PretrainOptions options;
  if (auto it = config.find("pretrain"); it != config.end()) {
    options.mask_rate = get_double_or(*it, "mask_rate", options.mask_rate);
    options.steps = get_int_or(*it, "steps", options.steps);
    options.seed = get_u64_or(*it, "seed", options.seed);
    options.batch_size = get_int_or(*it, "batch_size", options.batch_size);
    options.learning_rate = get_double_or(*it, "learning_rate", options.learning_rate);
    options.weight_decay = get_double_or(*it, "weight_decay", options.weight_decay);
    options.heldout_fraction = get_double_or(*it, "heldout_fraction", options.heldout_fraction);
  }

  std::vector<std::string> extra_vocab = {"yes", "no"};
  if (auto it = config.find("extra_vocab"); it != config.end()) {
    extra_vocab = it->get<std::vector<std::string>>();
  }
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& s : corpus) texts.push_back(s.text);
  Tokenizer tokenizer = Tokenizer::build(texts, extra_vocab);

  std::cout << "corpus: " << corpus.size() << " snippets, vocabulary " << tokenizer.vocab_size()
            << " tokens\n";
  auto result = pretrain_mlm(corpus, encoder_config, tokenizer, options);
  std::cout << "pretrain: " << result.steps << " steps, held-out MLM loss "
            << result.initial_heldout_loss << " -> " << result.final_heldout_loss << " over "
            << result.heldout_count << " snippets\n";

  const std::string path = out_path(out_root, require_string_key(config, "out"));
  save_backbone(path, result.backbone);
  std::cout << "backbone: " << path << " (" << result.backbone.parameter_count()
            << " parameters, hash " << file_hash_hex(path) << ")\n";
  return 0;
}

LanguageData load_language_data(const json& entry) {
  LanguageData data;
  if (auto it = entry.find("train"); it != entry.end() && it->is_string()) {
    data.train = load_examples(it->get<std::string>());
  }
  if (auto it = entry.find("validation"); it != entry.end() && it->is_string()) {
    data.validation = load_examples(it->get<std::string>());
  }
  if (auto it = entry.find("test"); it != entry.end() && it->is_string()) {
    data.test = load_examples(it->get<std::string>());
  }
  return data;
}

void check_frozen_groups(const Backbone& before, const TaskModel& after,
                         const TrainConfig& config) {
  if (config.freeze_policy != FreezePolicy::frozen_backbone) return;
  ConstParamList base = before.params();
  if (hash_group(after.all_params(), ParamGroup::encoder) !=
      hash_group(base, ParamGroup::encoder)) {
    throw InvariantError("frozen-backbone invariant: encoder parameters changed");
  }
  if (hash_group(after.all_params(), ParamGroup::word_embeddings) !=
      hash_group(base, ParamGroup::word_embeddings)) {
    throw InvariantError("frozen-backbone invariant: word embeddings changed");
  }
}

int cmd_train(const json& config, const std::string& out_root) {
  Backbone backbone = load_backbone(require_string_key(config, "backbone"));
  const json& data = require_key(config, "data");
  auto train_set = load_examples(require_string_key(data, "train"));
  std::vector<TaskExample> validation;
  if (auto it = data.find("validation"); it != data.end() && it->is_string()) {
    validation = load_examples(it->get<std::string>());
  }
  std::vector<TaskExample> test;
  if (auto it = data.find("test"); it != data.end() && it->is_string()) {
    test = load_examples(it->get<std::string>());
  }

  TaskModel model;
  model.backbone = backbone;
  model.tmpl = config.contains("template") ? prompt_template_from_json(config["template"])
                                           : PromptTemplate{};
  TrainConfig train_config = config.contains("train")
                                 ? train_config_from_json(config["train"])
                                 : TrainConfig{};
  model.budget = get_int_or(config, "budget", 128);
  const uint64_t prompt_seed = get_u64_or(config, "prompt_seed", 1);
  model.prompts =
      PromptTable::random_init(model.tmpl.prompt_count, model.backbone.hidden_dim(), prompt_seed);
  model.verbalizer =
      config.contains("verbalizer")
          ? Verbalizer::make(model.backbone.tokenizer,
                             verbalizer_pairs_from_json(config["verbalizer"]))
          : Verbalizer::yes_no(model.backbone.tokenizer);

  TrainResult result = train(model, train_set, validation, train_config);
  check_frozen_groups(backbone, model, train_config);

  RunRecord record;
  record.run_id = get_string_or(config, "run_id", "train");
  record.protocol.kind = ProtocolKind::monolingual;
  record.protocol.source_language = train_set.front().language;
  record.protocol.target_language = record.protocol.source_language;
  record.protocol.source_train_size = static_cast<int>(train_set.size());
  record.protocol.test_size = static_cast<int>(test.size());
  record.protocol.task = train_set.front().task;
  record.tmpl = model.tmpl;
  for (const auto& c : model.verbalizer.candidates()) {
    record.verbalizer_pairs.emplace_back(c.word, c.label);
  }
  record.train_config = train_config;
  record.budget = model.budget;
  record.prompt_seed = prompt_seed;
  record.history = result.history;
  record.metrics.best_val_accuracy = result.best.validation_accuracy;
  record.metrics.best_epoch = result.best.epoch;
  for (ParamGroup g : {ParamGroup::word_embeddings, ParamGroup::encoder, ParamGroup::mlm_head,
                       ParamGroup::prompt_table}) {
    record.parameter_hashes[to_string(g)] = hash_group_hex(model.all_params(), g);
  }

  if (!test.empty()) {
    auto predictions = zero_shot_apply(model, test);
    std::vector<Label> predicted;
    std::vector<Label> gold;
    for (const auto& p : predictions) predicted.push_back(p.label);
    for (const auto& ex : test) gold.push_back(ex.label);
    record.metrics.test_accuracy = accuracy(predicted, gold);
    record.metrics.test_count = static_cast<int>(test.size());
  }

  const std::string out_dir = get_string_or(config, "out_dir", "runs");
  const std::string model_path = out_path(out_root, out_dir + "/" + record.run_id + ".model.ptk");
  save_model(model_path, archive_from_task_model(model));
  record.artifacts["model"] = model_path;
  const std::string record_path = out_path(out_root, out_dir + "/" + record.run_id + ".json");
  save_run_record(record_path, record);

  std::cout << "best epoch " << result.best.epoch << " validation accuracy "
            << result.best.validation_accuracy << "\n";
  if (!test.empty()) std::cout << "test accuracy " << record.metrics.test_accuracy << "\n";
  std::cout << "run record: " << record_path << "\nmodel: " << model_path << " (hash "
            << file_hash_hex(model_path) << ")\n";
  return 0;
}

struct EvalSetup {
  Backbone backbone;
  DatasetMap datasets;
  RunInputs inputs;
  Protocol protocol;
};

EvalSetup eval_setup(const json& config) {
  EvalSetup setup;
  setup.backbone = load_backbone(require_string_key(config, "backbone"));
  const json& dataset_config = require_key(config, "datasets");
  for (auto& [language, entry] : dataset_config.items()) {
    setup.datasets[language] = load_language_data(entry);
  }

  const json& protocol_config = require_key(config, "protocol");
  setup.protocol.kind = protocol_kind_from_string(require_string_key(protocol_config, "kind"));
  setup.protocol.source_language = require_string_key(protocol_config, "source_language");
  setup.protocol.target_language = require_string_key(protocol_config, "target_language");
  setup.protocol.source_train_size = get_int_or(protocol_config, "source_train_size", 500);
  setup.protocol.target_train_size = get_int_or(protocol_config, "target_train_size", 0);
  setup.protocol.test_size = get_int_or(protocol_config, "test_size", 200);
  setup.protocol.task =
      task_from_string(get_string_or(protocol_config, "task", "clone_detection"));

  setup.inputs.backbone = &setup.backbone;
  setup.inputs.datasets = &setup.datasets;
  setup.inputs.tmpl = config.contains("template") ? prompt_template_from_json(config["template"])
                                                  : PromptTemplate{};
  if (config.contains("verbalizer")) {
    for (auto& [word, label] : verbalizer_pairs_from_json(config["verbalizer"])) {
      setup.inputs.verbalizer_pairs.emplace_back(word, label);
    }
  }
  setup.inputs.train_config = config.contains("train") ? train_config_from_json(config["train"])
                                                       : TrainConfig{};
  setup.inputs.few_shot_config = config.contains("few_shot_train")
                                     ? train_config_from_json(config["few_shot_train"])
                                     : setup.inputs.train_config;
  setup.inputs.budget = get_int_or(config, "budget", 128);
  setup.inputs.prompt_seed = get_u64_or(config, "prompt_seed", 1);
  setup.inputs.run_id = get_string_or(config, "run_id", "run");
  return setup;
}

int cmd_eval(const json& config, const std::string& out_root) {
  EvalSetup setup = eval_setup(config);
  const std::string out_dir = get_string_or(config, "out_dir", "runs");

  TaskModel model;
  RunRecord record = run_protocol(setup.protocol, setup.inputs, &model);
  check_frozen_groups(setup.backbone, model, setup.inputs.train_config);

  if (get_bool_or(config, "save_model", false)) {
    const std::string model_path =
        out_path(out_root, out_dir + "/" + record.run_id + ".model.ptk");
    save_model(model_path, archive_from_task_model(model));
    record.artifacts["model"] = model_path;
    std::cout << "model: " << model_path << " (hash " << file_hash_hex(model_path) << ")\n";
  }
  const std::string record_path = out_path(out_root, out_dir + "/" + record.run_id + ".json");
  save_run_record(record_path, record);

  std::cout << "protocol " << to_string(setup.protocol.kind) << " "
            << setup.protocol.source_language << " -> " << setup.protocol.target_language
            << "\n";
  std::cout << "best validation accuracy " << record.metrics.best_val_accuracy << " (epoch "
            << record.metrics.best_epoch << ")\n";
  std::cout << "target test accuracy " << record.metrics.test_accuracy << " over "
            << record.metrics.test_count << " examples\n";
  std::cout << "run record: " << record_path << "\n";
  return 0;
}

int cmd_ablate(const json& config, const std::string& out_root) {
  EvalSetup setup = eval_setup(config);
  const std::string out_dir = get_string_or(config, "out_dir", "runs");

  const json& grid_config = require_key(config, "grid");
  AblationGrid grid;
  if (auto it = grid_config.find("placements"); it != grid_config.end()) {
    for (const auto& p : *it) grid.placements.push_back(placement_from_string(p.get<std::string>()));
  }
  if (auto it = grid_config.find("prompt_counts"); it != grid_config.end()) {
    for (const auto& k : *it) grid.prompt_counts.push_back(k.get<int>());
  }
  if (auto it = grid_config.find("source_languages"); it != grid_config.end()) {
    for (const auto& s : *it) grid.source_languages.push_back(s.get<std::string>());
  } else {
    grid.source_languages.push_back(setup.protocol.source_language);
  }

  auto records = run_ablation(grid, setup.protocol, setup.inputs);
  for (const auto& record : records) {
    save_run_record(out_path(out_root, out_dir + "/" + record.run_id + ".json"), record);
  }
  const std::string summary_path =
      out_path(out_root, out_dir + "/" + setup.inputs.run_id + ".summary.tsv");
  std::ofstream summary(summary_path);
  if (!summary) throw IoError("cannot write summary: " + summary_path);
  summary << ablation_summary(records);
  std::cout << ablation_summary(records);
  std::cout << records.size() << " run records in " << out_dir << ", summary: " << summary_path
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prompt tuning toolkit for zero-shot code task transfer"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_root;
  if (const char* env = std::getenv("PTKIT_OUT_ROOT")) out_root = env;
  if (out_root.empty()) out_root = ".";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file")->required();
    cmd->add_option("--out-root", out_root, "output root directory (default $PTKIT_OUT_ROOT)");
  };

  CLI::App* prepare = app.add_subcommand("prepare-data", "build balanced dataset files");
  CLI::App* pretrain = app.add_subcommand("pretrain", "MLM-pretrain the miniature backbone");
  CLI::App* train_cmd = app.add_subcommand("train", "prompt-tune on a prepared dataset");
  CLI::App* eval_cmd = app.add_subcommand("eval", "run a transfer/monolingual protocol");
  CLI::App* ablate = app.add_subcommand("ablate", "sweep placements/prompt counts/languages");
  for (CLI::App* cmd : {prepare, pretrain, train_cmd, eval_cmd, ablate}) add_common(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    json config = load_config(config_path);
    if (prepare->parsed()) return cmd_prepare_data(config, out_root);
    if (pretrain->parsed()) return cmd_pretrain(config, out_root);
    if (train_cmd->parsed()) return cmd_train(config, out_root);
    if (eval_cmd->parsed()) return cmd_eval(config, out_root);
    if (ablate->parsed()) return cmd_ablate(config, out_root);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantError& e) {
    std::cerr << "invariant failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
