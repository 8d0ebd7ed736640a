#include "ptkit/serialize.hpp"

#include "ptkit/errors.hpp"

namespace ptkit {

using nlohmann::json;

const json& require_key(const json& j, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing config key: \"" + key + "\"");
  return *it;
}

std::string require_string_key(const json& j, const std::string& key) {
  const json& v = require_key(j, key);
  if (!v.is_string()) throw ConfigError("config key \"" + key + "\" must be a string");
  return v.get<std::string>();
}

int get_int_or(const json& j, const std::string& key, int fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_number_integer()) throw ConfigError("config key \"" + key + "\" must be an integer");
  return it->get<int>();
}

double get_double_or(const json& j, const std::string& key, double fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_number()) throw ConfigError("config key \"" + key + "\" must be a number");
  return it->get<double>();
}

uint64_t get_u64_or(const json& j, const std::string& key, uint64_t fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_number_unsigned() && !it->is_number_integer()) {
    throw ConfigError("config key \"" + key + "\" must be an integer");
  }
  return it->get<uint64_t>();
}

std::string get_string_or(const json& j, const std::string& key, const std::string& fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_string()) throw ConfigError("config key \"" + key + "\" must be a string");
  return it->get<std::string>();
}

bool get_bool_or(const json& j, const std::string& key, bool fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_boolean()) throw ConfigError("config key \"" + key + "\" must be a boolean");
  return it->get<bool>();
}

json to_json(const EncoderConfig& config) {
  return {
      {"hidden_dim", config.hidden_dim},
      {"num_heads", config.num_heads},
      {"num_layers", config.num_layers},
      {"max_sequence_length", config.max_sequence_length},
      {"vocab_size", config.vocab_size},
      {"seed", config.seed},
  };
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig config;
  config.hidden_dim = get_int_or(j, "hidden_dim", config.hidden_dim);
  config.num_heads = get_int_or(j, "num_heads", config.num_heads);
  config.num_layers = get_int_or(j, "num_layers", config.num_layers);
  config.max_sequence_length = get_int_or(j, "max_sequence_length", config.max_sequence_length);
  config.vocab_size = get_int_or(j, "vocab_size", config.vocab_size);
  config.seed = get_u64_or(j, "seed", config.seed);
  return config;
}

json to_json(const PromptTemplate& tmpl) {
  json j = {
      {"prompt_count", tmpl.prompt_count},
      {"placement", to_string(tmpl.placement)},
      {"mask_position", to_string(tmpl.mask_position)},
      {"include_cls", tmpl.include_cls},
  };
  if (tmpl.separator) {
    j["separator"] = *tmpl.separator;
  } else {
    j["separator"] = nullptr;
  }
  return j;
}

PromptTemplate prompt_template_from_json(const json& j) {
  PromptTemplate tmpl;
  tmpl.prompt_count = get_int_or(j, "prompt_count", tmpl.prompt_count);
  tmpl.placement = placement_from_string(get_string_or(j, "placement", "uniform"));
  tmpl.mask_position = mask_position_from_string(get_string_or(j, "mask_position", "tail"));
  tmpl.include_cls = get_bool_or(j, "include_cls", tmpl.include_cls);
  if (auto it = j.find("separator"); it != j.end() && it->is_string()) {
    tmpl.separator = it->get<std::string>();
  }
  tmpl.validate();
  return tmpl;
}

json to_json(const TrainConfig& config) {
  json sets = json::array();
  for (const auto& s : config.trainable_sets) sets.push_back(to_string(s));
  return {
      {"batch_size", config.batch_size},
      {"epochs", config.epochs},
      {"peak_lr", config.peak_lr},
      {"weight_decay", config.weight_decay},
      {"grad_clip_norm", config.grad_clip_norm},
      {"seed", config.seed},
      {"freeze_policy", to_string(config.freeze_policy)},
      {"trainable_sets", sets},
  };
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig config;
  config.batch_size = get_int_or(j, "batch_size", config.batch_size);
  config.epochs = get_int_or(j, "epochs", config.epochs);
  config.peak_lr = get_double_or(j, "peak_lr", config.peak_lr);
  config.weight_decay = get_double_or(j, "weight_decay", config.weight_decay);
  config.grad_clip_norm = get_double_or(j, "grad_clip_norm", config.grad_clip_norm);
  config.seed = get_u64_or(j, "seed", config.seed);
  config.freeze_policy =
      freeze_policy_from_string(get_string_or(j, "freeze_policy", "frozen_backbone"));
  if (auto it = j.find("trainable_sets"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("config key \"trainable_sets\" must be an array");
    config.trainable_sets.clear();
    for (const auto& s : *it) {
      config.trainable_sets.insert(trainable_set_from_string(s.get<std::string>()));
    }
  }
  config.validate();
  return config;
}

json to_json(const DialectSpec& spec) {
  json map = json::object();
  for (const auto& [from, to] : spec.keyword_map) map[from] = to;
  return {
      {"keyword_map", map},
      {"grammar_seed", spec.grammar_seed},
      {"program_count", spec.program_count},
      {"functions_per_program", spec.functions_per_program},
      {"language_a", spec.language_a},
      {"language_b", spec.language_b},
  };
}

DialectSpec dialect_spec_from_json(const json& j) {
  DialectSpec spec;
  spec.grammar_seed = get_u64_or(j, "grammar_seed", spec.grammar_seed);
  spec.program_count = get_int_or(j, "program_count", spec.program_count);
  spec.functions_per_program = get_int_or(j, "functions_per_program", spec.functions_per_program);
  spec.language_a = get_string_or(j, "language_a", spec.language_a);
  spec.language_b = get_string_or(j, "language_b", spec.language_b);
  if (auto it = j.find("keyword_map"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("config key \"keyword_map\" must be an object");
    for (auto& [from, to] : it->items()) {
      if (!to.is_string()) throw ConfigError("keyword_map values must be strings");
      spec.keyword_map[from] = to.get<std::string>();
    }
  }
  return spec;
}

json verbalizer_pairs_to_json(const std::vector<std::pair<std::string, Label>>& pairs) {
  json out = json::array();
  for (const auto& [word, label] : pairs) out.push_back({word, to_string(label)});
  return out;
}

std::vector<std::pair<std::string, Label>> verbalizer_pairs_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("verbalizer must be an array of [word, label] pairs");
  std::vector<std::pair<std::string, Label>> pairs;
  for (const auto& entry : j) {
    if (!entry.is_array() || entry.size() != 2) {
      throw ConfigError("verbalizer entries must be [word, label] pairs");
    }
    const std::string label = entry[1].get<std::string>();
    if (label != "positive" && label != "negative") {
      throw ConfigError("verbalizer label must be positive or negative, got " + label);
    }
    pairs.emplace_back(entry[0].get<std::string>(),
                       label == "positive" ? Label::positive : Label::negative);
  }
  return pairs;
}

json to_json(const EpochRecord& record) {
  return {
      {"epoch", record.epoch},
      {"train_loss", record.train_loss},
      {"val_accuracy", record.val_accuracy},
      {"lr_last", record.lr_last},
  };
}

EpochRecord epoch_record_from_json(const json& j) {
  EpochRecord record;
  record.epoch = get_int_or(j, "epoch", 0);
  record.train_loss = get_double_or(j, "train_loss", 0.0);
  record.val_accuracy = get_double_or(j, "val_accuracy", 0.0);
  record.lr_last = get_double_or(j, "lr_last", 0.0);
  return record;
}

}  // namespace ptkit
