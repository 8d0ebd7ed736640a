#pragma once

#include <nlohmann/json.hpp>

#include "ptkit/dialect.hpp"
#include "ptkit/encoder.hpp"
#include "ptkit/prompting.hpp"
#include "ptkit/tuning.hpp"

namespace ptkit {

// JSON views of the config records persisted inside checkpoints, run
// records and CLI config files. Parsers throw ConfigError on bad fields.

nlohmann::json to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PromptTemplate& tmpl);
PromptTemplate prompt_template_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DialectSpec& spec);
DialectSpec dialect_spec_from_json(const nlohmann::json& j);

nlohmann::json verbalizer_pairs_to_json(
    const std::vector<std::pair<std::string, Label>>& pairs);
std::vector<std::pair<std::string, Label>> verbalizer_pairs_from_json(
    const nlohmann::json& j);

nlohmann::json to_json(const EpochRecord& record);
EpochRecord epoch_record_from_json(const nlohmann::json& j);

// typed field access with ConfigError diagnostics
const nlohmann::json& require_key(const nlohmann::json& j, const std::string& key);
std::string require_string_key(const nlohmann::json& j, const std::string& key);
int get_int_or(const nlohmann::json& j, const std::string& key, int fallback);
double get_double_or(const nlohmann::json& j, const std::string& key, double fallback);
uint64_t get_u64_or(const nlohmann::json& j, const std::string& key, uint64_t fallback);
std::string get_string_or(const nlohmann::json& j, const std::string& key,
                          const std::string& fallback);
bool get_bool_or(const nlohmann::json& j, const std::string& key, bool fallback);

}  // namespace ptkit
