#include "ptkit/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ptkit/errors.hpp"
#include "ptkit/serialize.hpp"

namespace ptkit {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'P', 'T', 'K', 'I', 'T', 'C', 'K', '1'};
constexpr int kFormatVersion = 1;

std::string group_name(ParamGroup g) { return to_string(g); }

ConstParamList archive_params(const ModelArchive& archive) {
  ConstParamList params = archive.backbone.params();
  if (archive.prompts) params.push_back(&archive.prompts->vectors);
  return params;
}

}  // namespace

std::string to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::word_embeddings: return "word_embeddings";
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::mlm_head: return "mlm_head";
    case ParamGroup::prompt_table: return "prompt_table";
  }
  return "encoder";
}

void save_model(const std::string& path, const ModelArchive& archive) {
  json header;
  header["format_version"] = kFormatVersion;
  header["encoder"] = to_json(archive.backbone.config);
  header["vocabulary"] = archive.backbone.tokenizer.vocabulary();
  header["freeze_policy"] = to_string(archive.backbone.freeze_policy);
  if (archive.tmpl) header["template"] = to_json(*archive.tmpl);
  if (archive.verbalizer_pairs) {
    header["verbalizer"] = verbalizer_pairs_to_json(*archive.verbalizer_pairs);
  }
  if (archive.budget) header["budget"] = *archive.budget;

  json arrays = json::array();
  ConstParamList params = archive_params(archive);
  for (const Param* p : params) {
    arrays.push_back({{"name", p->name},
                      {"group", group_name(p->group)},
                      {"rows", p->value.rows()},
                      {"cols", p->value.cols()}});
  }
  header["arrays"] = arrays;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  const std::string header_text = header.dump();
  const uint64_t header_len = header_text.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const Param* p : params) {
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(static_cast<size_t>(p->value.size()) * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

ModelArchive load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw SchemaError("not a ptkit checkpoint: " + path);
  }
  uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw SchemaError("truncated checkpoint header: " + path);
  json header = json::parse(header_text, nullptr, false);
  if (header.is_discarded()) throw SchemaError("corrupt checkpoint header: " + path);
  if (get_int_or(header, "format_version", -1) != kFormatVersion) {
    throw SchemaError("unsupported checkpoint version in " + path);
  }

  ModelArchive archive;
  EncoderConfig config = encoder_config_from_json(require_key(header, "encoder"));
  auto vocabulary = require_key(header, "vocabulary").get<std::vector<std::string>>();
  archive.backbone = Backbone::create(config, Tokenizer::from_vocabulary(std::move(vocabulary)));
  archive.backbone.freeze_policy =
      freeze_policy_from_string(get_string_or(header, "freeze_policy", "frozen_backbone"));
  if (auto it = header.find("template"); it != header.end()) {
    archive.tmpl = prompt_template_from_json(*it);
  }
  if (auto it = header.find("verbalizer"); it != header.end()) {
    archive.verbalizer_pairs = verbalizer_pairs_from_json(*it);
  }
  if (auto it = header.find("budget"); it != header.end()) {
    archive.budget = it->get<int>();
  }

  const json& arrays = require_key(header, "arrays");
  // prompt table shape comes from the directory
  for (const auto& entry : arrays) {
    if (entry.at("name").get<std::string>() == "prompt_table") {
      PromptTable table;
      table.vectors.name = "prompt_table";
      table.vectors.group = ParamGroup::prompt_table;
      table.vectors.init_zero(entry.at("rows").get<Eigen::Index>(),
                              entry.at("cols").get<Eigen::Index>());
      archive.prompts = std::move(table);
    }
  }

  ParamList params = archive.backbone.params();
  if (archive.prompts) params.push_back(&archive.prompts->vectors);
  if (arrays.size() != params.size()) {
    throw SchemaError("checkpoint array directory does not match model layout: " + path);
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const json& entry = arrays[i];
    Param* p = params[i];
    if (entry.at("name").get<std::string>() != p->name ||
        entry.at("rows").get<Eigen::Index>() != p->value.rows() ||
        entry.at("cols").get<Eigen::Index>() != p->value.cols()) {
      throw SchemaError("checkpoint array mismatch at " + p->name + " in " + path);
    }
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(static_cast<size_t>(p->value.size()) * sizeof(double)));
    if (!in) throw SchemaError("truncated checkpoint arrays: " + path);
  }
  return archive;
}

void save_backbone(const std::string& path, const Backbone& backbone) {
  ModelArchive archive;
  archive.backbone = backbone;
  save_model(path, archive);
}

Backbone load_backbone(const std::string& path) { return load_model(path).backbone; }

ModelArchive archive_from_task_model(const TaskModel& model) {
  ModelArchive archive;
  archive.backbone = model.backbone;
  archive.prompts = model.prompts;
  archive.tmpl = model.tmpl;
  std::vector<std::pair<std::string, Label>> pairs;
  for (const auto& c : model.verbalizer.candidates()) pairs.emplace_back(c.word, c.label);
  archive.verbalizer_pairs = std::move(pairs);
  archive.budget = model.budget;
  return archive;
}

TaskModel task_model_from_archive(const ModelArchive& archive) {
  if (!archive.prompts || !archive.tmpl || !archive.verbalizer_pairs) {
    throw ConfigError("model archive lacks tuned state (prompts/template/verbalizer)");
  }
  TaskModel model;
  model.backbone = archive.backbone;
  model.prompts = *archive.prompts;
  model.tmpl = *archive.tmpl;
  model.verbalizer = Verbalizer::make(model.backbone.tokenizer, *archive.verbalizer_pairs);
  model.budget = archive.budget.value_or(model.backbone.config.max_sequence_length);
  return model;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for hashing: " + path);
  ByteHash hash;
  char buffer[1 << 16];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    hash.update(buffer, static_cast<size_t>(in.gcount()));
    if (!in) break;
  }
  return hash.hex();
}

}  // namespace ptkit
