#include "ptkit/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ptkit/errors.hpp"
#include "ptkit/rng.hpp"

namespace ptkit {

using nlohmann::json;

std::string to_string(Task t) {
  switch (t) {
    case Task::clone_detection: return "clone_detection";
    case Task::code_search: return "code_search";
    case Task::method_name_prediction: return "method_name_prediction";
  }
  return "clone_detection";
}

std::string to_string(Label l) { return l == Label::positive ? "positive" : "negative"; }

std::string to_string(Origin o) {
  switch (o) {
    case Origin::natural: return "natural";
    case Origin::recombined_negative: return "recombined_negative";
    case Origin::synthetic: return "synthetic";
  }
  return "natural";
}

Task task_from_string(const std::string& s) {
  if (s == "clone_detection") return Task::clone_detection;
  if (s == "code_search") return Task::code_search;
  if (s == "method_name_prediction") return Task::method_name_prediction;
  throw SchemaError("unknown task: " + s);
}

Origin origin_from_string(const std::string& s) {
  if (s == "natural") return Origin::natural;
  if (s == "recombined_negative") return Origin::recombined_negative;
  if (s == "synthetic") return Origin::synthetic;
  throw SchemaError("unknown origin: " + s);
}

void validate_split(const DatasetSplit& split) {
  std::unordered_set<std::string> ids;
  auto check_partition = [&](const std::vector<TaskExample>& part, const char* name) {
    size_t pos = 0;
    size_t neg = 0;
    for (const auto& ex : part) {
      if (!ids.insert(ex.id).second) {
        throw InvariantError(std::string("example id appears in more than one partition: ") +
                             ex.id + " (seen again in " + name + ")");
      }
      (ex.label == Label::positive ? pos : neg)++;
    }
    if (pos != neg) {
      throw InvariantError(std::string("partition ") + name + " is not 1:1 balanced: " +
                           std::to_string(pos) + " positive vs " + std::to_string(neg) +
                           " negative");
    }
  };
  check_partition(split.train, "train");
  check_partition(split.validation, "validation");
  check_partition(split.test, "test");
}

// --- dataset file format -------------------------------------------------

namespace {

const json& require_field(const json& record, const char* field, size_t line_no) {
  auto it = record.find(field);
  if (it == record.end()) {
    throw SchemaError("line " + std::to_string(line_no) + ": missing required field \"" +
                      field + "\"");
  }
  return *it;
}

std::string require_string(const json& record, const char* field, size_t line_no) {
  const json& value = require_field(record, field, line_no);
  if (!value.is_string() || value.get<std::string>().empty()) {
    throw SchemaError("line " + std::to_string(line_no) + ": field \"" + field +
                      "\" must be a non-empty string");
  }
  return value.get<std::string>();
}

std::string get_string_field_or(const json& record, const char* field,
                                const std::string& fallback) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_string()) return fallback;
  return it->get<std::string>();
}

}  // namespace

std::vector<TaskExample> load_examples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);

  std::vector<TaskExample> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw SchemaError("line " + std::to_string(line_no) + ": malformed JSON record");
    }
    TaskExample ex;
    ex.task = task_from_string(require_string(record, "task", line_no));
    ex.language = require_string(record, "language", line_no);
    ex.text_a = require_string(record, "text_a", line_no);
    ex.text_b = require_string(record, "text_b", line_no);
    const json& label = require_field(record, "label", line_no);
    if (!label.is_number_integer() || (label.get<int>() != 0 && label.get<int>() != 1)) {
      throw SchemaError("line " + std::to_string(line_no) + ": field \"label\" must be 0 or 1");
    }
    ex.label = label.get<int>() == 1 ? Label::positive : Label::negative;
    if (auto it = record.find("id"); it != record.end() && it->is_string()) {
      ex.id = it->get<std::string>();
    } else {
      ex.id = "line-" + std::to_string(line_no);
    }
    if (auto it = record.find("origin"); it != record.end() && it->is_string()) {
      ex.origin = origin_from_string(it->get<std::string>());
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void save_examples(const std::string& path, const std::vector<TaskExample>& examples) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file: " + path);
  for (const auto& ex : examples) {
    json record = {
        {"id", ex.id},
        {"task", to_string(ex.task)},
        {"language", ex.language},
        {"text_a", ex.text_a},
        {"text_b", ex.text_b},
        {"label", ex.label == Label::positive ? 1 : 0},
        {"origin", to_string(ex.origin)},
    };
    out << record.dump() << '\n';
  }
  if (!out) throw IoError("failed writing dataset file: " + path);
}

std::vector<CodeSnippet> load_snippets(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open snippet file: " + path);
  std::vector<CodeSnippet> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw SchemaError("line " + std::to_string(line_no) + ": malformed JSON record");
    }
    CodeSnippet snippet;
    snippet.text = require_string(record, "text", line_no);
    snippet.id = get_string_field_or(record, "id", "line-" + std::to_string(line_no));
    snippet.language = get_string_field_or(record, "language", "unknown");
    out.push_back(std::move(snippet));
  }
  return out;
}

void save_snippets(const std::string& path, const std::vector<CodeSnippet>& snippets) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write snippet file: " + path);
  for (const auto& snippet : snippets) {
    json record = {{"id", snippet.id}, {"language", snippet.language}, {"text", snippet.text}};
    out << record.dump() << '\n';
  }
  if (!out) throw IoError("failed writing snippet file: " + path);
}

// --- preprocessing -------------------------------------------------------

std::string strip_comments(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    if (text[i] == '/' && i + 1 < n && text[i + 1] == '*') {
      size_t close = text.find("*/", i + 2);
      out += ' ';
      i = close == std::string::npos ? n : close + 2;
    } else if ((text[i] == '/' && i + 1 < n && text[i + 1] == '/') || text[i] == '#') {
      while (i < n && text[i] != '\n') ++i;
    } else {
      out += text[i];
      ++i;
    }
  }
  return out;
}

std::vector<TaskExample> filter_by_length(const std::vector<TaskExample>& examples,
                                          int min_tokens, int max_tokens) {
  if (min_tokens > max_tokens) {
    throw ConfigError("filter_by_length: min_tokens " + std::to_string(min_tokens) +
                      " exceeds max_tokens " + std::to_string(max_tokens));
  }
  auto in_bounds = [&](const std::string& text) {
    int count = Tokenizer::count_tokens(text);
    return count >= min_tokens && count <= max_tokens;
  };
  std::vector<TaskExample> kept;
  kept.reserve(examples.size());
  for (const auto& ex : examples) {
    if (!in_bounds(ex.text_a)) continue;
    if (ex.task == Task::clone_detection && !in_bounds(ex.text_b)) continue;
    kept.push_back(ex);
  }
  return kept;
}

std::vector<TaskExample> balance_binary(const std::vector<TaskExample>& examples,
                                        uint64_t seed) {
  std::vector<size_t> pos_idx;
  std::vector<size_t> neg_idx;
  for (size_t i = 0; i < examples.size(); ++i) {
    (examples[i].label == Label::positive ? pos_idx : neg_idx).push_back(i);
  }
  if (pos_idx.empty()) {
    throw ConfigError("balance_binary: cannot balance a corpus with zero positives");
  }
  if (pos_idx.size() == neg_idx.size()) return examples;

  Rng rng(seed);
  if (neg_idx.size() > pos_idx.size()) {
    // surplus negatives: seeded choice of which to keep, input order preserved
    auto picked = rng.sample_indices(neg_idx.size(), pos_idx.size());
    std::unordered_set<size_t> keep;
    for (size_t p : picked) keep.insert(neg_idx[p]);
    std::vector<TaskExample> out;
    out.reserve(2 * pos_idx.size());
    for (size_t i = 0; i < examples.size(); ++i) {
      if (examples[i].label == Label::positive || keep.count(i)) out.push_back(examples[i]);
    }
    return out;
  }

  // missing negatives: re-pair segments of two distinct positive examples
  std::unordered_set<std::string> positive_pairs;
  auto pair_key = [](const std::string& a, const std::string& b) {
    return a + '\x1F' + b;
  };
  for (size_t i : pos_idx) positive_pairs.insert(pair_key(examples[i].text_a, examples[i].text_b));

  std::vector<TaskExample> out = examples;
  std::unordered_set<std::string> emitted;
  size_t need = pos_idx.size() - neg_idx.size();
  for (size_t k = 0; k < need; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      size_t i = pos_idx[rng.uniform(pos_idx.size())];
      size_t j = pos_idx[rng.uniform(pos_idx.size())];
      if (i == j) continue;
      std::string key = pair_key(out[i].text_a, out[j].text_b);
      if (positive_pairs.count(key) || emitted.count(key)) continue;
      TaskExample neg;
      // the seed keeps ids unique when partitions are balanced separately
      neg.id = "recombined-" + std::to_string(seed) + "-" + std::to_string(k);
      neg.task = out[i].task;
      neg.language = out[i].language;
      neg.text_a = out[i].text_a;
      neg.text_b = out[j].text_b;
      neg.label = Label::negative;
      neg.origin = Origin::recombined_negative;
      emitted.insert(std::move(key));
      out.push_back(std::move(neg));
      placed = true;
    }
    if (!placed) {
      throw ConfigError(
          "balance_binary: could not draw a non-colliding recombined negative in 100 attempts");
    }
  }
  return out;
}

// --- task builders -------------------------------------------------------

std::vector<TaskExample> build_clone_pairs(
    const std::vector<std::pair<std::string, CodeSnippet>>& submissions,
    int max_pairs_per_problem, uint64_t seed) {
  if (max_pairs_per_problem < 0) {
    throw ConfigError("build_clone_pairs: max_pairs_per_problem must be >= 0");
  }
  // group by problem, keeping first-appearance order
  std::vector<std::string> problem_order;
  std::map<std::string, std::vector<const CodeSnippet*>> grouped;
  for (const auto& [problem, snippet] : submissions) {
    auto [it, inserted] = grouped.try_emplace(problem);
    if (inserted) problem_order.push_back(problem);
    it->second.push_back(&snippet);
  }

  std::vector<TaskExample> out;
  uint64_t problem_ordinal = 0;
  for (const auto& problem : problem_order) {
    const auto& subs = grouped[problem];
    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t i = 0; i < subs.size(); ++i) {
      for (size_t j = i + 1; j < subs.size(); ++j) pairs.emplace_back(i, j);
    }
    if (static_cast<size_t>(max_pairs_per_problem) < pairs.size()) {
      Rng rng(mix_seed(seed, problem_ordinal));
      auto picked = rng.sample_indices(pairs.size(), static_cast<size_t>(max_pairs_per_problem));
      std::sort(picked.begin(), picked.end());
      std::vector<std::pair<size_t, size_t>> sampled;
      sampled.reserve(picked.size());
      for (size_t p : picked) sampled.push_back(pairs[p]);
      pairs = std::move(sampled);
    }
    for (auto [i, j] : pairs) {
      TaskExample ex;
      ex.id = problem + "-" + subs[i]->id + "-" + subs[j]->id;
      ex.task = Task::clone_detection;
      ex.language = subs[i]->language;
      ex.text_a = subs[i]->text;
      ex.text_b = subs[j]->text;
      ex.label = Label::positive;
      ex.origin = Origin::natural;
      out.push_back(std::move(ex));
    }
    ++problem_ordinal;
  }
  return out;
}

std::vector<TaskExample> build_nlpl_pairs(
    const std::vector<std::pair<std::string, std::string>>& problems,
    const std::vector<std::pair<std::string, CodeSnippet>>& submissions) {
  std::vector<TaskExample> out;
  for (const auto& [problem, description] : problems) {
    if (description.empty()) {
      throw SchemaError("build_nlpl_pairs: empty description for problem " + problem);
    }
    for (const auto& [sub_problem, snippet] : submissions) {
      if (sub_problem != problem) continue;
      TaskExample ex;
      ex.id = problem + "-" + snippet.id;
      ex.task = Task::code_search;
      ex.language = snippet.language;
      ex.text_a = snippet.text;
      ex.text_b = description;
      ex.label = Label::positive;
      ex.origin = Origin::natural;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

std::string extract_method_name(const std::string& text) {
  size_t paren = text.find('(');
  if (paren == std::string::npos || paren == 0) return "";
  size_t end = paren;
  while (end > 0 && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  size_t begin = end;
  auto is_ident = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  };
  while (begin > 0 && is_ident(text[begin - 1])) --begin;
  return text.substr(begin, end - begin);
}

namespace {

std::string remove_all_occurrences(std::string text, const std::string& needle) {
  if (needle.empty()) return text;
  size_t at = text.find(needle);
  while (at != std::string::npos) {
    text.erase(at, needle.size());
    at = text.find(needle);
  }
  return text;
}

}  // namespace

MethodNamePairs build_method_name_pairs(const std::vector<CodeSnippet>& functions,
                                        int negatives_per_positive, uint64_t seed) {
  if (negatives_per_positive < 0) {
    throw ConfigError("build_method_name_pairs: negatives_per_positive must be >= 0");
  }
  std::vector<std::string> names(functions.size());
  for (size_t i = 0; i < functions.size(); ++i) names[i] = extract_method_name(functions[i].text);

  MethodNamePairs result;
  for (size_t i = 0; i < functions.size(); ++i) {
    if (names[i].empty()) {
      ++result.skipped;
      continue;
    }
    std::string stripped = remove_all_occurrences(functions[i].text, names[i]);

    TaskExample pos;
    pos.id = functions[i].id + "-pos";
    pos.task = Task::method_name_prediction;
    pos.language = functions[i].language;
    pos.text_a = stripped;
    pos.text_b = names[i];
    pos.label = Label::positive;
    pos.origin = Origin::natural;
    result.examples.push_back(std::move(pos));

    // candidate wrong names: other functions' names, never the true one
    std::vector<const std::string*> pool;
    for (size_t j = 0; j < functions.size(); ++j) {
      if (j != i && !names[j].empty() && names[j] != names[i]) pool.push_back(&names[j]);
    }
    if (pool.empty()) continue;
    Rng rng(mix_seed(seed, i));
    auto picked = rng.sample_indices(pool.size(),
                                     static_cast<size_t>(negatives_per_positive));
    int k = 0;
    for (size_t p : picked) {
      TaskExample neg;
      neg.id = functions[i].id + "-neg" + std::to_string(k++);
      neg.task = Task::method_name_prediction;
      neg.language = functions[i].language;
      neg.text_a = stripped;
      neg.text_b = *pool[p];
      neg.label = Label::negative;
      neg.origin = Origin::recombined_negative;
      result.examples.push_back(std::move(neg));
    }
  }
  return result;
}

}  // namespace ptkit
