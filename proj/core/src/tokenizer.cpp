#include "ptkit/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "ptkit/errors.hpp"

namespace ptkit {

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool is_space_char(char c) { return std::isspace(static_cast<unsigned char>(c)); }

const std::vector<std::string>& special_names() {
  static const std::vector<std::string> names = {"[CLS]", "[MASK]", "[PAD]", "[UNK]"};
  return names;
}

}  // namespace

std::vector<std::string> Tokenizer::tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (is_space_char(c)) {
      ++i;
      continue;
    }
    if (is_word_char(c)) {
      size_t j = i;
      while (j < text.size() && is_word_char(text[j])) ++j;
      tokens.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      tokens.emplace_back(1, c);
      ++i;
    }
  }
  return tokens;
}

int Tokenizer::count_tokens(std::string_view text) {
  return static_cast<int>(tokenize(text).size());
}

Tokenizer Tokenizer::build(const std::vector<std::string>& corpus,
                           const std::vector<std::string>& extra_tokens) {
  std::set<std::string> seen;
  for (const auto& text : corpus) {
    for (auto& tok : tokenize(text)) seen.insert(std::move(tok));
  }
  for (const auto& extra : extra_tokens) {
    for (auto& tok : tokenize(extra)) seen.insert(std::move(tok));
  }
  std::vector<std::string> vocab = special_names();
  vocab.insert(vocab.end(), seen.begin(), seen.end());
  return from_vocabulary(std::move(vocab));
}

Tokenizer Tokenizer::from_vocabulary(std::vector<std::string> vocabulary) {
  if (vocabulary.size() < kNumSpecials) {
    throw ConfigError("tokenizer vocabulary must start with the four specials");
  }
  for (int i = 0; i < kNumSpecials; ++i) {
    if (vocabulary[static_cast<size_t>(i)] != special_names()[static_cast<size_t>(i)]) {
      throw ConfigError("tokenizer vocabulary special at index " + std::to_string(i) +
                        " must be " + special_names()[static_cast<size_t>(i)]);
    }
  }
  Tokenizer t;
  t.vocabulary_ = std::move(vocabulary);
  t.index_.reserve(t.vocabulary_.size());
  for (size_t i = 0; i < t.vocabulary_.size(); ++i) {
    auto [it, inserted] = t.index_.emplace(t.vocabulary_[i], static_cast<int>(i));
    if (!inserted) {
      throw ConfigError("duplicate token in vocabulary: " + t.vocabulary_[i]);
    }
  }
  return t;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& tok : tokenize(text)) {
    auto it = index_.find(tok);
    ids.push_back(it == index_.end() ? kUnk : it->second);
  }
  return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (!out.empty()) out += ' ';
    out += token_of(id);
  }
  return out;
}

std::optional<int> Tokenizer::id_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Tokenizer::token_of(int id) const {
  if (id < 0 || id >= vocab_size()) {
    throw ConfigError("token id out of range: " + std::to_string(id));
  }
  return vocabulary_[static_cast<size_t>(id)];
}

}  // namespace ptkit
