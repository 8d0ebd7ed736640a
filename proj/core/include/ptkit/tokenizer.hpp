#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ptkit {

// Whitespace-plus-punctuation tokenizer with a corpus-built closed
// vocabulary. Identifier characters [A-Za-z0-9_] group into words, any other
// printable character is a single-character token. Reserved specials sit at
// fixed indices and are never produced by tokenize(), so raw text cannot
// alias them.
class Tokenizer {
 public:
  static constexpr int kCls = 0;
  static constexpr int kMask = 1;
  static constexpr int kPad = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumSpecials = 4;

  /// Splits text into surface tokens. Pure; independent of any vocabulary.
  static std::vector<std::string> tokenize(std::string_view text);

  /// Number of surface tokens in text.
  static int count_tokens(std::string_view text);

  /// Builds a vocabulary from every token occurring in corpus, plus
  /// extra_tokens (verbalizer candidates live here for closed corpora).
  /// Tokens are sorted lexicographically after the four specials.
  static Tokenizer build(const std::vector<std::string>& corpus,
                         const std::vector<std::string>& extra_tokens = {});

  /// Restores a tokenizer from a serialized vocabulary (specials first).
  static Tokenizer from_vocabulary(std::vector<std::string> vocabulary);

  Tokenizer() = default;

  std::vector<int> encode(std::string_view text) const;
  std::string decode(const std::vector<int>& ids) const;

  /// Id of a single token, or nullopt when out of vocabulary.
  std::optional<int> id_of(std::string_view token) const;
  const std::string& token_of(int id) const;

  int vocab_size() const { return static_cast<int>(vocabulary_.size()); }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  bool empty() const { return vocabulary_.empty(); }

 private:
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace ptkit
