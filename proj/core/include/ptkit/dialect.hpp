#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ptkit/corpus.hpp"

namespace ptkit {

/// Recipe for a pair of toy-language corpora that differ only by a keyword
/// renaming. Dialect B is dialect A's generator re-run with every keyword
/// mapped through keyword_map, so corresponding programs are token-parallel.
struct DialectSpec {
  std::map<std::string, std::string> keyword_map;  // dialect-A word -> dialect-B word
  uint64_t grammar_seed = 1;
  int program_count = 1000;      // per dialect
  int functions_per_program = 1;
  std::string language_a = "dialectA";
  std::string language_b = "dialectB";
};

/// The full keyword rename used when DialectSpec.keyword_map is empty.
std::map<std::string, std::string> default_keyword_map();

/// The dialect-A keyword inventory the generator draws from.
const std::vector<std::string>& dialect_keywords();

struct DialectCorpus {
  std::vector<CodeSnippet> corpus_a;
  std::vector<CodeSnippet> corpus_b;
  /// Template family of program i (same index in both corpora).
  std::vector<int> family_of;
  /// One natural-language description per family (code-search queries).
  std::vector<std::string> family_descriptions;
  /// Positive clone pairs inside each dialect (same family, different
  /// instance). Negatives are left to balance_binary.
  std::vector<TaskExample> clone_pairs_a;
  std::vector<TaskExample> clone_pairs_b;

  int family_count() const { return static_cast<int>(family_descriptions.size()); }
};

/// Deterministic function of the spec: same spec, byte-identical corpora.
/// Clone pairs within a dialect are type-3-like — same template family with
/// renamed variables, resampled literals and shuffled independent
/// statements.
DialectCorpus generate_dialect_corpus(const DialectSpec& spec);

}  // namespace ptkit
