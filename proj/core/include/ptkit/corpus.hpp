#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ptkit/tokenizer.hpp"

namespace ptkit {

enum class Task { clone_detection, code_search, method_name_prediction };
enum class Label { negative = 0, positive = 1 };
enum class Origin { natural, recombined_negative, synthetic };

std::string to_string(Task t);
std::string to_string(Label l);
std::string to_string(Origin o);
Task task_from_string(const std::string& s);
Origin origin_from_string(const std::string& s);

/// One piece of source text plus its language tag. token_count is filled in
/// lazily under the active tokenizer.
struct CodeSnippet {
  std::string id;
  std::string language;
  std::string text;
  std::optional<int> token_count;

  int count_tokens() {
    if (!token_count) token_count = Tokenizer::count_tokens(text);
    return *token_count;
  }
};

/// One labeled binary instance for any of the three tasks. text_b holds the
/// second code snippet (clone detection), the natural-language query (code
/// search) or the candidate method name (method name prediction).
struct TaskExample {
  std::string id;
  Task task = Task::clone_detection;
  std::string language;
  std::string text_a;
  std::string text_b;
  Label label = Label::negative;
  Origin origin = Origin::natural;
};

/// Protocol-ready bundle: train/validation drawn from the source language,
/// test from the target language (equal to the source for monolingual runs).
struct DatasetSplit {
  std::vector<TaskExample> train;
  std::vector<TaskExample> validation;
  std::vector<TaskExample> test;
  std::string source_language;
  std::string target_language;
};

/// Throws InvariantError when ids repeat across partitions or a partition is
/// not exactly 1:1 balanced.
void validate_split(const DatasetSplit& split);

// --- dataset file format -------------------------------------------------
// One record per line: {"id","task","language","text_a","text_b","label",
// "origin"} with label serialized as 0/1, UTF-8 throughout. id and origin
// are optional on load (line-derived id, origin "natural").

std::vector<TaskExample> load_examples(const std::string& path);
void save_examples(const std::string& path, const std::vector<TaskExample>& examples);

// Snippet corpora (pretraining input) use one {"id","language","text"}
// record per line; id and language are optional on load.
std::vector<CodeSnippet> load_snippets(const std::string& path);
void save_snippets(const std::string& path, const std::vector<CodeSnippet>& snippets);

// --- preprocessing -------------------------------------------------------

/// Removes //, /* */ and # style comments. A plain text pass: string
/// literals are not parsed, which is acceptable for the supported corpora.
std::string strip_comments(const std::string& text);

/// Keeps examples whose code-side segments fall inside
/// [min_tokens, max_tokens]. text_a is always constrained; text_b only for
/// clone detection where it is code too. Queries and method names are
/// exempt. Order preserving; idempotent.
std::vector<TaskExample> filter_by_length(const std::vector<TaskExample>& examples,
                                          int min_tokens = 125, int max_tokens = 250);

/// Balances positives and negatives to an exact 1:1 count. Missing negatives
/// are created by re-pairing text_a and text_b from two distinct positive
/// examples (origin recombined_negative, never colliding with a positive
/// pair); surplus negatives are dropped by a seeded sample. Deterministic.
std::vector<TaskExample> balance_binary(const std::vector<TaskExample>& examples,
                                        uint64_t seed);

// --- task builders -------------------------------------------------------

/// Positive clone pairs from submissions that solve the same problem,
/// capped per problem by a seeded sample. Negatives are left to
/// balance_binary.
std::vector<TaskExample> build_clone_pairs(
    const std::vector<std::pair<std::string, CodeSnippet>>& submissions,
    int max_pairs_per_problem, uint64_t seed);

/// Positive NL-PL pairs: every (description, submission) sharing a problem
/// id, with text_a the code and text_b the description.
std::vector<TaskExample> build_nlpl_pairs(
    const std::vector<std::pair<std::string, std::string>>& problems,
    const std::vector<std::pair<std::string, CodeSnippet>>& submissions);

struct MethodNamePairs {
  std::vector<TaskExample> examples;
  int skipped = 0;  // functions whose name could not be located
};

/// Separates method names from function bodies. Positives pair the
/// name-stripped body with the true name; negatives pair it with names
/// sampled from other functions. The stripped body contains no occurrence
/// of the true name, checked at the string level.
MethodNamePairs build_method_name_pairs(const std::vector<CodeSnippet>& functions,
                                        int negatives_per_positive, uint64_t seed);

/// Name heuristic shared with the builder: the identifier token immediately
/// before the first "(". Empty when absent.
std::string extract_method_name(const std::string& text);

}  // namespace ptkit
