#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ptkit/backbone.hpp"
#include "ptkit/corpus.hpp"
#include "ptkit/tensor.hpp"
#include "ptkit/tokenizer.hpp"

namespace ptkit {

enum class Placement { head, middle, uniform, tail };
enum class MaskPosition { tail, head };

std::string to_string(Placement p);
std::string to_string(MaskPosition m);
Placement placement_from_string(const std::string& s);
MaskPosition mask_position_from_string(const std::string& s);

constexpr int kMaxPromptCount = 64;

/// Placement plan for the trainable prompt slots, the mask and the optional
/// separator. prompt_count may be zero (plain cls;x1;x2;mask rendering).
struct PromptTemplate {
  int prompt_count = 0;
  Placement placement = Placement::uniform;
  MaskPosition mask_position = MaskPosition::tail;
  bool include_cls = true;
  std::optional<std::string> separator;

  void validate() const;
};

struct PromptGaps {
  int gap1 = 0;  // before x1
  int gap2 = 0;  // between x1 and x2
  int gap3 = 0;  // after x2
};

/// Splits prompt_count slots across the three gaps. head -> (m,0,0),
/// middle -> (0,m,0), tail -> (0,0,m) with the slots landing after the
/// mask, uniform -> as even as possible with remainders assigned
/// front-first.
PromptGaps allocate_positions(Placement placement, int prompt_count, int len_a, int len_b);

/// One slot of the assembled model input.
struct SeqItem {
  enum class Kind { token, prompt, mask, cls };
  Kind kind = Kind::token;
  int value = 0;  // token id, or 1-based prompt slot index

  bool operator==(const SeqItem&) const = default;
};

struct MaskedSequence {
  std::vector<SeqItem> items;
  int mask_index = -1;
  // [begin, end) spans of the two segments within items; x1 before x2
  std::pair<int, int> span_a{0, 0};
  std::pair<int, int> span_b{0, 0};

  int length() const { return static_cast<int>(items.size()); }
};

/// Renders an example through the template into the masked sequence. When
/// x1 and x2 overflow the budget they are truncated proportionally to their
/// lengths (the longer segment loses more, keeping its prefix); prompts,
/// cls, separator and the mask are never truncated.
MaskedSequence render(const PromptTemplate& tmpl, const TaskExample& example,
                      const Tokenizer& tokenizer, int budget);

/// The trainable prompt vectors P_1..P_m.
struct PromptTable {
  Param vectors;  // prompt_count x hidden_dim

  static PromptTable random_init(int prompt_count, int hidden_dim, uint64_t seed,
                                 double stddev = 0.02);
  /// Initializes each slot from the word embedding of the given word.
  static PromptTable from_words(const std::vector<std::string>& words,
                                const Backbone& backbone);

  int prompt_count() const { return static_cast<int>(vectors.value.rows()); }
};

/// Input-embedding rows for a rendered sequence: word-embedding rows for
/// real tokens and specials, prompt vectors for prompt slots.
Mat assemble_embeddings(const MaskedSequence& seq, const Backbone& backbone,
                        const PromptTable& prompts);

/// Routes d(loss)/d(input rows) back to the prompt table and the word
/// embedding table (the training loop decides which of those updates).
void scatter_embedding_grads(const MaskedSequence& seq, const Mat& input_grad,
                             Backbone& backbone, PromptTable& prompts);

}  // namespace ptkit
