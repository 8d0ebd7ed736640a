#include "ptkit/prompting.hpp"

#include <cmath>

#include "ptkit/errors.hpp"

namespace ptkit {

std::string to_string(Placement p) {
  switch (p) {
    case Placement::head: return "head";
    case Placement::middle: return "middle";
    case Placement::uniform: return "uniform";
    case Placement::tail: return "tail";
  }
  return "uniform";
}

std::string to_string(MaskPosition m) { return m == MaskPosition::tail ? "tail" : "head"; }

Placement placement_from_string(const std::string& s) {
  if (s == "head") return Placement::head;
  if (s == "middle") return Placement::middle;
  if (s == "uniform") return Placement::uniform;
  if (s == "tail") return Placement::tail;
  throw ConfigError("unknown prompt placement: " + s);
}

MaskPosition mask_position_from_string(const std::string& s) {
  if (s == "tail") return MaskPosition::tail;
  if (s == "head") return MaskPosition::head;
  throw ConfigError("unknown mask position: " + s);
}

void PromptTemplate::validate() const {
  if (prompt_count < 0 || prompt_count > kMaxPromptCount) {
    throw ConfigError("prompt template: prompt_count must be in [0, " +
                      std::to_string(kMaxPromptCount) + "]");
  }
  if (separator && separator->empty()) {
    throw ConfigError("prompt template: separator must not be an empty string");
  }
}

PromptGaps allocate_positions(Placement placement, int prompt_count, int len_a, int len_b) {
  (void)len_a;
  (void)len_b;
  if (prompt_count < 0) throw ConfigError("allocate_positions: negative prompt count");
  PromptGaps gaps;
  switch (placement) {
    case Placement::head:
      gaps.gap1 = prompt_count;
      break;
    case Placement::middle:
      gaps.gap2 = prompt_count;
      break;
    case Placement::tail:
      gaps.gap3 = prompt_count;
      break;
    case Placement::uniform: {
      const int base = prompt_count / 3;
      const int rem = prompt_count % 3;
      gaps.gap1 = base + (rem > 0 ? 1 : 0);
      gaps.gap2 = base + (rem > 1 ? 1 : 0);
      gaps.gap3 = base;
      break;
    }
  }
  return gaps;
}

MaskedSequence render(const PromptTemplate& tmpl, const TaskExample& example,
                      const Tokenizer& tokenizer, int budget) {
  tmpl.validate();

  std::vector<int> ids_a = tokenizer.encode(example.text_a);
  std::vector<int> ids_b = tokenizer.encode(example.text_b);
  if (ids_a.empty() || ids_b.empty()) {
    throw ConfigError("render: both segments must tokenize to at least one token (example " +
                      example.id + ")");
  }

  std::optional<int> separator_id;
  if (tmpl.separator) {
    auto sep_ids = tokenizer.encode(*tmpl.separator);
    if (sep_ids.size() != 1 || sep_ids[0] == Tokenizer::kUnk) {
      throw ConfigError("render: separator must be a single in-vocabulary token");
    }
    separator_id = sep_ids[0];
  }

  const int fixed = (tmpl.include_cls ? 1 : 0) + (separator_id ? 1 : 0) + tmpl.prompt_count + 1;
  const int available = budget - fixed;
  if (available < 2) {
    throw ConfigError("render: budget " + std::to_string(budget) +
                      " too small to hold cls, prompts, mask and one token per segment");
  }

  int len_a = static_cast<int>(ids_a.size());
  int len_b = static_cast<int>(ids_b.size());
  if (len_a + len_b > available) {
    // proportional truncation: the longer segment loses more, at least one
    // token survives on each side
    const int overflow = len_a + len_b - available;
    int lose_a = static_cast<int>(std::llround(
        static_cast<double>(overflow) * len_a / (len_a + len_b)));
    lose_a = std::min(lose_a, len_a - 1);
    int lose_b = overflow - lose_a;
    if (lose_b > len_b - 1) {
      lose_a += lose_b - (len_b - 1);
      lose_b = len_b - 1;
    }
    ids_a.resize(static_cast<size_t>(len_a - lose_a));
    ids_b.resize(static_cast<size_t>(len_b - lose_b));
    len_a = static_cast<int>(ids_a.size());
    len_b = static_cast<int>(ids_b.size());
  }

  const PromptGaps gaps = allocate_positions(tmpl.placement, tmpl.prompt_count, len_a, len_b);

  MaskedSequence seq;
  seq.items.reserve(static_cast<size_t>(fixed + len_a + len_b));
  int next_slot = 1;
  auto push_prompts = [&](int count) {
    for (int i = 0; i < count; ++i) {
      seq.items.push_back({SeqItem::Kind::prompt, next_slot++});
    }
  };
  auto push_mask = [&] {
    seq.mask_index = seq.length();
    seq.items.push_back({SeqItem::Kind::mask, 0});
  };

  if (tmpl.include_cls) seq.items.push_back({SeqItem::Kind::cls, 0});
  if (tmpl.mask_position == MaskPosition::head) push_mask();
  push_prompts(gaps.gap1);
  seq.span_a.first = seq.length();
  for (int id : ids_a) seq.items.push_back({SeqItem::Kind::token, id});
  seq.span_a.second = seq.length();
  if (separator_id) seq.items.push_back({SeqItem::Kind::token, *separator_id});
  push_prompts(gaps.gap2);
  seq.span_b.first = seq.length();
  for (int id : ids_b) seq.items.push_back({SeqItem::Kind::token, id});
  seq.span_b.second = seq.length();
  if (tmpl.mask_position == MaskPosition::tail) {
    if (tmpl.placement == Placement::tail) {
      // §-tail form: prompts trail the mask
      push_mask();
      push_prompts(gaps.gap3);
    } else {
      push_prompts(gaps.gap3);
      push_mask();
    }
  } else {
    push_prompts(gaps.gap3);
  }

  return seq;
}

PromptTable PromptTable::random_init(int prompt_count, int hidden_dim, uint64_t seed,
                                     double stddev) {
  if (prompt_count < 0 || prompt_count > kMaxPromptCount) {
    throw ConfigError("prompt table: prompt_count out of range");
  }
  PromptTable table;
  table.vectors.name = "prompt_table";
  table.vectors.group = ParamGroup::prompt_table;
  Rng rng(seed);
  table.vectors.init_normal(prompt_count, hidden_dim, stddev, rng);
  return table;
}

PromptTable PromptTable::from_words(const std::vector<std::string>& words,
                                    const Backbone& backbone) {
  PromptTable table;
  table.vectors.name = "prompt_table";
  table.vectors.group = ParamGroup::prompt_table;
  table.vectors.init_zero(static_cast<Eigen::Index>(words.size()), backbone.hidden_dim());
  for (size_t i = 0; i < words.size(); ++i) {
    auto id = backbone.tokenizer.id_of(words[i]);
    if (!id) {
      throw ConfigError("prompt table: word not in vocabulary: " + words[i]);
    }
    table.vectors.value.row(static_cast<Eigen::Index>(i)) =
        backbone.word_embeddings.value.row(*id);
  }
  return table;
}

Mat assemble_embeddings(const MaskedSequence& seq, const Backbone& backbone,
                        const PromptTable& prompts) {
  Mat out(seq.length(), backbone.hidden_dim());
  for (int i = 0; i < seq.length(); ++i) {
    const SeqItem& item = seq.items[static_cast<size_t>(i)];
    switch (item.kind) {
      case SeqItem::Kind::token:
        if (item.value < 0 || item.value >= backbone.vocab_size()) {
          throw ConfigError("assemble_embeddings: token id out of range");
        }
        out.row(i) = backbone.word_embeddings.value.row(item.value);
        break;
      case SeqItem::Kind::prompt:
        if (item.value < 1 || item.value > prompts.prompt_count()) {
          throw ConfigError("assemble_embeddings: prompt slot " + std::to_string(item.value) +
                            " outside table of " + std::to_string(prompts.prompt_count()));
        }
        out.row(i) = prompts.vectors.value.row(item.value - 1);
        break;
      case SeqItem::Kind::mask:
        out.row(i) = backbone.word_embeddings.value.row(Tokenizer::kMask);
        break;
      case SeqItem::Kind::cls:
        out.row(i) = backbone.word_embeddings.value.row(Tokenizer::kCls);
        break;
    }
  }
  return out;
}

void scatter_embedding_grads(const MaskedSequence& seq, const Mat& input_grad,
                             Backbone& backbone, PromptTable& prompts) {
  for (int i = 0; i < seq.length(); ++i) {
    const SeqItem& item = seq.items[static_cast<size_t>(i)];
    switch (item.kind) {
      case SeqItem::Kind::token:
        backbone.word_embeddings.grad.row(item.value) += input_grad.row(i);
        break;
      case SeqItem::Kind::prompt:
        prompts.vectors.grad.row(item.value - 1) += input_grad.row(i);
        break;
      case SeqItem::Kind::mask:
        backbone.word_embeddings.grad.row(Tokenizer::kMask) += input_grad.row(i);
        break;
      case SeqItem::Kind::cls:
        backbone.word_embeddings.grad.row(Tokenizer::kCls) += input_grad.row(i);
        break;
    }
  }
}

}  // namespace ptkit
