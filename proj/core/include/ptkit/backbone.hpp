#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptkit/corpus.hpp"
#include "ptkit/encoder.hpp"
#include "ptkit/tensor.hpp"
#include "ptkit/tokenizer.hpp"

namespace ptkit {

enum class FreezePolicy { frozen_backbone, full_finetune };

std::string to_string(FreezePolicy p);
FreezePolicy freeze_policy_from_string(const std::string& s);

/// Two-layer MLP over the hidden state at the mask position, projecting to
/// vocabulary logits.
class MlmHead {
 public:
  struct Cache {
    Mat input;
    Mat pre;
    Mat act;
  };

  MlmHead() = default;
  static MlmHead create(int hidden_dim, int vocab_size, Rng& rng);

  /// rows: R x d hidden states -> R x vocab_size logits.
  Mat forward(const Mat& rows, Cache* cache = nullptr) const;
  /// Accumulates parameter gradients, returns d(loss)/d(input rows).
  Mat backward(const Mat& logits_grad, const Cache& cache);

  ParamList params();
  ConstParamList params() const;
  int vocab_size() const { return static_cast<int>(w2_.value.cols()); }

 private:
  Param w1_, b1_, w2_, b2_;
};

// The full masked-language-model stack: tokenizer, word-embedding table,
// transformer encoder and MLM head, plus the freeze policy that training
// honors. Value semantics; copying a backbone copies all parameters.
struct Backbone {
  Tokenizer tokenizer;
  EncoderConfig config;
  Param word_embeddings;  // vocab_size x hidden_dim
  Encoder encoder;
  MlmHead mlm_head;
  FreezePolicy freeze_policy = FreezePolicy::frozen_backbone;

  /// Fresh randomly initialized backbone. config.vocab_size is overwritten
  /// from the tokenizer.
  static Backbone create(EncoderConfig config, Tokenizer tokenizer);

  std::vector<int> encode_tokens(std::string_view text) const;

  /// Word-embedding rows for the given ids (prompt injection starts here).
  Mat embed_ids(const std::vector<int>& ids) const;

  /// Encoder pass over pre-assembled embedding rows.
  Mat forward_hidden(const Mat& input_embeddings,
                     const std::vector<uint8_t>& attention_mask = {}) const;

  /// Vocabulary logits for one hidden vector (the mask position).
  Eigen::RowVectorXd mlm_logits(const Eigen::RowVectorXd& hidden_at_mask) const;

  ParamList params();
  ConstParamList params() const;
  int64_t parameter_count() const;
  int vocab_size() const { return tokenizer.vocab_size(); }
  int hidden_dim() const { return config.hidden_dim; }
};

struct PretrainOptions {
  double mask_rate = 0.15;
  int steps = 0;
  uint64_t seed = 1;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  double heldout_fraction = 0.1;
};

struct PretrainResult {
  Backbone backbone;
  double initial_heldout_loss = 0.0;
  double final_heldout_loss = 0.0;
  int steps = 0;
  int heldout_count = 0;
};

/// MLM pretraining of the miniature backbone from scratch: random token
/// positions are replaced by [MASK] and the model is trained to recover the
/// originals with AdamW. Deterministic given the seed. steps == 0 leaves the
/// freshly initialized parameters untouched.
PretrainResult pretrain_mlm(const std::vector<CodeSnippet>& corpus, const EncoderConfig& config,
                            const Tokenizer& tokenizer, const PretrainOptions& options);

// --- shared softmax cross-entropy ------------------------------------------

/// -log softmax(logits)[gold]; throws on non-finite logits or bad gold id.
double softmax_cross_entropy(const Eigen::RowVectorXd& logits, int gold_id);

/// Gradient of softmax_cross_entropy w.r.t. logits, scaled.
Eigen::RowVectorXd softmax_cross_entropy_grad(const Eigen::RowVectorXd& logits, int gold_id,
                                              double scale);

}  // namespace ptkit
