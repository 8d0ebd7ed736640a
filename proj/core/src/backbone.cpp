#include "ptkit/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "ptkit/errors.hpp"
#include "ptkit/optim.hpp"

namespace ptkit {

std::string to_string(FreezePolicy p) {
  return p == FreezePolicy::frozen_backbone ? "frozen_backbone" : "full_finetune";
}

FreezePolicy freeze_policy_from_string(const std::string& s) {
  if (s == "frozen_backbone") return FreezePolicy::frozen_backbone;
  if (s == "full_finetune") return FreezePolicy::full_finetune;
  throw ConfigError("unknown freeze policy: " + s);
}

// --- MlmHead ---------------------------------------------------------------

MlmHead MlmHead::create(int hidden_dim, int vocab_size, Rng& rng) {
  MlmHead head;
  const double init_std = 0.02;
  head.w1_.name = "mlm_head.w1";
  head.w1_.group = ParamGroup::mlm_head;
  head.w1_.init_normal(hidden_dim, hidden_dim, init_std, rng);
  head.b1_.name = "mlm_head.b1";
  head.b1_.group = ParamGroup::mlm_head;
  head.b1_.init_zero(1, hidden_dim);
  head.w2_.name = "mlm_head.w2";
  head.w2_.group = ParamGroup::mlm_head;
  head.w2_.init_normal(hidden_dim, vocab_size, init_std, rng);
  head.b2_.name = "mlm_head.b2";
  head.b2_.group = ParamGroup::mlm_head;
  head.b2_.init_zero(1, vocab_size);
  return head;
}

Mat MlmHead::forward(const Mat& rows, Cache* cache) const {
  if (rows.cols() != w1_.value.rows()) {
    throw ConfigError("mlm head: hidden dimension mismatch, got " +
                      std::to_string(rows.cols()) + " expected " +
                      std::to_string(w1_.value.rows()));
  }
  Mat pre = (rows * w1_.value).rowwise() + b1_.value.row(0);
  Mat act = pre.unaryExpr([](double u) { return gelu(u); });
  Mat logits = (act * w2_.value).rowwise() + b2_.value.row(0);
  if (cache) {
    cache->input = rows;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
  }
  return logits;
}

Mat MlmHead::backward(const Mat& logits_grad, const Cache& cache) {
  Mat dact = logits_grad * w2_.value.transpose();
  w2_.grad += cache.act.transpose() * logits_grad;
  b2_.grad.row(0) += logits_grad.colwise().sum();
  Mat dpre = dact.cwiseProduct(
      cache.pre.unaryExpr([](double u) { return gelu_derivative(u); }));
  Mat dinput = dpre * w1_.value.transpose();
  w1_.grad += cache.input.transpose() * dpre;
  b1_.grad.row(0) += dpre.colwise().sum();
  return dinput;
}

ParamList MlmHead::params() { return {&w1_, &b1_, &w2_, &b2_}; }

ConstParamList MlmHead::params() const { return {&w1_, &b1_, &w2_, &b2_}; }

// --- Backbone ---------------------------------------------------------------

Backbone Backbone::create(EncoderConfig config, Tokenizer tokenizer) {
  if (tokenizer.empty()) throw ConfigError("backbone: tokenizer has no vocabulary");
  config.vocab_size = tokenizer.vocab_size();
  config.validate();

  Backbone b;
  b.tokenizer = std::move(tokenizer);
  b.config = config;

  Rng rng(config.seed);
  b.word_embeddings.name = "word_embeddings";
  b.word_embeddings.group = ParamGroup::word_embeddings;
  b.word_embeddings.init_normal(config.vocab_size, config.hidden_dim, 0.02, rng);
  b.encoder = Encoder::create(config, rng);
  b.mlm_head = MlmHead::create(config.hidden_dim, config.vocab_size, rng);
  return b;
}

std::vector<int> Backbone::encode_tokens(std::string_view text) const {
  return tokenizer.encode(text);
}

Mat Backbone::embed_ids(const std::vector<int>& ids) const {
  Mat out(static_cast<Eigen::Index>(ids.size()), config.hidden_dim);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab_size()) {
      throw ConfigError("embed_ids: token id out of range: " + std::to_string(ids[i]));
    }
    out.row(static_cast<Eigen::Index>(i)) = word_embeddings.value.row(ids[i]);
  }
  return out;
}

Mat Backbone::forward_hidden(const Mat& input_embeddings,
                             const std::vector<uint8_t>& attention_mask) const {
  return encoder.forward(input_embeddings, attention_mask, nullptr);
}

Eigen::RowVectorXd Backbone::mlm_logits(const Eigen::RowVectorXd& hidden_at_mask) const {
  if (hidden_at_mask.size() != config.hidden_dim) {
    throw ConfigError("mlm_logits: hidden vector dimension mismatch");
  }
  Mat row(1, config.hidden_dim);
  row.row(0) = hidden_at_mask;
  return mlm_head.forward(row).row(0);
}

ParamList Backbone::params() {
  ParamList list;
  list.push_back(&word_embeddings);
  for (Param* p : encoder.params()) list.push_back(p);
  for (Param* p : mlm_head.params()) list.push_back(p);
  return list;
}

ConstParamList Backbone::params() const {
  ConstParamList list;
  auto& self = const_cast<Backbone&>(*this);
  for (Param* p : self.params()) list.push_back(p);
  return list;
}

int64_t Backbone::parameter_count() const {
  int64_t count = 0;
  for (const Param* p : params()) count += p->size();
  return count;
}

// --- cross entropy ----------------------------------------------------------

double softmax_cross_entropy(const Eigen::RowVectorXd& logits, int gold_id) {
  if (gold_id < 0 || gold_id >= logits.size()) {
    throw ConfigError("cross entropy: gold id out of range: " + std::to_string(gold_id));
  }
  if (!logits.allFinite()) throw InvariantError("cross entropy: non-finite logits");
  const double max = logits.maxCoeff();
  const double lse = std::log((logits.array() - max).exp().sum()) + max;
  return lse - logits(gold_id);
}

Eigen::RowVectorXd softmax_cross_entropy_grad(const Eigen::RowVectorXd& logits, int gold_id,
                                              double scale) {
  const double max = logits.maxCoeff();
  Eigen::RowVectorXd p = (logits.array() - max).exp();
  p /= p.sum();
  p(gold_id) -= 1.0;
  return p * scale;
}

// --- pretraining -------------------------------------------------------------

namespace {

struct MaskedExample {
  std::vector<int> input_ids;   // with [MASK] substituted
  std::vector<int> mask_positions;
  std::vector<int> gold_ids;
};

MaskedExample make_masked(const std::vector<int>& ids, double mask_rate, Rng& rng) {
  MaskedExample ex;
  ex.input_ids = ids;
  const int len = static_cast<int>(ids.size());
  // position 0 is [CLS]; never masked
  int candidates = len - 1;
  if (candidates <= 0) return ex;
  int n_mask = std::max(1, static_cast<int>(std::floor(mask_rate * candidates)));
  auto picked = rng.sample_indices(static_cast<size_t>(candidates), static_cast<size_t>(n_mask));
  std::sort(picked.begin(), picked.end());
  for (size_t p : picked) {
    int pos = static_cast<int>(p) + 1;
    ex.mask_positions.push_back(pos);
    ex.gold_ids.push_back(ids[static_cast<size_t>(pos)]);
    ex.input_ids[static_cast<size_t>(pos)] = Tokenizer::kMask;
  }
  return ex;
}

std::vector<int> snippet_ids(const Backbone& backbone, const CodeSnippet& snippet) {
  std::vector<int> ids;
  ids.push_back(Tokenizer::kCls);
  auto body = backbone.tokenizer.encode(snippet.text);
  const size_t max_body =
      static_cast<size_t>(backbone.config.max_sequence_length) - 1;
  if (body.size() > max_body) body.resize(max_body);
  ids.insert(ids.end(), body.begin(), body.end());
  return ids;
}

/// Mean MLM loss over a fixed set of masked examples. Forward only.
double masked_loss(const Backbone& backbone, const std::vector<MaskedExample>& examples) {
  double total = 0.0;
  int64_t count = 0;
  for (const auto& ex : examples) {
    if (ex.mask_positions.empty()) continue;
    Mat x = backbone.embed_ids(ex.input_ids);
    Mat hidden = backbone.encoder.forward(x, {}, nullptr);
    Mat rows(static_cast<Eigen::Index>(ex.mask_positions.size()), backbone.hidden_dim());
    for (size_t i = 0; i < ex.mask_positions.size(); ++i) {
      rows.row(static_cast<Eigen::Index>(i)) = hidden.row(ex.mask_positions[i]);
    }
    Mat logits = backbone.mlm_head.forward(rows);
    for (size_t i = 0; i < ex.gold_ids.size(); ++i) {
      total += softmax_cross_entropy(logits.row(static_cast<Eigen::Index>(i)), ex.gold_ids[i]);
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace

PretrainResult pretrain_mlm(const std::vector<CodeSnippet>& corpus, const EncoderConfig& config,
                            const Tokenizer& tokenizer, const PretrainOptions& options) {
  if (corpus.empty()) throw ConfigError("pretrain_mlm: empty corpus");
  if (!(options.mask_rate > 0.0 && options.mask_rate < 1.0)) {
    throw ConfigError("pretrain_mlm: mask_rate must be in (0, 1)");
  }
  if (options.steps < 0) throw ConfigError("pretrain_mlm: steps must be >= 0");
  if (options.batch_size < 1) throw ConfigError("pretrain_mlm: batch_size must be >= 1");

  PretrainResult result;
  result.backbone = Backbone::create(config, tokenizer);
  Backbone& backbone = result.backbone;

  // deterministic split: the trailing slice is held out
  const size_t n = corpus.size();
  size_t heldout = static_cast<size_t>(std::llround(options.heldout_fraction * static_cast<double>(n)));
  heldout = std::clamp<size_t>(heldout, 1, n > 1 ? n - 1 : 1);
  const size_t train_count = n > heldout ? n - heldout : 0;

  std::vector<std::vector<int>> train_ids;
  train_ids.reserve(train_count);
  for (size_t i = 0; i < train_count; ++i) train_ids.push_back(snippet_ids(backbone, corpus[i]));

  Rng eval_rng(mix_seed(options.seed, 0xE7A1));
  std::vector<MaskedExample> eval_examples;
  for (size_t i = train_count; i < n; ++i) {
    eval_examples.push_back(
        make_masked(snippet_ids(backbone, corpus[i]), options.mask_rate, eval_rng));
  }
  result.heldout_count = static_cast<int>(eval_examples.size());
  result.initial_heldout_loss = masked_loss(backbone, eval_examples);

  if (options.steps == 0 || train_ids.empty()) {
    result.final_heldout_loss = result.initial_heldout_loss;
    return result;
  }

  ParamList trainable = backbone.params();
  AdamW optimizer(trainable, options.weight_decay);
  Rng step_rng(mix_seed(options.seed, 0x57E9));

  for (int step = 0; step < options.steps; ++step) {
    zero_grads(trainable);
    std::vector<MaskedExample> batch;
    batch.reserve(static_cast<size_t>(options.batch_size));
    int64_t total_masked = 0;
    for (int b = 0; b < options.batch_size; ++b) {
      const auto& ids = train_ids[step_rng.uniform(train_ids.size())];
      batch.push_back(make_masked(ids, options.mask_rate, step_rng));
      total_masked += static_cast<int64_t>(batch.back().mask_positions.size());
    }
    if (total_masked == 0) continue;
    const double scale = 1.0 / static_cast<double>(total_masked);

    for (const auto& ex : batch) {
      if (ex.mask_positions.empty()) continue;
      Mat x = backbone.embed_ids(ex.input_ids);
      EncoderWorkspace ws;
      Mat hidden = backbone.encoder.forward(x, {}, &ws);
      const auto rows_n = static_cast<Eigen::Index>(ex.mask_positions.size());
      Mat rows(rows_n, backbone.hidden_dim());
      for (Eigen::Index i = 0; i < rows_n; ++i) {
        rows.row(i) = hidden.row(ex.mask_positions[static_cast<size_t>(i)]);
      }
      MlmHead::Cache head_cache;
      Mat logits = backbone.mlm_head.forward(rows, &head_cache);
      Mat dlogits(rows_n, backbone.vocab_size());
      for (Eigen::Index i = 0; i < rows_n; ++i) {
        dlogits.row(i) = softmax_cross_entropy_grad(
            logits.row(i), ex.gold_ids[static_cast<size_t>(i)], scale);
      }
      Mat drows = backbone.mlm_head.backward(dlogits, head_cache);
      Mat dhidden = Mat::Zero(hidden.rows(), hidden.cols());
      for (Eigen::Index i = 0; i < rows_n; ++i) {
        dhidden.row(ex.mask_positions[static_cast<size_t>(i)]) += drows.row(i);
      }
      Mat dx = backbone.encoder.backward(dhidden, ws);
      for (size_t pos = 0; pos < ex.input_ids.size(); ++pos) {
        backbone.word_embeddings.grad.row(ex.input_ids[pos]) +=
            dx.row(static_cast<Eigen::Index>(pos));
      }
    }
    clip_global_norm(trainable, 1.0);
    optimizer.step(options.learning_rate);
  }

  result.steps = options.steps;
  result.final_heldout_loss = masked_loss(backbone, eval_examples);
  return result;
}

}  // namespace ptkit
