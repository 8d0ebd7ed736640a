#include "ptkit/encoder.hpp"

#include <cmath>
#include <numbers>

#include "ptkit/errors.hpp"

namespace ptkit {

namespace {
constexpr double kLayerNormEps = 1e-5;
}

void EncoderConfig::validate() const {
  if (hidden_dim <= 0 || num_heads <= 0 || num_layers <= 0) {
    throw ConfigError("encoder config: dimensions must be positive");
  }
  if (hidden_dim % num_heads != 0) {
    throw ConfigError("encoder config: hidden_dim " + std::to_string(hidden_dim) +
                      " not divisible by num_heads " + std::to_string(num_heads));
  }
  if (max_sequence_length < 16) {
    throw ConfigError("encoder config: max_sequence_length must be >= 16");
  }
}

double gelu(double u) { return 0.5 * u * (1.0 + std::erf(u * (1.0 / std::numbers::sqrt2))); }

double gelu_derivative(double u) {
  const double cdf = 0.5 * (1.0 + std::erf(u * (1.0 / std::numbers::sqrt2)));
  const double pdf = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + u * pdf;
}

Mat layer_norm_forward(const Mat& input, const Param& gain, const Param& bias,
                       LayerNormCache* cache) {
  const Eigen::Index rows = input.rows();
  const Eigen::Index cols = input.cols();
  Mat normalized(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = input.row(r).mean();
    const double var = (input.row(r).array() - mean).square().mean();
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    normalized.row(r) = (input.row(r).array() - mean) * is;
    inv_std(r) = is;
  }
  Mat out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    out.row(r) = normalized.row(r).cwiseProduct(gain.value.row(0)) + bias.value.row(0);
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

Mat layer_norm_backward(const Mat& out_grad, Param& gain, Param& bias,
                        const LayerNormCache& cache) {
  const Eigen::Index rows = out_grad.rows();
  const Eigen::Index cols = out_grad.cols();
  Mat in_grad(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    gain.grad.row(0) += out_grad.row(r).cwiseProduct(cache.normalized.row(r));
    bias.grad.row(0) += out_grad.row(r);
    // d/dz of y = gain * (z - mu) * inv_std + bias
    Eigen::RowVectorXd dnorm = out_grad.row(r).cwiseProduct(gain.value.row(0));
    const double mean_dnorm = dnorm.mean();
    const double mean_dnorm_norm = dnorm.cwiseProduct(cache.normalized.row(r)).mean();
    in_grad.row(r) =
        (dnorm.array() - mean_dnorm - cache.normalized.row(r).array() * mean_dnorm_norm) *
        cache.inv_std(r);
  }
  (void)cols;
  return in_grad;
}

Encoder Encoder::create(const EncoderConfig& config, Rng& rng) {
  config.validate();
  Encoder enc;
  enc.config_ = config;
  const int d = config.hidden_dim;
  const int ffn = config.ffn_dim();
  const double init_std = 0.02;

  enc.position_embeddings.name = "encoder.position_embeddings";
  enc.position_embeddings.group = ParamGroup::encoder;
  enc.position_embeddings.init_normal(config.max_sequence_length, d, init_std, rng);

  auto make_ln = [&](Param& gain, Param& bias, const std::string& prefix) {
    gain.name = prefix + ".gain";
    gain.group = ParamGroup::encoder;
    gain.init_constant(1, d, 1.0);
    bias.name = prefix + ".bias";
    bias.group = ParamGroup::encoder;
    bias.init_zero(1, d);
  };
  make_ln(enc.ln_emb_gain, enc.ln_emb_bias, "encoder.ln_emb");

  enc.layers_.resize(static_cast<size_t>(config.num_layers));
  for (int l = 0; l < config.num_layers; ++l) {
    Layer& layer = enc.layers_[static_cast<size_t>(l)];
    const std::string prefix = "encoder.layer" + std::to_string(l);
    auto make_linear = [&](Param& w, Param& b, const std::string& name, int in_dim,
                           int out_dim) {
      w.name = prefix + "." + name + ".weight";
      w.group = ParamGroup::encoder;
      w.init_normal(in_dim, out_dim, init_std, rng);
      b.name = prefix + "." + name + ".bias";
      b.group = ParamGroup::encoder;
      b.init_zero(1, out_dim);
    };
    make_linear(layer.wq, layer.bq, "attn.q", d, d);
    make_linear(layer.wk, layer.bk, "attn.k", d, d);
    make_linear(layer.wv, layer.bv, "attn.v", d, d);
    make_linear(layer.wo, layer.bo, "attn.out", d, d);
    make_ln(layer.ln1_gain, layer.ln1_bias, prefix + ".ln1");
    make_linear(layer.ffn_w1, layer.ffn_b1, "ffn.w1", d, ffn);
    make_linear(layer.ffn_w2, layer.ffn_b2, "ffn.w2", ffn, d);
    make_ln(layer.ln2_gain, layer.ln2_bias, prefix + ".ln2");
  }
  return enc;
}

Mat Encoder::forward(const Mat& input, const std::vector<uint8_t>& attention_mask,
                     EncoderWorkspace* workspace) const {
  const Eigen::Index seq_len = input.rows();
  if (seq_len == 0) throw ConfigError("encoder forward: empty sequence");
  if (seq_len > config_.max_sequence_length) {
    throw ConfigError("encoder forward: sequence length " + std::to_string(seq_len) +
                      " exceeds max_sequence_length " +
                      std::to_string(config_.max_sequence_length) +
                      " (truncation is the caller's job)");
  }
  if (input.cols() != config_.hidden_dim) {
    throw ConfigError("encoder forward: input width must equal hidden_dim");
  }
  if (!attention_mask.empty() && attention_mask.size() != static_cast<size_t>(seq_len)) {
    throw ConfigError("encoder forward: attention mask length mismatch");
  }

  const int num_heads = config_.num_heads;
  const int head_dim = config_.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  if (workspace) {
    workspace->attention_mask = attention_mask;
    workspace->layers.assign(static_cast<size_t>(config_.num_layers), {});
  }

  Mat x = input + position_embeddings.value.topRows(seq_len);
  x = layer_norm_forward(x, ln_emb_gain, ln_emb_bias, workspace ? &workspace->ln_emb : nullptr);

  for (size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    EncoderWorkspace::LayerCache* cache = workspace ? &workspace->layers[l] : nullptr;
    if (cache) cache->input = x;

    Mat q = (x * layer.wq.value).rowwise() + layer.bq.value.row(0);
    Mat k = (x * layer.wk.value).rowwise() + layer.bk.value.row(0);
    Mat v = (x * layer.wv.value).rowwise() + layer.bv.value.row(0);

    Mat context(seq_len, config_.hidden_dim);
    std::vector<Mat> probs(static_cast<size_t>(num_heads));
    for (int h = 0; h < num_heads; ++h) {
      auto qh = q.middleCols(h * head_dim, head_dim);
      auto kh = k.middleCols(h * head_dim, head_dim);
      auto vh = v.middleCols(h * head_dim, head_dim);
      Mat scores = (qh * kh.transpose()) * scale;
      if (!attention_mask.empty()) {
        for (Eigen::Index j = 0; j < seq_len; ++j) {
          if (!attention_mask[static_cast<size_t>(j)]) scores.col(j).setConstant(-1e30);
        }
      }
      Mat p(seq_len, seq_len);
      for (Eigen::Index r = 0; r < seq_len; ++r) {
        const double row_max = scores.row(r).maxCoeff();
        p.row(r) = (scores.row(r).array() - row_max).exp();
        p.row(r) /= p.row(r).sum();
      }
      context.middleCols(h * head_dim, head_dim) = p * vh;
      probs[static_cast<size_t>(h)] = std::move(p);
    }
    Mat attn_out = (context * layer.wo.value).rowwise() + layer.bo.value.row(0);

    if (cache) {
      cache->q = std::move(q);
      cache->k = std::move(k);
      cache->v = std::move(v);
      cache->probs = std::move(probs);
      cache->context = context;
    }

    Mat z1 = x + attn_out;
    Mat y1 = layer_norm_forward(z1, layer.ln1_gain, layer.ln1_bias, cache ? &cache->ln1 : nullptr);
    if (cache) cache->ln1_out = y1;

    Mat pre = (y1 * layer.ffn_w1.value).rowwise() + layer.ffn_b1.value.row(0);
    Mat act = pre.unaryExpr([](double u) { return gelu(u); });
    Mat ffn_out = (act * layer.ffn_w2.value).rowwise() + layer.ffn_b2.value.row(0);
    if (cache) {
      cache->ffn_pre = std::move(pre);
      cache->ffn_act = act;
    }

    Mat z2 = y1 + ffn_out;
    x = layer_norm_forward(z2, layer.ln2_gain, layer.ln2_bias, cache ? &cache->ln2 : nullptr);
  }
  return x;
}

Mat Encoder::backward(const Mat& hidden_grad, EncoderWorkspace& workspace) {
  const Eigen::Index seq_len = hidden_grad.rows();
  const int num_heads = config_.num_heads;
  const int head_dim = config_.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Mat dx = hidden_grad;
  for (size_t li = layers_.size(); li-- > 0;) {
    Layer& layer = layers_[li];
    EncoderWorkspace::LayerCache& cache = workspace.layers[li];

    // FFN block: x = LN2(y1 + ffn(y1))
    Mat dz2 = layer_norm_backward(dx, layer.ln2_gain, layer.ln2_bias, cache.ln2);
    Mat dy1 = dz2;
    // ffn_out = gelu(y1 w1 + b1) w2 + b2
    Mat dact = dz2 * layer.ffn_w2.value.transpose();
    layer.ffn_w2.grad += cache.ffn_act.transpose() * dz2;
    layer.ffn_b2.grad.row(0) += dz2.colwise().sum();
    Mat dpre = dact.cwiseProduct(cache.ffn_pre.unaryExpr([](double u) {
      return gelu_derivative(u);
    }));
    dy1 += dpre * layer.ffn_w1.value.transpose();
    layer.ffn_w1.grad += cache.ln1_out.transpose() * dpre;
    layer.ffn_b1.grad.row(0) += dpre.colwise().sum();

    // attention block: y1 = LN1(input + attn(input))
    Mat dz1 = layer_norm_backward(dy1, layer.ln1_gain, layer.ln1_bias, cache.ln1);
    Mat dinput = dz1;
    Mat dcontext = dz1 * layer.wo.value.transpose();
    layer.wo.grad += cache.context.transpose() * dz1;
    layer.bo.grad.row(0) += dz1.colwise().sum();

    Mat dq(seq_len, config_.hidden_dim);
    Mat dk(seq_len, config_.hidden_dim);
    Mat dv(seq_len, config_.hidden_dim);
    for (int h = 0; h < num_heads; ++h) {
      const Mat& p = cache.probs[static_cast<size_t>(h)];
      auto qh = cache.q.middleCols(h * head_dim, head_dim);
      auto kh = cache.k.middleCols(h * head_dim, head_dim);
      auto vh = cache.v.middleCols(h * head_dim, head_dim);
      auto dch = dcontext.middleCols(h * head_dim, head_dim);

      Mat dp = dch * vh.transpose();
      dv.middleCols(h * head_dim, head_dim) = p.transpose() * dch;
      // softmax backward; masked columns carry p == 0, so they stay zero
      Mat dscores(seq_len, seq_len);
      for (Eigen::Index r = 0; r < seq_len; ++r) {
        const double dot = dp.row(r).cwiseProduct(p.row(r)).sum();
        dscores.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
      }
      dscores *= scale;
      dq.middleCols(h * head_dim, head_dim) = dscores * kh;
      dk.middleCols(h * head_dim, head_dim) = dscores.transpose() * qh;
    }
    dinput += dq * layer.wq.value.transpose();
    dinput += dk * layer.wk.value.transpose();
    dinput += dv * layer.wv.value.transpose();
    layer.wq.grad += cache.input.transpose() * dq;
    layer.bq.grad.row(0) += dq.colwise().sum();
    layer.wk.grad += cache.input.transpose() * dk;
    layer.bk.grad.row(0) += dk.colwise().sum();
    layer.wv.grad += cache.input.transpose() * dv;
    layer.bv.grad.row(0) += dv.colwise().sum();

    dx = std::move(dinput);
  }

  Mat dx0 = layer_norm_backward(dx, ln_emb_gain, ln_emb_bias, workspace.ln_emb);
  position_embeddings.grad.topRows(seq_len) += dx0;
  return dx0;
}

ParamList Encoder::params() {
  ParamList list;
  list.push_back(&position_embeddings);
  list.push_back(&ln_emb_gain);
  list.push_back(&ln_emb_bias);
  for (auto& layer : layers_) {
    for (Param* p : {&layer.wq, &layer.bq, &layer.wk, &layer.bk, &layer.wv, &layer.bv,
                     &layer.wo, &layer.bo, &layer.ln1_gain, &layer.ln1_bias, &layer.ffn_w1,
                     &layer.ffn_b1, &layer.ffn_w2, &layer.ffn_b2, &layer.ln2_gain,
                     &layer.ln2_bias}) {
      list.push_back(p);
    }
  }
  return list;
}

ConstParamList Encoder::params() const {
  ConstParamList list;
  auto& self = const_cast<Encoder&>(*this);
  for (Param* p : self.params()) list.push_back(p);
  return list;
}

int64_t Encoder::parameter_count(const EncoderConfig& config) {
  const int64_t d = config.hidden_dim;
  const int64_t ffn = config.ffn_dim();
  int64_t count = config.max_sequence_length * d;  // position embeddings
  count += 2 * d;                                  // embedding layer norm
  int64_t per_layer = 4 * (d * d + d);             // q, k, v, out projections
  per_layer += 2 * d;                              // ln1
  per_layer += d * ffn + ffn + ffn * d + d;        // ffn
  per_layer += 2 * d;                              // ln2
  count += per_layer * config.num_layers;
  return count;
}

}  // namespace ptkit
