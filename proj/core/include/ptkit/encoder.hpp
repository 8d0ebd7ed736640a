#pragma once

#include <cstdint>
#include <vector>

#include "ptkit/tensor.hpp"

namespace ptkit {

struct EncoderConfig {
  int hidden_dim = 64;
  int num_heads = 4;
  int num_layers = 2;
  int max_sequence_length = 256;
  int vocab_size = 0;  // filled when the backbone binds a tokenizer
  uint64_t seed = 1;

  int head_dim() const { return hidden_dim / num_heads; }
  int ffn_dim() const { return 4 * hidden_dim; }
  void validate() const;
};

/// Per-sequence activations recorded by a forward pass so backward() can
/// replay it. One workspace per concurrent sequence.
struct EncoderWorkspace;

// Bidirectional transformer encoder: learned absolute position embeddings,
// embedding layer norm, then num_layers blocks of multi-head self-attention
// and a GELU feed-forward, both post-norm with residuals. Holds only the
// encoder parameters (word embeddings and the MLM head live in Backbone).
class Encoder {
 public:
  Encoder() = default;
  static Encoder create(const EncoderConfig& config, Rng& rng);

  /// input: S x d embedding rows (word/prompt vectors, positions not yet
  /// added). attention_mask: S entries, nonzero = real position; masked-out
  /// positions are excluded as attention keys, so their contents cannot
  /// influence unmasked outputs. Returns S x d hidden states.
  Mat forward(const Mat& input, const std::vector<uint8_t>& attention_mask,
              EncoderWorkspace* workspace = nullptr) const;

  /// Given d(loss)/d(hidden states), accumulates parameter gradients and
  /// returns d(loss)/d(input embeddings). Requires the workspace filled by
  /// the matching forward call.
  Mat backward(const Mat& hidden_grad, EncoderWorkspace& workspace);

  ParamList params();
  ConstParamList params() const;
  const EncoderConfig& config() const { return config_; }

  /// Total scalar parameter count; a pure function of the config.
  static int64_t parameter_count(const EncoderConfig& config);

 private:
  friend struct EncoderWorkspace;

  struct Layer {
    Param wq, bq, wk, bk, wv, bv, wo, bo;
    Param ln1_gain, ln1_bias;
    Param ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Param ln2_gain, ln2_bias;
  };

  EncoderConfig config_;
  Param position_embeddings;
  Param ln_emb_gain, ln_emb_bias;
  std::vector<Layer> layers_;
};

// --- shared numeric pieces (also used by the MLM head) --------------------

double gelu(double u);
double gelu_derivative(double u);

/// Row-wise layer norm cache: normalized rows and inverse stddev per row.
struct LayerNormCache {
  Mat normalized;
  Eigen::VectorXd inv_std;
};

Mat layer_norm_forward(const Mat& input, const Param& gain, const Param& bias,
                       LayerNormCache* cache);
Mat layer_norm_backward(const Mat& out_grad, Param& gain, Param& bias,
                        const LayerNormCache& cache);

struct EncoderWorkspace {
  struct LayerCache {
    Mat input;                 // block input (S x d)
    Mat q, k, v;               // projections (S x d)
    std::vector<Mat> probs;    // per-head attention probabilities (S x S)
    Mat context;               // concatenated head outputs (S x d)
    LayerNormCache ln1;
    Mat ln1_out;               // FFN input (S x d)
    Mat ffn_pre;               // pre-activation (S x 4d)
    Mat ffn_act;               // gelu(ffn_pre)
    LayerNormCache ln2;
  };
  std::vector<uint8_t> attention_mask;
  LayerNormCache ln_emb;
  std::vector<LayerCache> layers;
};

}  // namespace ptkit
