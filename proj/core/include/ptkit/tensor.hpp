#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "ptkit/hash.hpp"
#include "ptkit/rng.hpp"

namespace ptkit {

// All model math runs in double precision, row-major so parameter bytes are
// contiguous per logical row (hashing, checkpoint IO).
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Freeze-policy granularity: every parameter belongs to exactly one group.
enum class ParamGroup { word_embeddings, encoder, mlm_head, prompt_table };

std::string to_string(ParamGroup g);

/// A named parameter array with its gradient accumulator.
struct Param {
  std::string name;
  ParamGroup group = ParamGroup::encoder;
  Mat value;
  Mat grad;

  void init_zero(Eigen::Index rows, Eigen::Index cols) {
    value = Mat::Zero(rows, cols);
    grad = Mat::Zero(rows, cols);
  }

  void init_normal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
    value.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) value(r, c) = rng.normal(0.0, stddev);
    }
    grad = Mat::Zero(rows, cols);
  }

  void init_constant(Eigen::Index rows, Eigen::Index cols, double v) {
    value = Mat::Constant(rows, cols, v);
    grad = Mat::Zero(rows, cols);
  }

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

using ParamList = std::vector<Param*>;
using ConstParamList = std::vector<const Param*>;

inline void zero_grads(const ParamList& params) {
  for (Param* p : params) p->zero_grad();
}

/// Byte hash over the values of every parameter in one group, in list order.
inline uint64_t hash_group(const ConstParamList& params, ParamGroup group) {
  ByteHash h;
  for (const Param* p : params) {
    if (p->group != group) continue;
    h.update(p->value.data(), static_cast<size_t>(p->value.size()) * sizeof(double));
  }
  return h.digest();
}

inline std::string hash_group_hex(const ConstParamList& params, ParamGroup group) {
  ByteHash h;
  for (const Param* p : params) {
    if (p->group != group) continue;
    h.update(p->value.data(), static_cast<size_t>(p->value.size()) * sizeof(double));
  }
  return h.hex();
}

inline uint64_t hash_group(const ParamList& params, ParamGroup group) {
  return hash_group(ConstParamList(params.begin(), params.end()), group);
}

inline std::string hash_group_hex(const ParamList& params, ParamGroup group) {
  return hash_group_hex(ConstParamList(params.begin(), params.end()), group);
}

}  // namespace ptkit
