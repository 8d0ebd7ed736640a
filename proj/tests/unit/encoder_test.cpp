#include <doctest.h>

#include "../support/test_models.hpp"
#include "ptkit/encoder.hpp"
#include "ptkit/errors.hpp"

using namespace ptkit;
using namespace ptkit::testsupport;

namespace {

Mat random_input(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  Mat x(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) x(r, c) = rng.normal(0.0, 0.5);
  }
  return x;
}

}  // namespace

TEST_SUITE_BEGIN("encoder");

TEST_CASE("config validation") {
  EncoderConfig config = tiny_config();
  CHECK_NOTHROW(config.validate());
  config.hidden_dim = 30;  // not divisible by 4 heads
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = tiny_config();
  config.max_sequence_length = 8;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("forward preserves shape over random lengths") {
  EncoderConfig config = tiny_config();
  Rng rng(3);
  Encoder enc = Encoder::create(config, rng);
  Rng len_rng(17);
  for (int trial = 0; trial < 12; ++trial) {
    const int len = 1 + len_rng.uniform_int(config.max_sequence_length);
    Mat x = random_input(len, config.hidden_dim, 100 + static_cast<uint64_t>(trial));
    Mat h = enc.forward(x, {});
    CHECK(h.rows() == len);
    CHECK(h.cols() == config.hidden_dim);
    CHECK(h.allFinite());
  }
}

TEST_CASE("forward is deterministic and rejects overlong input") {
  EncoderConfig config = tiny_config();
  Rng rng(3);
  Encoder enc = Encoder::create(config, rng);
  Mat x = random_input(10, config.hidden_dim, 5);
  Mat h1 = enc.forward(x, {});
  Mat h2 = enc.forward(x, {});
  CHECK((h1 - h2).cwiseAbs().maxCoeff() == 0.0);

  Mat too_long = random_input(config.max_sequence_length + 1, config.hidden_dim, 6);
  CHECK_THROWS_AS(enc.forward(too_long, {}), ConfigError);
}

TEST_CASE("permuting masked-out positions leaves real outputs unchanged") {
  EncoderConfig config = tiny_config();
  Rng rng(3);
  Encoder enc = Encoder::create(config, rng);
  const int real = 7;
  const int padded = 5;
  Mat x = random_input(real + padded, config.hidden_dim, 11);
  std::vector<uint8_t> mask(real + padded, 1);
  for (int i = real; i < real + padded; ++i) mask[static_cast<size_t>(i)] = 0;

  Mat base = enc.forward(x, mask);
  // swap the contents of two padded rows and perturb another
  Mat shuffled = x;
  shuffled.row(real).swap(shuffled.row(real + 2));
  shuffled.row(real + 1).setConstant(3.7);
  Mat changed = enc.forward(shuffled, mask);

  const double max_delta =
      (base.topRows(real) - changed.topRows(real)).cwiseAbs().maxCoeff();
  CHECK(max_delta < 1e-5);
}

TEST_CASE("parameter count is a pure function of the config") {
  EncoderConfig config = tiny_config();
  Rng rng(3);
  Encoder enc = Encoder::create(config, rng);
  int64_t total = 0;
  for (const Param* p : std::as_const(enc).params()) total += p->size();
  CHECK(total == Encoder::parameter_count(config));
}

TEST_CASE("analytic gradients match finite differences across parameter kinds") {
  TaskModel model = toy_task_model(4);
  TaskExample ex = toy_pair_example();
  MaskedSequence seq = render(model.tmpl, ex, model.backbone.tokenizer, model.budget);
  const int gold = model.verbalizer.gold_id(Label::positive);

  auto params = model.all_params();
  Rng pick(2024);
  int checked = 0;
  for (int trial = 0; trial < 24; ++trial) {
    Param* p = params[pick.uniform(params.size())];
    const Eigen::Index row = static_cast<Eigen::Index>(pick.uniform(
        static_cast<uint64_t>(p->value.rows())));
    const Eigen::Index col = static_cast<Eigen::Index>(pick.uniform(
        static_cast<uint64_t>(p->value.cols())));
    auto result = gradcheck_coordinate(model, seq, gold, *p, row, col);
    INFO(p->name, "(", row, ",", col, ") analytic=", result.analytic,
         " numeric=", result.numeric);
    CHECK(result.relative_error < 1e-3);
    ++checked;
  }
  CHECK(checked == 24);
}

TEST_CASE("position embeddings receive gradient") {
  TaskModel model = toy_task_model(2);
  TaskExample ex = toy_pair_example();
  MaskedSequence seq = render(model.tmpl, ex, model.backbone.tokenizer, model.budget);
  zero_grads(model.all_params());
  model.example_loss_and_grad(seq, model.verbalizer.gold_id(Label::positive), 1.0);
  for (Param* p : model.all_params()) {
    if (p->name == "encoder.position_embeddings") {
      CHECK(p->grad.topRows(seq.length()).cwiseAbs().maxCoeff() > 0.0);
    }
  }
}

TEST_SUITE_END();
