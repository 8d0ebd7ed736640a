#include <doctest.h>

#include <cmath>
#include <map>

#include "../support/test_models.hpp"
#include "ptkit/errors.hpp"
#include "ptkit/tuning.hpp"

using namespace ptkit;
using namespace ptkit::testsupport;

namespace {

std::vector<TaskExample> toy_dataset(int pairs, uint64_t seed) {
  // positives repeat a shared sentence pair; negatives mix two unrelated ones
  std::vector<TaskExample> out;
  Rng rng(seed);
  auto sentences = toy_sentences();
  for (int i = 0; i < pairs; ++i) {
    TaskExample ex;
    ex.id = "d" + std::to_string(i);
    ex.task = Task::clone_detection;
    ex.language = "toy";
    const size_t base = rng.uniform(sentences.size());
    ex.text_a = sentences[base];
    if (i % 2 == 0) {
      ex.text_b = sentences[base];
      ex.label = Label::positive;
    } else {
      ex.text_b = sentences[(base + 1 + rng.uniform(sentences.size() - 1)) % sentences.size()];
      ex.label = Label::negative;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

TrainConfig quick_config(int epochs = 2, double lr = 1e-3) {
  TrainConfig config;
  config.batch_size = 4;
  config.epochs = epochs;
  config.peak_lr = lr;
  config.seed = 11;
  return config;
}

}  // namespace

TEST_SUITE_BEGIN("tuning");

TEST_CASE("mlm_loss matches hand values") {
  Eigen::RowVectorXd uniform = Eigen::RowVectorXd::Zero(4);
  CHECK(mlm_loss(uniform, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Eigen::RowVectorXd peaked(4);
  peaked << 10.0, 0.0, 0.0, 0.0;
  const double expected = std::log(1.0 + 3.0 * std::exp(-10.0));  // ~1.362e-4
  CHECK(mlm_loss(peaked, 0) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(mlm_loss(peaked, 0) == doctest::Approx(1.362e-4).epsilon(1e-3));
}

TEST_CASE("mlm_loss equals a naive cross entropy on random logits") {
  Rng rng(515);
  for (int trial = 0; trial < 200; ++trial) {
    const int v = 2 + rng.uniform_int(40);
    Eigen::RowVectorXd logits(v);
    for (int i = 0; i < v; ++i) logits(i) = rng.uniform_real(-12.0, 12.0);
    const int gold = rng.uniform_int(v);
    // independent naive oracle in long double, no max subtraction
    long double total = 0.0L;
    for (int i = 0; i < v; ++i) total += std::exp(static_cast<long double>(logits(i)));
    const double naive = static_cast<double>(
        std::log(total) - static_cast<long double>(logits(gold)));
    CHECK(std::abs(mlm_loss(logits, gold) - naive) < 1e-6);
    CHECK(mlm_loss(logits, gold) >= 0.0);
  }
}

TEST_CASE("mlm_loss rejects bad input") {
  Eigen::RowVectorXd logits = Eigen::RowVectorXd::Zero(4);
  CHECK_THROWS_AS(mlm_loss(logits, 4), ConfigError);
  logits(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(mlm_loss(logits, 0), InvariantError);
}

TEST_CASE("lr schedule endpoints and linearity") {
  LRSchedule schedule{50, 1000, 3e-5};
  CHECK(lr_at(schedule, 0) == 0.0);
  CHECK(lr_at(schedule, 50) == 3e-5);  // exact at the warmup boundary
  CHECK(lr_at(schedule, 1000) == 0.0);
  CHECK_THROWS_AS(lr_at(schedule, -1), ConfigError);
  CHECK_THROWS_AS(lr_at(schedule, 1001), ConfigError);
  LRSchedule no_warmup{0, 10, 1e-3};
  CHECK_THROWS_AS(no_warmup.validate(), ConfigError);
  LRSchedule inverted{20, 10, 1e-3};
  CHECK_THROWS_AS(inverted.validate(), ConfigError);

  // constant second differences inside each phase
  for (int s = 1; s + 1 <= 50; ++s) {
    const double second = (lr_at(schedule, s + 1) - lr_at(schedule, s)) -
                          (lr_at(schedule, s) - lr_at(schedule, s - 1));
    CHECK(std::abs(second) < 1e-12 * schedule.peak_lr);
  }
  for (int s = 51; s + 1 <= 1000; ++s) {
    const double second = (lr_at(schedule, s + 1) - lr_at(schedule, s)) -
                          (lr_at(schedule, s) - lr_at(schedule, s - 1));
    CHECK(std::abs(second) < 1e-12 * schedule.peak_lr);
  }
}

TEST_CASE("train config validation") {
  TrainConfig config;
  CHECK_NOTHROW(config.validate());
  config.trainable_sets.insert(TrainableSet::backbone);
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.freeze_policy = FreezePolicy::full_finetune;
  CHECK_NOTHROW(config.validate());
  config.batch_size = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("zero learning rate is a no-op training run") {
  TaskModel model = toy_task_model(4);
  auto data = toy_dataset(8, 3);
  auto before = std::map<ParamGroup, uint64_t>{};
  for (ParamGroup g : {ParamGroup::word_embeddings, ParamGroup::encoder, ParamGroup::mlm_head,
                       ParamGroup::prompt_table}) {
    before[g] = model.group_hash(g);
  }
  auto result = train(model, data, data, quick_config(1, 0.0));
  for (const auto& [g, h] : before) CHECK(model.group_hash(g) == h);

  auto untrained_preds = zero_shot_apply(model, data);
  int correct = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    if (untrained_preds[i].label == data[i].label) ++correct;
  }
  CHECK(result.history.back().val_accuracy ==
        doctest::Approx(static_cast<double>(correct) / data.size()));
}

TEST_CASE("frozen backbone training changes exactly the trainable sets") {
  TaskModel model = toy_task_model(4);
  auto data = toy_dataset(20, 5);
  const auto word_hash = model.group_hash(ParamGroup::word_embeddings);
  const auto encoder_hash = model.group_hash(ParamGroup::encoder);
  const auto head_hash = model.group_hash(ParamGroup::mlm_head);
  const auto prompt_hash = model.group_hash(ParamGroup::prompt_table);

  train(model, data, data, quick_config(2, 1e-3));

  CHECK(model.group_hash(ParamGroup::word_embeddings) == word_hash);
  CHECK(model.group_hash(ParamGroup::encoder) == encoder_hash);
  CHECK(model.group_hash(ParamGroup::mlm_head) != head_hash);
  CHECK(model.group_hash(ParamGroup::prompt_table) != prompt_hash);
}

TEST_CASE("prompt-only training leaves encoder, head and embeddings untouched") {
  TaskModel model = toy_task_model(4);
  auto data = toy_dataset(12, 6);
  TrainConfig config = quick_config(1, 1e-3);
  config.trainable_sets = {TrainableSet::prompt_table};
  const auto word_hash = model.group_hash(ParamGroup::word_embeddings);
  const auto encoder_hash = model.group_hash(ParamGroup::encoder);
  const auto head_hash = model.group_hash(ParamGroup::mlm_head);
  const auto prompt_hash = model.group_hash(ParamGroup::prompt_table);

  train(model, data, data, config);

  CHECK(model.group_hash(ParamGroup::word_embeddings) == word_hash);
  CHECK(model.group_hash(ParamGroup::encoder) == encoder_hash);
  CHECK(model.group_hash(ParamGroup::mlm_head) == head_hash);
  CHECK(model.group_hash(ParamGroup::prompt_table) != prompt_hash);
}

TEST_CASE("training is deterministic for identical config and seed") {
  auto data = toy_dataset(16, 7);
  TaskModel first_model = toy_task_model(4);
  auto first = train(first_model, data, data, quick_config(3, 2e-3));
  TaskModel second_model = toy_task_model(4);
  auto second = train(second_model, data, data, quick_config(3, 2e-3));

  REQUIRE(first.history.size() == second.history.size());
  for (size_t i = 0; i < first.history.size(); ++i) {
    CHECK(first.history[i].train_loss == second.history[i].train_loss);
    CHECK(first.history[i].val_accuracy == second.history[i].val_accuracy);
    CHECK(first.history[i].lr_last == second.history[i].lr_last);
  }
  CHECK(first.best.epoch == second.best.epoch);
  for (ParamGroup g : {ParamGroup::mlm_head, ParamGroup::prompt_table}) {
    CHECK(first_model.group_hash(g) == second_model.group_hash(g));
  }
}

TEST_CASE("label swap with a swapped verbalizer reproduces the loss trajectory") {
  auto data = toy_dataset(12, 9);
  TaskModel model = toy_task_model(4);
  auto base = train(model, data, data, quick_config(2, 1e-3));

  auto swapped_data = data;
  for (auto& ex : swapped_data) {
    ex.label = ex.label == Label::positive ? Label::negative : Label::positive;
  }
  TaskModel swapped_model = toy_task_model(4);
  swapped_model.verbalizer = Verbalizer::make(
      swapped_model.backbone.tokenizer, {{"yes", Label::negative}, {"no", Label::positive}});
  auto swapped = train(swapped_model, swapped_data, swapped_data, quick_config(2, 1e-3));

  REQUIRE(base.history.size() == swapped.history.size());
  for (size_t i = 0; i < base.history.size(); ++i) {
    CHECK(base.history[i].train_loss == swapped.history[i].train_loss);
  }
}

TEST_CASE("checkpoint selection restores the best epoch and replays exactly") {
  auto data = toy_dataset(16, 13);
  TaskModel model = toy_task_model(6);
  auto result = train(model, data, data, quick_config(4, 5e-3));

  // earliest epoch wins ties
  double best = -1.0;
  int best_epoch = 0;
  for (const auto& r : result.history) {
    if (r.val_accuracy > best) {
      best = r.val_accuracy;
      best_epoch = r.epoch;
    }
  }
  CHECK(result.best.epoch == best_epoch);
  CHECK(result.best.validation_accuracy == best);

  // applying to the validation set reproduces the stored accuracy exactly
  auto preds = zero_shot_apply(model, data);
  int correct = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    if (preds[i].label == data[i].label) ++correct;
  }
  CHECK(static_cast<double>(correct) / data.size() == result.best.validation_accuracy);
}

TEST_CASE("zero_shot_apply never mutates parameters") {
  TaskModel model = toy_task_model(4);
  auto data = toy_dataset(10, 17);
  std::map<ParamGroup, uint64_t> before;
  for (ParamGroup g : {ParamGroup::word_embeddings, ParamGroup::encoder, ParamGroup::mlm_head,
                       ParamGroup::prompt_table}) {
    before[g] = model.group_hash(g);
  }
  auto preds = zero_shot_apply(model, data);
  CHECK(preds.size() == data.size());
  for (const auto& [g, h] : before) CHECK(model.group_hash(g) == h);
}

TEST_CASE("few_shot_continue validates input and honors lr zero") {
  TaskModel model = toy_task_model(4);
  auto data = toy_dataset(8, 19);
  train(model, data, data, quick_config(1, 1e-3));
  CHECK_THROWS_AS(few_shot_continue(model, {}, data, quick_config(1)), ConfigError);

  std::map<ParamGroup, uint64_t> before;
  for (ParamGroup g : {ParamGroup::mlm_head, ParamGroup::prompt_table}) {
    before[g] = model.group_hash(g);
  }
  few_shot_continue(model, toy_dataset(4, 23), data, quick_config(1, 0.0));
  for (const auto& [g, h] : before) CHECK(model.group_hash(g) == h);
}

TEST_CASE("train rejects an empty split") {
  TaskModel model = toy_task_model(2);
  CHECK_THROWS_AS(train(model, {}, {}, quick_config()), ConfigError);
}

TEST_SUITE_END();
