#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "../support/test_models.hpp"
#include "ptkit/checkpoint.hpp"
#include "ptkit/errors.hpp"

using namespace ptkit;
using namespace ptkit::testsupport;

TEST_SUITE_BEGIN("backbone");

TEST_CASE("encode_tokens contract") {
  Backbone b = toy_backbone();
  CHECK(b.encode_tokens("").empty());
  auto ids = b.encode_tokens("zzz_not_in_vocab");
  REQUIRE(ids.size() == 1);
  CHECK(ids[0] == Tokenizer::kUnk);
  for (int id : b.encode_tokens("let total = fold")) CHECK(id < b.vocab_size());
}

TEST_CASE("embed_ids equals direct table indexing") {
  Backbone b = toy_backbone();
  CHECK(b.embed_ids({}).rows() == 0);
  Mat two = b.embed_ids({0, 0});
  CHECK((two.row(0) - two.row(1)).cwiseAbs().maxCoeff() == 0.0);
  auto ids = b.encode_tokens("let total = fold");
  Mat rows = b.embed_ids(ids);
  for (size_t i = 0; i < ids.size(); ++i) {
    CHECK((rows.row(static_cast<Eigen::Index>(i)) -
           b.word_embeddings.value.row(ids[i])).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(b.embed_ids({b.vocab_size()}), ConfigError);
}

TEST_CASE("mlm_logits has vocab width and normalized softmax") {
  Backbone b = toy_backbone();
  Eigen::RowVectorXd h = Eigen::RowVectorXd::LinSpaced(b.hidden_dim(), -0.3, 0.4);
  Eigen::RowVectorXd logits = b.mlm_logits(h);
  REQUIRE(logits.size() == b.vocab_size());
  const double max = logits.maxCoeff();
  Eigen::RowVectorXd p = (logits.array() - max).exp();
  p /= p.sum();
  CHECK(std::abs(p.sum() - 1.0) < 1e-6);
  Eigen::RowVectorXd wrong = Eigen::RowVectorXd::Zero(b.hidden_dim() + 1);
  CHECK_THROWS_AS(b.mlm_logits(wrong), ConfigError);
}

TEST_CASE("parameter count follows the config") {
  Backbone b = toy_backbone();
  const int64_t d = b.hidden_dim();
  const int64_t v = b.vocab_size();
  const int64_t expected = v * d                               // word embeddings
                           + Encoder::parameter_count(b.config)
                           + (d * d + d) + (d * v + v);        // mlm head
  CHECK(b.parameter_count() == expected);
}

TEST_CASE("pretrain_mlm: steps=0 keeps initialization") {
  std::vector<CodeSnippet> corpus;
  int n = 0;
  for (const auto& text : toy_sentences()) {
    corpus.push_back({"s" + std::to_string(n++), "toy", text, {}});
  }
  PretrainOptions options;
  options.steps = 0;
  options.seed = 9;
  auto result = pretrain_mlm(corpus, tiny_config(), toy_tokenizer(), options);
  Backbone fresh = Backbone::create(tiny_config(), toy_tokenizer());
  for (ParamGroup g : {ParamGroup::word_embeddings, ParamGroup::encoder, ParamGroup::mlm_head}) {
    CHECK(hash_group(result.backbone.params(), g) == hash_group(fresh.params(), g));
  }
  CHECK(result.final_heldout_loss == result.initial_heldout_loss);
}

TEST_CASE("pretrain_mlm reduces held-out loss and is seed-deterministic") {
  std::vector<CodeSnippet> corpus;
  Rng rng(4);
  auto sentences = toy_sentences();
  for (int i = 0; i < 50; ++i) {
    corpus.push_back({"s" + std::to_string(i), "toy",
                      sentences[static_cast<size_t>(i) % sentences.size()], {}});
  }
  PretrainOptions options;
  options.steps = 60;
  options.seed = 21;
  options.batch_size = 8;
  auto first = pretrain_mlm(corpus, tiny_config(), toy_tokenizer(), options);
  CHECK(first.final_heldout_loss < first.initial_heldout_loss);

  auto second = pretrain_mlm(corpus, tiny_config(), toy_tokenizer(), options);
  CHECK(first.final_heldout_loss == second.final_heldout_loss);
  for (ParamGroup g : {ParamGroup::word_embeddings, ParamGroup::encoder, ParamGroup::mlm_head}) {
    CHECK(hash_group(first.backbone.params(), g) == hash_group(second.backbone.params(), g));
  }
}

TEST_CASE("pretrain_mlm validates inputs") {
  PretrainOptions options;
  CHECK_THROWS_AS(pretrain_mlm({}, tiny_config(), toy_tokenizer(), options), ConfigError);
  std::vector<CodeSnippet> corpus = {{"s", "toy", "let a = 1", {}}};
  options.mask_rate = 1.5;
  CHECK_THROWS_AS(pretrain_mlm(corpus, tiny_config(), toy_tokenizer(), options), ConfigError);
}

TEST_CASE("a memorized corpus recovers a masked keyword as argmax") {
  // overfit-one-batch oracle: heavy training on five fixed sentences
  std::vector<CodeSnippet> corpus;
  int n = 0;
  for (const auto& text : toy_sentences()) {
    corpus.push_back({"m" + std::to_string(n++), "toy", text, {}});
  }
  PretrainOptions options;
  options.steps = 260;
  options.seed = 31;
  options.batch_size = 5;
  options.learning_rate = 3e-3;
  options.heldout_fraction = 0.2;
  auto result = pretrain_mlm(corpus, tiny_config(), toy_tokenizer(), options);
  const Backbone& b = result.backbone;

  // mask the keyword "fold" inside the first sentence
  auto ids = b.encode_tokens("let total = fold ( a , b )");
  std::vector<int> input;
  input.push_back(Tokenizer::kCls);
  input.insert(input.end(), ids.begin(), ids.end());
  const int fold_id = *b.tokenizer.id_of("fold");
  int fold_pos = -1;
  for (size_t i = 0; i < input.size(); ++i) {
    if (input[i] == fold_id) fold_pos = static_cast<int>(i);
  }
  REQUIRE(fold_pos > 0);
  input[static_cast<size_t>(fold_pos)] = Tokenizer::kMask;

  Mat hidden = b.forward_hidden(b.embed_ids(input));
  Eigen::RowVectorXd logits = b.mlm_logits(hidden.row(fold_pos));
  Eigen::Index argmax = 0;
  logits.maxCoeff(&argmax);
  CHECK(static_cast<int>(argmax) == fold_id);
}

TEST_CASE("checkpoint save/load round-trips parameters bit-exactly") {
  Backbone b = toy_backbone(123);
  auto path = (std::filesystem::temp_directory_path() / "ptkit_ckpt_test.ptk").string();
  save_backbone(path, b);
  Backbone loaded = load_backbone(path);
  CHECK(loaded.tokenizer.vocabulary() == b.tokenizer.vocabulary());
  CHECK(loaded.config.hidden_dim == b.config.hidden_dim);
  for (ParamGroup g : {ParamGroup::word_embeddings, ParamGroup::encoder, ParamGroup::mlm_head}) {
    CHECK(hash_group(loaded.params(), g) == hash_group(b.params(), g));
  }

  // tuned archive keeps prompts, template, verbalizer and budget
  TaskModel model = toy_task_model(3);
  auto model_path = (std::filesystem::temp_directory_path() / "ptkit_model_test.ptk").string();
  save_model(model_path, archive_from_task_model(model));
  TaskModel restored = task_model_from_archive(load_model(model_path));
  CHECK(restored.tmpl.prompt_count == 3);
  CHECK(restored.budget == model.budget);
  CHECK(hash_group(restored.all_params(), ParamGroup::prompt_table) ==
        hash_group(model.all_params(), ParamGroup::prompt_table));

  CHECK_THROWS_AS(load_model("/nonexistent/ptkit.ptk"), IoError);
  std::remove(path.c_str());
  std::remove(model_path.c_str());
}

TEST_SUITE_END();
