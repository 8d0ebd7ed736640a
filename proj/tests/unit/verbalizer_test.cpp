#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "../support/test_models.hpp"
#include "ptkit/errors.hpp"
#include "ptkit/verbalizer.hpp"

using namespace ptkit;
using namespace ptkit::testsupport;

namespace {

Eigen::RowVectorXd logits_with(const Tokenizer& t, double yes, double no) {
  Eigen::RowVectorXd logits = Eigen::RowVectorXd::Constant(t.vocab_size(), -2.0);
  logits(*t.id_of("yes")) = yes;
  logits(*t.id_of("no")) = no;
  return logits;
}

}  // namespace

TEST_SUITE_BEGIN("verbalizer");

TEST_CASE("construction validates candidates against the tokenizer") {
  Tokenizer t = toy_tokenizer();
  CHECK_NOTHROW(Verbalizer::yes_no(t));
  CHECK_THROWS_AS(Verbalizer::make(t, {{"yes", Label::positive}, {"yes", Label::negative}}),
                  ConfigError);
  CHECK_THROWS_AS(Verbalizer::make(t, {{"yes", Label::positive}, {"zzzmissing", Label::negative}}),
                  ConfigError);
  CHECK_THROWS_AS(Verbalizer::make(t, {{"yes", Label::positive}, {"two words", Label::negative}}),
                  ConfigError);
  CHECK_THROWS_AS(Verbalizer::make(t, {{"yes", Label::positive}, {"no", Label::positive}}),
                  ConfigError);
  CHECK(Verbalizer::yes_no(t).gold_id(Label::positive) == *t.id_of("yes"));
}

TEST_CASE("two-way softmax oracle: e/(e+1)") {
  Tokenizer t = toy_tokenizer();
  Verbalizer v = Verbalizer::yes_no(t);
  auto pred = predict_label(logits_with(t, 2.0, 1.0), v);
  CHECK(pred.label == Label::positive);
  const double expected = std::exp(1.0) / (std::exp(1.0) + 1.0);  // 0.7310585
  CHECK(pred.score == doctest::Approx(expected).epsilon(1e-9));
  CHECK(pred.score == doctest::Approx(0.731).epsilon(1e-3));
}

TEST_CASE("exact ties resolve to the negative label") {
  Tokenizer t = toy_tokenizer();
  Verbalizer v = Verbalizer::yes_no(t);
  auto pred = predict_label(logits_with(t, 0.4, 0.4), v);
  CHECK(pred.label == Label::negative);
  CHECK(pred.score == doctest::Approx(0.5));
}

TEST_CASE("uniform logit shifts change nothing") {
  Tokenizer t = toy_tokenizer();
  Verbalizer v = Verbalizer::yes_no(t);
  Eigen::RowVectorXd base = logits_with(t, 1.3, -0.2);
  auto before = predict_label(base, v);
  Eigen::RowVectorXd shifted = base.array() + 57.0;
  auto after = predict_label(shifted, v);
  CHECK(before.label == after.label);
  CHECK(before.score == doctest::Approx(after.score).epsilon(1e-12));
}

TEST_CASE("property: label tracks the candidate logit gap, score in (0,1)") {
  Tokenizer t = toy_tokenizer();
  Verbalizer v = Verbalizer::yes_no(t);
  Rng rng(314);
  for (int trial = 0; trial < 500; ++trial) {
    const double yes = rng.uniform_real(-6.0, 6.0);
    const double no = rng.uniform_real(-6.0, 6.0);
    auto pred = predict_label(logits_with(t, yes, no), v);
    if (yes > no) {
      CHECK(pred.label == Label::positive);
    } else {
      CHECK(pred.label == Label::negative);
    }
    CHECK(pred.score > 0.0);
    CHECK(pred.score < 1.0);
    // a strictly increasing transform of both candidate logits keeps the label
    auto scaled = predict_label(logits_with(t, 3.0 * yes + 1.0, 3.0 * no + 1.0), v);
    CHECK(scaled.label == pred.label);
    // threshold-0.5 reconstruction matches predict away from exact ties
    const double score = ranking_score(logits_with(t, yes, no), v);
    if (yes != no) {
      CHECK((score > 0.5) == (pred.label == Label::positive));
    }
  }
}

TEST_CASE("ranking_score is the positive probability and hits 0.5 at zero gap") {
  Tokenizer t = toy_tokenizer();
  Verbalizer v = Verbalizer::yes_no(t);
  CHECK(ranking_score(logits_with(t, 1.7, 1.7), v) == 0.5);
  CHECK(ranking_score(logits_with(t, 40.0, -40.0), v) == doctest::Approx(1.0).epsilon(1e-9));
  // monotone in the gap
  double prev = 0.0;
  for (double gap = -4.0; gap <= 4.0; gap += 0.5) {
    double s = ranking_score(logits_with(t, gap, 0.0), v);
    CHECK(s > prev);
    prev = s;
  }
  // the two candidate probabilities sum to one
  auto pred = predict_label(logits_with(t, 0.9, 0.1), v);
  double pos = ranking_score(logits_with(t, 0.9, 0.1), v);
  CHECK(pred.score == doctest::Approx(pos));
  CHECK(pos + ranking_score(logits_with(t, 0.1, 0.9), v) == doctest::Approx(1.0));
}

TEST_CASE("ranking by score equals ranking by logit gap") {
  Tokenizer t = toy_tokenizer();
  Verbalizer v = Verbalizer::yes_no(t);
  Rng rng(2718);
  std::vector<double> gaps(5);
  std::vector<double> scores(5);
  for (int i = 0; i < 5; ++i) {
    const double yes = rng.uniform_real(-3.0, 3.0);
    const double no = rng.uniform_real(-3.0, 3.0);
    gaps[static_cast<size_t>(i)] = yes - no;
    scores[static_cast<size_t>(i)] = ranking_score(logits_with(t, yes, no), v);
  }
  std::vector<size_t> by_gap{0, 1, 2, 3, 4};
  std::vector<size_t> by_score{0, 1, 2, 3, 4};
  std::sort(by_gap.begin(), by_gap.end(),
            [&](size_t a, size_t b) { return gaps[a] > gaps[b]; });
  std::sort(by_score.begin(), by_score.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  CHECK(by_gap == by_score);
}

TEST_SUITE_END();
