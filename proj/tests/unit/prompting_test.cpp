#include <doctest.h>

#include <cmath>

#include "../support/test_models.hpp"
#include "ptkit/errors.hpp"
#include "ptkit/prompting.hpp"

using namespace ptkit;
using namespace ptkit::testsupport;

namespace {

TaskExample example_with_lengths(int len_a, int len_b) {
  TaskExample ex;
  ex.id = "lens";
  ex.task = Task::clone_detection;
  ex.language = "toy";
  for (int i = 0; i < len_a; ++i) ex.text_a += "a ";
  for (int i = 0; i < len_b; ++i) ex.text_b += "b ";
  return ex;
}

int count_kind(const MaskedSequence& seq, SeqItem::Kind kind) {
  int n = 0;
  for (const auto& item : seq.items) {
    if (item.kind == kind) ++n;
  }
  return n;
}

}  // namespace

TEST_SUITE_BEGIN("prompting");

TEST_CASE("allocate_positions covers all placements") {
  auto u6 = allocate_positions(Placement::uniform, 6, 10, 10);
  CHECK(u6.gap1 == 2);
  CHECK(u6.gap2 == 2);
  CHECK(u6.gap3 == 2);

  auto u10 = allocate_positions(Placement::uniform, 10, 10, 10);
  CHECK(u10.gap1 == 4);
  CHECK(u10.gap2 == 3);
  CHECK(u10.gap3 == 3);

  auto h10 = allocate_positions(Placement::head, 10, 10, 10);
  CHECK(h10.gap1 == 10);
  CHECK(h10.gap2 == 0);
  CHECK(h10.gap3 == 0);

  auto m5 = allocate_positions(Placement::middle, 5, 10, 10);
  CHECK(m5.gap2 == 5);
  auto t5 = allocate_positions(Placement::tail, 5, 10, 10);
  CHECK(t5.gap3 == 5);
}

TEST_CASE("allocate_positions is total with even uniform splits") {
  for (int m = 0; m <= 64; ++m) {
    for (Placement p : {Placement::head, Placement::middle, Placement::uniform,
                        Placement::tail}) {
      auto gaps = allocate_positions(p, m, 3, 9);
      CHECK(gaps.gap1 + gaps.gap2 + gaps.gap3 == m);
      if (p == Placement::uniform) {
        const int lo = std::min({gaps.gap1, gaps.gap2, gaps.gap3});
        const int hi = std::max({gaps.gap1, gaps.gap2, gaps.gap3});
        CHECK(hi - lo <= 1);
        CHECK(gaps.gap1 >= gaps.gap2);
        CHECK(gaps.gap2 >= gaps.gap3);
      }
    }
  }
}

TEST_CASE("m=0 renders the plain cls;x1;x2;mask layout") {
  Tokenizer t = toy_tokenizer();
  PromptTemplate tmpl;
  tmpl.prompt_count = 0;
  TaskExample ex = example_with_lengths(3, 2);
  MaskedSequence seq = render(tmpl, ex, t, 64);
  REQUIRE(seq.length() == 1 + 3 + 2 + 1);
  CHECK(seq.items[0].kind == SeqItem::Kind::cls);
  for (int i = 1; i <= 5; ++i) CHECK(seq.items[static_cast<size_t>(i)].kind == SeqItem::Kind::token);
  CHECK(seq.items[6].kind == SeqItem::Kind::mask);
  CHECK(seq.mask_index == 6);
  CHECK(seq.span_a == std::pair<int, int>{1, 4});
  CHECK(seq.span_b == std::pair<int, int>{4, 6});
}

TEST_CASE("m=6 uniform renders the interleaved layout with cls prepended") {
  Tokenizer t = toy_tokenizer();
  PromptTemplate tmpl;
  tmpl.prompt_count = 6;
  tmpl.placement = Placement::uniform;
  TaskExample ex = example_with_lengths(2, 2);
  MaskedSequence seq = render(tmpl, ex, t, 64);
  // [CLS] P1 P2 a a P3 P4 b b P5 P6 [MASK]
  REQUIRE(seq.length() == 12);
  CHECK(seq.items[0].kind == SeqItem::Kind::cls);
  CHECK(seq.items[1] == SeqItem{SeqItem::Kind::prompt, 1});
  CHECK(seq.items[2] == SeqItem{SeqItem::Kind::prompt, 2});
  CHECK(seq.items[3].kind == SeqItem::Kind::token);
  CHECK(seq.items[5] == SeqItem{SeqItem::Kind::prompt, 3});
  CHECK(seq.items[6] == SeqItem{SeqItem::Kind::prompt, 4});
  CHECK(seq.items[9] == SeqItem{SeqItem::Kind::prompt, 5});
  CHECK(seq.items[10] == SeqItem{SeqItem::Kind::prompt, 6});
  CHECK(seq.items[11].kind == SeqItem::Kind::mask);
  CHECK(seq.mask_index == 11);
}

TEST_CASE("tail placement puts prompts after the mask") {
  Tokenizer t = toy_tokenizer();
  PromptTemplate tmpl;
  tmpl.prompt_count = 3;
  tmpl.placement = Placement::tail;
  TaskExample ex = example_with_lengths(2, 2);
  MaskedSequence seq = render(tmpl, ex, t, 64);
  // [CLS] a a b b [MASK] P1 P2 P3
  REQUIRE(seq.length() == 9);
  CHECK(seq.items[5].kind == SeqItem::Kind::mask);
  CHECK(seq.items[6] == SeqItem{SeqItem::Kind::prompt, 1});
  CHECK(seq.items[8] == SeqItem{SeqItem::Kind::prompt, 3});
  CHECK(seq.mask_index == 5);
}

TEST_CASE("property: single mask, exact slot coverage, length bookkeeping") {
  Tokenizer t = toy_tokenizer();
  Rng rng(123);
  for (int trial = 0; trial < 300; ++trial) {
    PromptTemplate tmpl;
    tmpl.prompt_count = rng.uniform_int(kMaxPromptCount + 1);
    tmpl.placement = static_cast<Placement>(rng.uniform_int(4));
    tmpl.include_cls = rng.uniform_int(2) == 1;
    const int len_a = 1 + rng.uniform_int(20);
    const int len_b = 1 + rng.uniform_int(20);
    TaskExample ex = example_with_lengths(len_a, len_b);
    const int budget = (tmpl.include_cls ? 1 : 0) + tmpl.prompt_count + 1 + len_a + len_b;
    MaskedSequence seq = render(tmpl, ex, t, budget);

    CHECK(count_kind(seq, SeqItem::Kind::mask) == 1);
    CHECK(seq.items[static_cast<size_t>(seq.mask_index)].kind == SeqItem::Kind::mask);
    CHECK(seq.length() == budget);
    CHECK(count_kind(seq, SeqItem::Kind::prompt) == tmpl.prompt_count);
    // slots 1..m each exactly once
    std::vector<int> seen(static_cast<size_t>(tmpl.prompt_count) + 1, 0);
    for (const auto& item : seq.items) {
      if (item.kind == SeqItem::Kind::prompt) {
        REQUIRE(item.value >= 1);
        REQUIRE(item.value <= tmpl.prompt_count);
        seen[static_cast<size_t>(item.value)]++;
      }
    }
    for (int s = 1; s <= tmpl.prompt_count; ++s) CHECK(seen[static_cast<size_t>(s)] == 1);
    // segments are disjoint and ordered
    CHECK(seq.span_a.second <= seq.span_b.first);
    CHECK(seq.span_a.second - seq.span_a.first == len_a);
    CHECK(seq.span_b.second - seq.span_b.first == len_b);
  }
}

TEST_CASE("proportional truncation: the longer segment loses more") {
  Tokenizer t = toy_tokenizer();
  PromptTemplate tmpl;
  tmpl.prompt_count = 0;
  tmpl.include_cls = true;
  TaskExample ex = example_with_lengths(200, 100);
  // budget forcing removal of exactly 30 tokens: cls + mask + 270
  MaskedSequence seq = render(tmpl, ex, t, 2 + 270);
  CHECK(seq.span_a.second - seq.span_a.first == 180);  // lost round(30*200/300) = 20
  CHECK(seq.span_b.second - seq.span_b.first == 90);   // lost the remaining 10
  CHECK(seq.length() == 2 + 270);
}

TEST_CASE("truncation never erases a segment and respects the floor") {
  Tokenizer t = toy_tokenizer();
  PromptTemplate tmpl;
  tmpl.prompt_count = 2;
  tmpl.placement = Placement::uniform;
  TaskExample ex = example_with_lengths(40, 1);
  MaskedSequence seq = render(tmpl, ex, t, 2 + 2 + 10);
  CHECK(seq.span_a.second - seq.span_a.first == 9);
  CHECK(seq.span_b.second - seq.span_b.first == 1);

  // budget too small for one token per segment
  CHECK_THROWS_AS(render(tmpl, ex, t, 5), ConfigError);
}

TEST_CASE("render is deterministic and rejects empty segments") {
  Tokenizer t = toy_tokenizer();
  PromptTemplate tmpl;
  tmpl.prompt_count = 5;
  TaskExample ex = toy_pair_example();
  MaskedSequence first = render(tmpl, ex, t, 40);
  MaskedSequence second = render(tmpl, ex, t, 40);
  CHECK(first.items == second.items);
  CHECK(first.mask_index == second.mask_index);

  TaskExample empty = ex;
  empty.text_b = "   ";
  CHECK_THROWS_AS(render(tmpl, empty, t, 40), ConfigError);
}

TEST_CASE("separator occupies one budgeted token slot") {
  Tokenizer t = toy_tokenizer();
  PromptTemplate tmpl;
  tmpl.prompt_count = 0;
  tmpl.separator = ",";
  TaskExample ex = example_with_lengths(2, 2);
  MaskedSequence seq = render(tmpl, ex, t, 64);
  REQUIRE(seq.length() == 1 + 2 + 1 + 2 + 1);
  CHECK(seq.items[3].kind == SeqItem::Kind::token);
  CHECK(seq.items[3].value == *t.id_of(","));
  CHECK(seq.span_a == std::pair<int, int>{1, 3});
  CHECK(seq.span_b == std::pair<int, int>{4, 6});

  tmpl.separator = "not_in_vocab_zzz";
  CHECK_THROWS_AS(render(tmpl, ex, t, 64), ConfigError);
}

TEST_CASE("assemble_embeddings reduces to embed_ids when no prompts") {
  TaskModel model = toy_task_model(0);
  TaskExample ex = toy_pair_example();
  MaskedSequence seq = render(model.tmpl, ex, model.backbone.tokenizer, model.budget);
  Mat assembled = assemble_embeddings(seq, model.backbone, model.prompts);
  std::vector<int> ids;
  ids.push_back(Tokenizer::kCls);
  for (int id : model.backbone.encode_tokens(ex.text_a)) ids.push_back(id);
  for (int id : model.backbone.encode_tokens(ex.text_b)) ids.push_back(id);
  ids.push_back(Tokenizer::kMask);
  Mat direct = model.backbone.embed_ids(ids);
  CHECK((assembled - direct).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("changing one prompt vector changes exactly one assembled row") {
  TaskModel model = toy_task_model(4);
  TaskExample ex = toy_pair_example();
  MaskedSequence seq = render(model.tmpl, ex, model.backbone.tokenizer, model.budget);
  Mat before = assemble_embeddings(seq, model.backbone, model.prompts);
  model.prompts.vectors.value.row(2).setConstant(0.5);  // slot index 3
  Mat after = assemble_embeddings(seq, model.backbone, model.prompts);
  int changed = 0;
  for (int r = 0; r < before.rows(); ++r) {
    if ((before.row(r) - after.row(r)).cwiseAbs().maxCoeff() > 0.0) ++changed;
  }
  CHECK(changed == 1);
}

TEST_CASE("prompt vectors receive nonzero gradient while backbone frozen") {
  TaskModel model = toy_task_model(4);
  TaskExample ex = toy_pair_example();
  MaskedSequence seq = render(model.tmpl, ex, model.backbone.tokenizer, model.budget);
  const int gold = model.verbalizer.gold_id(Label::positive);

  zero_grads(model.all_params());
  model.example_loss_and_grad(seq, gold, 1.0);
  CHECK(model.prompts.vectors.grad.cwiseAbs().maxCoeff() > 0.0);

  // finite-difference probe on one prompt coordinate
  auto result = gradcheck_coordinate(model, seq, gold, model.prompts.vectors, 1, 3);
  CHECK(result.relative_error < 1e-3);
  CHECK(result.analytic != 0.0);
}

TEST_CASE("prompt table init schemes") {
  Backbone b = toy_backbone();
  PromptTable random = PromptTable::random_init(8, b.hidden_dim(), 44);
  CHECK(random.prompt_count() == 8);
  PromptTable again = PromptTable::random_init(8, b.hidden_dim(), 44);
  CHECK((random.vectors.value - again.vectors.value).cwiseAbs().maxCoeff() == 0.0);

  PromptTable from_words = PromptTable::from_words({"yes", "no"}, b);
  CHECK((from_words.vectors.value.row(0).transpose() -
         b.word_embeddings.value.row(*b.tokenizer.id_of("yes")).transpose())
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK_THROWS_AS(PromptTable::from_words({"zzzmissing"}, b), ConfigError);

  MaskedSequence seq;
  seq.items = {{SeqItem::Kind::prompt, 9}};
  seq.mask_index = 0;
  CHECK_THROWS_AS(assemble_embeddings(seq, b, from_words), ConfigError);
}

TEST_SUITE_END();
