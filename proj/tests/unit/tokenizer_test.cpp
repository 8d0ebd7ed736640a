#include <doctest.h>

#include "ptkit/errors.hpp"
#include "ptkit/tokenizer.hpp"

using namespace ptkit;

TEST_SUITE_BEGIN("tokenizer");

TEST_CASE("splits words and punctuation") {
  auto toks = Tokenizer::tokenize("func total7 ( a , b )\n  let x = 3");
  CHECK(toks == std::vector<std::string>{"func", "total7", "(", "a", ",", "b", ")", "let", "x",
                                         "=", "3"});
  CHECK(Tokenizer::tokenize("").empty());
  CHECK(Tokenizer::tokenize("   \n\t ").empty());
  CHECK(Tokenizer::count_tokens("a+b") == 3);
}

TEST_CASE("bracketed special names never collide with raw text") {
  auto toks = Tokenizer::tokenize("[CLS]");
  CHECK(toks == std::vector<std::string>{"[", "CLS", "]"});
}

TEST_CASE("specials at fixed distinct indices") {
  Tokenizer t = Tokenizer::build({"if x"});
  CHECK(Tokenizer::kCls == 0);
  CHECK(Tokenizer::kMask == 1);
  CHECK(Tokenizer::kPad == 2);
  CHECK(Tokenizer::kUnk == 3);
  CHECK(t.token_of(Tokenizer::kCls) == "[CLS]");
  CHECK(t.token_of(Tokenizer::kMask) == "[MASK]");
  CHECK(t.vocab_size() == 4 + 2);
}

TEST_CASE("encode maps unknown words to [UNK]") {
  Tokenizer t = Tokenizer::build({"if x"});
  CHECK(t.encode("").empty());
  auto ids = t.encode("if y");
  REQUIRE(ids.size() == 2);
  CHECK(ids[0] == *t.id_of("if"));
  CHECK(ids[1] == Tokenizer::kUnk);
  for (int id : t.encode("if x if x")) CHECK(id < t.vocab_size());
}

TEST_CASE("encode/decode round-trips in-vocabulary text") {
  Tokenizer t = Tokenizer::build({"if x else y"});
  CHECK(t.decode(t.encode("if x")) == "if x");
  // token-level identity: re-encoding the decoded string gives the same ids
  auto ids = t.encode("x else if");
  CHECK(t.encode(t.decode(ids)) == ids);
}

TEST_CASE("extra tokens enter the vocabulary") {
  Tokenizer t = Tokenizer::build({"if x"}, {"yes", "no"});
  CHECK(t.id_of("yes").has_value());
  CHECK(t.id_of("no").has_value());
}

TEST_CASE("vocabulary restore validates specials") {
  CHECK_THROWS_AS(Tokenizer::from_vocabulary({"[CLS]", "[MASK]"}), ConfigError);
  CHECK_THROWS_AS(Tokenizer::from_vocabulary({"a", "b", "c", "d", "e"}), ConfigError);
  Tokenizer t = Tokenizer::build({"alpha beta"});
  Tokenizer restored = Tokenizer::from_vocabulary(t.vocabulary());
  CHECK(restored.encode("alpha beta") == t.encode("alpha beta"));
}

TEST_SUITE_END();
