#include "ptkit/dialect.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <variant>

#include "ptkit/errors.hpp"
#include "ptkit/rng.hpp"

namespace ptkit {

namespace {

enum class Kw {
  func_,
  end_,
  let_,
  while_,
  do_,
  if_,
  then_,
  else_,
  return_,
  print_,
};

constexpr int kNumKeywords = 10;

const std::array<const char*, kNumKeywords>& keyword_words() {
  static const std::array<const char*, kNumKeywords> words = {
      "func", "end", "let", "while", "do", "if", "then", "else", "return", "print"};
  return words;
}

constexpr int kNumFamilies = 16;
constexpr int kWordsPerFamily = 5;

// Signature vocabulary: what makes two programs of one family functional
// siblings. Globally unique, disjoint from keywords in both dialects.
const std::array<std::array<const char*, kWordsPerFamily>, kNumFamilies>& family_words() {
  static const std::array<std::array<const char*, kWordsPerFamily>, kNumFamilies> words = {{
      {"total", "accum", "running", "fold", "gather"},
      {"sortkey", "swap", "pivot", "rank", "order"},
      {"median", "sample", "spread", "center", "tally"},
      {"cipher", "rotate", "scramble", "unlock", "seal"},
      {"queue", "enqueue", "dequeue", "front", "drain"},
      {"ledger", "credit", "debit", "settle", "audit"},
      {"matrix", "row", "column", "trace", "scaleby"},
      {"stream", "chunk", "buffer", "flush", "pump"},
      {"graph", "visit", "edge", "frontier", "marked"},
      {"lexer", "scan", "cursor", "glyph", "probe"},
      {"cache", "evict", "lookup", "stamp", "expire"},
      {"packet", "route", "hop", "relay", "beacon"},
      {"parser", "nest", "branch", "reduce", "attach"},
      {"timer", "tick", "elapse", "pause", "resume"},
      {"vault", "deposit", "withdraw", "pledge", "redeem"},
      {"signal", "filter", "damp", "blend", "amplify"},
  }};
  return words;
}

const std::vector<std::string>& variable_pool() {
  static const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "g", "h",
                                                "i", "j", "k", "m", "n", "p", "q",
                                                "r", "s", "t", "u", "v", "w"};
  return pool;
}

const std::vector<std::string>& filler_ops() {
  static const std::vector<std::string> ops = {"check", "touch", "note"};
  return ops;
}

// Abstract token: keyword role (rendered per dialect) or a fixed word.
using AbsTok = std::variant<Kw, std::string>;
using Stmt = std::vector<AbsTok>;

struct AbstractProgram {
  std::vector<Stmt> statements;
};

class StmtBuilder {
 public:
  StmtBuilder& kw(Kw k) {
    stmt_.emplace_back(k);
    return *this;
  }
  StmtBuilder& w(const std::string& word) {
    stmt_.emplace_back(word);
    return *this;
  }
  Stmt take() { return std::move(stmt_); }

 private:
  Stmt stmt_;
};

struct InstanceContext {
  std::vector<std::string> vars;  // distinct variable names for this instance
  std::array<std::string, kWordsPerFamily> sig;
  std::string name;
  Rng* rng = nullptr;

  const std::string& v(size_t i) const { return vars[i % vars.size()]; }
  std::string digit() const { return std::string(1, static_cast<char>('0' + rng->uniform_int(10))); }
  const std::string& filler_op() const {
    return filler_ops()[static_cast<size_t>(rng->uniform_int(
        static_cast<int>(filler_ops().size())))];
  }
};

Stmt filler_statement(InstanceContext& c) {
  return StmtBuilder()
      .w(c.filler_op())
      .w("(")
      .w(c.v(static_cast<size_t>(c.rng->uniform_int(4))))
      .w(")")
      .take();
}

// Four statement skeletons. A family keeps one skeleton for all its
// instances; the family identity lives in the signature words, the
// instance identity in variable names, literals and statement order.

std::vector<Stmt> archetype_accumulate(InstanceContext& c) {
  std::vector<Stmt> body;
  body.push_back(StmtBuilder().kw(Kw::let_).w(c.v(2)).w("=").w(c.digit()).take());
  body.push_back(StmtBuilder()
                     .kw(Kw::let_)
                     .w(c.v(3))
                     .w("=")
                     .w(c.sig[0])
                     .w("(")
                     .w(c.v(0))
                     .w(",")
                     .w(c.digit())
                     .w(")")
                     .take());
  body.push_back(StmtBuilder().kw(Kw::while_).w(c.v(2)).w("<").w(c.v(1)).kw(Kw::do_).take());
  body.push_back(StmtBuilder()
                     .w(c.v(2))
                     .w("=")
                     .w(c.v(2))
                     .w("+")
                     .w(c.sig[1])
                     .w("(")
                     .w(c.v(3))
                     .w(",")
                     .w(c.v(0))
                     .w(")")
                     .take());
  body.push_back(StmtBuilder().w(c.sig[2]).w("(").w(c.v(2)).w(")").take());
  body.push_back(StmtBuilder().kw(Kw::end_).take());
  body.push_back(StmtBuilder().kw(Kw::if_).w(c.v(2)).w(">").w(c.digit()).kw(Kw::then_).take());
  body.push_back(
      StmtBuilder().kw(Kw::return_).w(c.sig[3]).w("(").w(c.v(2)).w(")").take());
  body.push_back(StmtBuilder().kw(Kw::else_).take());
  body.push_back(
      StmtBuilder().kw(Kw::return_).w(c.sig[4]).w("(").w(c.v(3)).w(")").take());
  body.push_back(StmtBuilder().kw(Kw::end_).take());
  return body;
}

std::vector<Stmt> archetype_chain(InstanceContext& c) {
  std::vector<Stmt> body;
  body.push_back(StmtBuilder()
                     .kw(Kw::let_)
                     .w(c.v(1))
                     .w("=")
                     .w(c.sig[0])
                     .w("(")
                     .w(c.v(0))
                     .w(")")
                     .take());
  body.push_back(StmtBuilder()
                     .kw(Kw::let_)
                     .w(c.v(2))
                     .w("=")
                     .w(c.sig[1])
                     .w("(")
                     .w(c.v(1))
                     .w(",")
                     .w(c.digit())
                     .w(")")
                     .take());
  body.push_back(StmtBuilder().kw(Kw::if_).w(c.v(1)).w("<").w(c.v(2)).kw(Kw::then_).take());
  body.push_back(StmtBuilder()
                     .w(c.v(1))
                     .w("=")
                     .w(c.sig[2])
                     .w("(")
                     .w(c.v(1))
                     .w(",")
                     .w(c.digit())
                     .w(")")
                     .take());
  body.push_back(StmtBuilder().kw(Kw::else_).take());
  body.push_back(StmtBuilder()
                     .w(c.v(2))
                     .w("=")
                     .w(c.sig[3])
                     .w("(")
                     .w(c.v(2))
                     .w(",")
                     .w(c.v(1))
                     .w(")")
                     .take());
  body.push_back(StmtBuilder().kw(Kw::end_).take());
  body.push_back(StmtBuilder().kw(Kw::while_).w(c.v(1)).w(">").w(c.digit()).kw(Kw::do_).take());
  body.push_back(StmtBuilder().w(c.v(1)).w("=").w(c.v(1)).w("-").w(c.digit()).take());
  body.push_back(StmtBuilder().kw(Kw::end_).take());
  body.push_back(StmtBuilder()
                     .kw(Kw::return_)
                     .w(c.sig[4])
                     .w("(")
                     .w(c.v(1))
                     .w(",")
                     .w(c.v(2))
                     .w(")")
                     .take());
  return body;
}

std::vector<Stmt> archetype_scan(InstanceContext& c) {
  std::vector<Stmt> body;
  body.push_back(StmtBuilder().kw(Kw::let_).w(c.v(3)).w("=").w(c.digit()).take());
  body.push_back(StmtBuilder().kw(Kw::while_).w(c.v(3)).w("<").w(c.v(0)).kw(Kw::do_).take());
  body.push_back(StmtBuilder()
                     .kw(Kw::if_)
                     .w(c.sig[0])
                     .w("(")
                     .w(c.v(3))
                     .w(")")
                     .w(">")
                     .w(c.digit())
                     .kw(Kw::then_)
                     .take());
  body.push_back(StmtBuilder()
                     .w(c.v(1))
                     .w("=")
                     .w(c.sig[1])
                     .w("(")
                     .w(c.v(1))
                     .w(",")
                     .w(c.v(3))
                     .w(")")
                     .take());
  body.push_back(StmtBuilder().kw(Kw::else_).take());
  body.push_back(StmtBuilder()
                     .w(c.v(2))
                     .w("=")
                     .w(c.sig[2])
                     .w("(")
                     .w(c.v(2))
                     .w(",")
                     .w(c.digit())
                     .w(")")
                     .take());
  body.push_back(StmtBuilder().kw(Kw::end_).take());
  body.push_back(StmtBuilder().w(c.v(3)).w("=").w(c.v(3)).w("+").w(c.digit()).take());
  body.push_back(StmtBuilder().kw(Kw::end_).take());
  body.push_back(StmtBuilder()
                     .kw(Kw::print_)
                     .w("(")
                     .w(c.sig[3])
                     .w("(")
                     .w(c.v(1))
                     .w(",")
                     .w(c.v(2))
                     .w(")")
                     .w(")")
                     .take());
  body.push_back(
      StmtBuilder().kw(Kw::return_).w(c.sig[4]).w("(").w(c.v(1)).w(")").take());
  return body;
}

std::vector<Stmt> archetype_guarded(InstanceContext& c) {
  std::vector<Stmt> body;
  body.push_back(StmtBuilder()
                     .kw(Kw::let_)
                     .w(c.v(2))
                     .w("=")
                     .w(c.sig[0])
                     .w("(")
                     .w(c.v(0))
                     .w(",")
                     .w(c.v(1))
                     .w(")")
                     .take());
  body.push_back(StmtBuilder()
                     .kw(Kw::let_)
                     .w(c.v(3))
                     .w("=")
                     .w(c.sig[1])
                     .w("(")
                     .w(c.v(2))
                     .w(")")
                     .take());
  body.push_back(StmtBuilder().kw(Kw::let_).w(c.v(4)).w("=").w(c.digit()).take());
  body.push_back(StmtBuilder().kw(Kw::if_).w(c.v(2)).w("<").w(c.v(3)).kw(Kw::then_).take());
  body.push_back(StmtBuilder()
                     .w(c.v(4))
                     .w("=")
                     .w(c.sig[2])
                     .w("(")
                     .w(c.v(2))
                     .w(",")
                     .w(c.digit())
                     .w(")")
                     .take());
  body.push_back(StmtBuilder().kw(Kw::end_).take());
  body.push_back(StmtBuilder().kw(Kw::while_).w(c.v(4)).w(">").w(c.digit()).kw(Kw::do_).take());
  body.push_back(StmtBuilder()
                     .w(c.v(4))
                     .w("=")
                     .w(c.v(4))
                     .w("-")
                     .w(c.sig[3])
                     .w("(")
                     .w(c.v(3))
                     .w(")")
                     .take());
  body.push_back(StmtBuilder().kw(Kw::end_).take());
  body.push_back(StmtBuilder()
                     .kw(Kw::return_)
                     .w(c.sig[4])
                     .w("(")
                     .w(c.v(4))
                     .w(",")
                     .w(c.v(2))
                     .w(")")
                     .take());
  return body;
}

AbstractProgram build_function(int family, int ordinal, Rng& rng) {
  InstanceContext c;
  c.rng = &rng;
  const auto& words = family_words()[static_cast<size_t>(family)];
  for (int i = 0; i < kWordsPerFamily; ++i) c.sig[static_cast<size_t>(i)] = words[static_cast<size_t>(i)];
  c.name = std::string(words[0]) + std::to_string(ordinal);

  auto var_idx = rng.sample_indices(variable_pool().size(), 5);
  for (size_t idx : var_idx) c.vars.push_back(variable_pool()[idx]);

  int arity = 2 + rng.uniform_int(2);  // 2..3 parameters
  Stmt header = StmtBuilder().kw(Kw::func_).w(c.name).w("(").take();
  for (int i = 0; i < arity; ++i) {
    if (i > 0) header.emplace_back(std::string(","));
    header.emplace_back(c.vars[static_cast<size_t>(i) % c.vars.size()]);
  }
  header.emplace_back(std::string(")"));

  std::vector<Stmt> body;
  switch (family % 4) {
    case 0: body = archetype_accumulate(c); break;
    case 1: body = archetype_chain(c); break;
    case 2: body = archetype_scan(c); break;
    default: body = archetype_guarded(c); break;
  }

  // Type-3 variation: shuffle the leading declaration run and sprinkle
  // 0..2 filler calls in front of the first block statement.
  size_t decl_end = 0;
  while (decl_end < body.size() && std::holds_alternative<Kw>(body[decl_end][0]) &&
         std::get<Kw>(body[decl_end][0]) == Kw::let_) {
    ++decl_end;
  }
  int fillers = rng.uniform_int(3);
  for (int i = 0; i < fillers; ++i) body.insert(body.begin() + static_cast<long>(decl_end), filler_statement(c));
  std::vector<Stmt> decls(body.begin(), body.begin() + static_cast<long>(decl_end) + fillers);
  rng.shuffle(decls);
  std::copy(decls.begin(), decls.end(), body.begin());

  AbstractProgram program;
  program.statements.push_back(std::move(header));
  for (auto& stmt : body) program.statements.push_back(std::move(stmt));
  program.statements.push_back(StmtBuilder().kw(Kw::end_).take());
  return program;
}

std::string render(const std::vector<AbstractProgram>& functions,
                   const std::array<std::string, kNumKeywords>& keyword_render) {
  std::string out;
  for (const auto& fn : functions) {
    for (const auto& stmt : fn.statements) {
      std::string line;
      for (const auto& tok : stmt) {
        if (!line.empty()) line += ' ';
        if (std::holds_alternative<Kw>(tok)) {
          line += keyword_render[static_cast<size_t>(std::get<Kw>(tok))];
        } else {
          line += std::get<std::string>(tok);
        }
      }
      out += line;
      out += '\n';
    }
  }
  return out;
}

std::string make_description(int family) {
  const auto& w = family_words()[static_cast<size_t>(family)];
  return std::string("routine that applies ") + w[1] + " and " + w[2] + " to build a " + w[0] +
         " result over " + w[3] + " and " + w[4] + " steps";
}

void validate_spec(const DialectSpec& spec, const std::map<std::string, std::string>& kw_map) {
  if (spec.program_count < 1) throw ConfigError("dialect spec: program_count must be >= 1");
  if (spec.functions_per_program < 1) {
    throw ConfigError("dialect spec: functions_per_program must be >= 1");
  }
  if (spec.language_a == spec.language_b) {
    throw ConfigError("dialect spec: language tags must differ");
  }
  std::set<std::string> known(dialect_keywords().begin(), dialect_keywords().end());
  std::set<std::string> targets;
  for (const auto& [from, to] : kw_map) {
    if (!known.count(from)) {
      throw ConfigError("dialect spec: unknown keyword in map: " + from);
    }
    if (from == to) {
      throw ConfigError("dialect spec: keyword maps to itself: " + from);
    }
    if (!targets.insert(to).second) {
      throw ConfigError("dialect spec: keyword_map is not injective at: " + to);
    }
  }
}

}  // namespace

std::map<std::string, std::string> default_keyword_map() {
  return {
      {"func", "fn"},    {"end", "close"},       {"let", "var"},
      {"while", "loop"}, {"do", "run"},          {"if", "when"},
      {"then", "so"},    {"else", "otherwise"},  {"return", "give"},
      {"print", "emit"},
  };
}

const std::vector<std::string>& dialect_keywords() {
  static const std::vector<std::string> words(keyword_words().begin(), keyword_words().end());
  return words;
}

DialectCorpus generate_dialect_corpus(const DialectSpec& spec) {
  const auto kw_map = spec.keyword_map.empty() ? default_keyword_map() : spec.keyword_map;
  validate_spec(spec, kw_map);

  std::array<std::string, kNumKeywords> render_a;
  std::array<std::string, kNumKeywords> render_b;
  for (int i = 0; i < kNumKeywords; ++i) {
    const std::string word = keyword_words()[static_cast<size_t>(i)];
    render_a[static_cast<size_t>(i)] = word;
    auto it = kw_map.find(word);
    render_b[static_cast<size_t>(i)] = it == kw_map.end() ? word : it->second;
  }

  DialectCorpus out;
  out.family_descriptions.reserve(kNumFamilies);
  for (int f = 0; f < kNumFamilies; ++f) out.family_descriptions.push_back(make_description(f));

  std::array<int, kNumFamilies> next_ordinal{};
  for (int i = 0; i < spec.program_count; ++i) {
    int family = i % kNumFamilies;
    Rng rng(mix_seed(spec.grammar_seed, static_cast<uint64_t>(i)));
    std::vector<AbstractProgram> functions;
    for (int f = 0; f < spec.functions_per_program; ++f) {
      int ordinal = next_ordinal[static_cast<size_t>(family)]++;
      functions.push_back(build_function(family, ordinal, rng));
    }
    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "f%02d-i%05d", family, i);

    CodeSnippet a;
    a.id = std::string("A-") + id_buf;
    a.language = spec.language_a;
    a.text = render(functions, render_a);
    out.corpus_a.push_back(std::move(a));

    CodeSnippet b;
    b.id = std::string("B-") + id_buf;
    b.language = spec.language_b;
    b.text = render(functions, render_b);
    out.corpus_b.push_back(std::move(b));

    out.family_of.push_back(family);
  }

  // Positive clone pairs over the whole corpus, capped per family. Callers
  // that need partition-disjoint programs build their own pairs over
  // program ranges instead.
  int per_family = std::max(1, spec.program_count / kNumFamilies);
  auto build_pairs = [&](const std::vector<CodeSnippet>& corpus) {
    std::vector<std::pair<std::string, CodeSnippet>> submissions;
    submissions.reserve(corpus.size());
    for (size_t i = 0; i < corpus.size(); ++i) {
      submissions.emplace_back("fam" + std::to_string(out.family_of[i]), corpus[i]);
    }
    auto pairs = build_clone_pairs(submissions, 2 * per_family, spec.grammar_seed);
    for (auto& ex : pairs) ex.origin = Origin::synthetic;
    return pairs;
  };
  out.clone_pairs_a = build_pairs(out.corpus_a);
  out.clone_pairs_b = build_pairs(out.corpus_b);
  return out;
}

}  // namespace ptkit
