#include "ptkit/verbalizer.hpp"

#include <cmath>
#include <set>

#include "ptkit/errors.hpp"

namespace ptkit {

Verbalizer Verbalizer::make(const Tokenizer& tokenizer,
                            const std::vector<std::pair<std::string, Label>>& candidates) {
  if (candidates.empty()) throw ConfigError("verbalizer: no candidates");
  Verbalizer v;
  std::set<std::string> words;
  std::set<int> ids;
  bool has_positive = false;
  bool has_negative = false;
  for (const auto& [word, label] : candidates) {
    if (!words.insert(word).second) {
      throw ConfigError("verbalizer: duplicate candidate word: " + word);
    }
    auto tokens = Tokenizer::tokenize(word);
    if (tokens.size() != 1) {
      throw ConfigError("verbalizer: candidate must be a single token: " + word);
    }
    auto id = tokenizer.id_of(word);
    if (!id) {
      throw ConfigError("verbalizer: candidate word missing from vocabulary: " + word);
    }
    if (!ids.insert(*id).second) {
      throw ConfigError("verbalizer: candidate id collision for: " + word);
    }
    v.candidates_.push_back({word, label, *id});
    (label == Label::positive ? has_positive : has_negative) = true;
  }
  if (!has_positive || !has_negative) {
    throw ConfigError("verbalizer: every label needs at least one candidate word");
  }
  return v;
}

Verbalizer Verbalizer::yes_no(const Tokenizer& tokenizer) {
  return make(tokenizer, {{"yes", Label::positive}, {"no", Label::negative}});
}

int Verbalizer::gold_id(Label label) const {
  for (const auto& c : candidates_) {
    if (c.label == label) return c.token_id;
  }
  throw ConfigError("verbalizer: no candidate for label " + to_string(label));
}

std::vector<std::pair<std::string, std::string>> Verbalizer::serialized() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(candidates_.size());
  for (const auto& c : candidates_) out.emplace_back(c.word, to_string(c.label));
  return out;
}

namespace {

std::vector<double> candidate_probabilities(const Eigen::RowVectorXd& logits,
                                            const Verbalizer& verbalizer) {
  const auto& cands = verbalizer.candidates();
  std::vector<double> probs(cands.size());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (const auto& c : cands) max_logit = std::max(max_logit, logits(c.token_id));
  double total = 0.0;
  for (size_t i = 0; i < cands.size(); ++i) {
    probs[i] = std::exp(logits(cands[i].token_id) - max_logit);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return probs;
}

}  // namespace

Prediction predict_label(const Eigen::RowVectorXd& logits, const Verbalizer& verbalizer) {
  const auto& cands = verbalizer.candidates();
  size_t best = 0;
  for (size_t i = 1; i < cands.size(); ++i) {
    const double li = logits(cands[i].token_id);
    const double lb = logits(cands[best].token_id);
    if (li > lb) {
      best = i;
    } else if (li == lb && cands[best].label == Label::positive &&
               cands[i].label == Label::negative) {
      best = i;  // ties break toward the negative label
    }
  }
  auto probs = candidate_probabilities(logits, verbalizer);
  return {cands[best].label, probs[best]};
}

double ranking_score(const Eigen::RowVectorXd& logits, const Verbalizer& verbalizer) {
  auto probs = candidate_probabilities(logits, verbalizer);
  const auto& cands = verbalizer.candidates();
  double positive_mass = 0.0;
  for (size_t i = 0; i < cands.size(); ++i) {
    if (cands[i].label == Label::positive) positive_mass += probs[i];
  }
  return positive_mass;
}

}  // namespace ptkit
