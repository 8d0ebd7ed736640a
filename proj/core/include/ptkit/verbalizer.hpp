#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ptkit/corpus.hpp"
#include "ptkit/tokenizer.hpp"

namespace ptkit {

/// Maps candidate vocabulary words at the mask position to task labels.
/// Candidates must be distinct single tokens of the active tokenizer and
/// every label needs at least one candidate; violations are configuration
/// errors at construction, never at predict time.
class Verbalizer {
 public:
  struct Candidate {
    std::string word;
    Label label = Label::negative;
    int token_id = -1;
  };

  static Verbalizer make(const Tokenizer& tokenizer,
                         const std::vector<std::pair<std::string, Label>>& candidates);

  /// The default {"yes" -> positive, "no" -> negative} pair.
  static Verbalizer yes_no(const Tokenizer& tokenizer);

  const std::vector<Candidate>& candidates() const { return candidates_; }

  /// Token id of the first candidate carrying the given label (the training
  /// gold word).
  int gold_id(Label label) const;

  std::vector<std::pair<std::string, std::string>> serialized() const;

 private:
  std::vector<Candidate> candidates_;
};

struct Prediction {
  Label label = Label::negative;
  double score = 0.0;  // softmax-over-candidates value of the winning word
};

/// Argmax over the candidate logits; ties resolve to the negative label.
/// The score is computed over the candidate subset only.
Prediction predict_label(const Eigen::RowVectorXd& logits, const Verbalizer& verbalizer);

/// Probability mass of the positive-labeled candidates under the softmax
/// over the candidate subset; monotone in the positive-negative logit gap.
double ranking_score(const Eigen::RowVectorXd& logits, const Verbalizer& verbalizer);

}  // namespace ptkit
