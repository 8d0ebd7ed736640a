#pragma once

#include <set>
#include <string>
#include <vector>

#include "ptkit/backbone.hpp"
#include "ptkit/prompting.hpp"
#include "ptkit/verbalizer.hpp"

namespace ptkit {

/// Which logical parameter sets receive gradient updates. "backbone" covers
/// both the encoder and the word-embedding table.
enum class TrainableSet { prompt_table, mlm_head, backbone };

std::string to_string(TrainableSet s);
TrainableSet trainable_set_from_string(const std::string& s);

struct TrainConfig {
  int batch_size = 10;
  int epochs = 20;
  double peak_lr = 3e-5;
  double weight_decay = 0.01;
  double grad_clip_norm = 1.0;
  uint64_t seed = 1;
  FreezePolicy freeze_policy = FreezePolicy::frozen_backbone;
  std::set<TrainableSet> trainable_sets = {TrainableSet::prompt_table, TrainableSet::mlm_head};

  void validate() const;
};

/// Warmup-linear learning-rate schedule: 0 to peak over the first-epoch
/// steps, then linearly back to 0 at total_steps.
struct LRSchedule {
  int warmup_steps = 1;
  int total_steps = 1;
  double peak_lr = 3e-5;

  void validate() const;
};

/// Piecewise-linear value at a completed-step count in [0, total_steps].
double lr_at(const LRSchedule& schedule, int step);

/// Cross-entropy of the full-vocabulary softmax against the gold candidate
/// word id (one-hot target over |V|).
double mlm_loss(const Eigen::RowVectorXd& logits, int gold_candidate_id);

/// The trainable bundle: an owned backbone copy plus prompt table, template
/// and verbalizer, and the render budget applied to every example.
struct TaskModel {
  Backbone backbone;
  PromptTable prompts;
  PromptTemplate tmpl;
  Verbalizer verbalizer;
  int budget = 128;

  ParamList all_params();
  ParamList params_for(const std::set<TrainableSet>& sets);
  ConstParamList all_params() const;

  /// Forward-only loss of one rendered example against its gold word.
  double example_loss(const MaskedSequence& seq, int gold_id) const;
  /// Forward + backward; accumulates gradients into every parameter,
  /// scaling the loss gradient by scale. Returns the unscaled loss.
  double example_loss_and_grad(const MaskedSequence& seq, int gold_id, double scale);
  /// Forward-only verbalized prediction for one rendered example.
  Prediction predict(const MaskedSequence& seq) const;
  /// Forward-only positive-class probability (code-search ranking).
  double score(const MaskedSequence& seq) const;

  uint64_t group_hash(ParamGroup group) const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double lr_last = 0.0;
};

struct TrainCheckpoint {
  int epoch = 0;
  double validation_accuracy = 0.0;
  std::vector<std::pair<std::string, Mat>> trainable_values;
};

struct TrainResult {
  TrainCheckpoint best;
  std::vector<EpochRecord> history;
  LRSchedule schedule;
};

/// Prompt-tuning loop: every example is rendered through the template, the
/// loss is the full-vocabulary MLM cross-entropy at the mask against the
/// gold candidate word, updates are AdamW over the configured trainable
/// sets with global-norm clipping. Epoch shuffles derive from seed^epoch.
/// Checkpoint selection is best validation accuracy, earliest epoch on
/// ties; the model is left restored to that checkpoint. When validation is
/// empty the train partition stands in for it.
TrainResult train(TaskModel& model, const std::vector<TaskExample>& train_set,
                  const std::vector<TaskExample>& validation_set, const TrainConfig& config);

TrainResult train(TaskModel& model, const DatasetSplit& split, const TrainConfig& config);

/// Pure inference over target examples; mutates nothing.
std::vector<Prediction> zero_shot_apply(const TaskModel& model,
                                        const std::vector<TaskExample>& examples);

/// Continues training from the model's current (checkpointed) state on a
/// few target-language examples.
TrainResult few_shot_continue(TaskModel& model, const std::vector<TaskExample>& few_examples,
                              const std::vector<TaskExample>& validation_set,
                              const TrainConfig& config);

void restore_checkpoint(TaskModel& model, const TrainCheckpoint& checkpoint);

}  // namespace ptkit
