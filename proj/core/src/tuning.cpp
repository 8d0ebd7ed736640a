#include "ptkit/tuning.hpp"

#include <algorithm>
#include <cmath>

#include "ptkit/errors.hpp"
#include "ptkit/optim.hpp"

namespace ptkit {

std::string to_string(TrainableSet s) {
  switch (s) {
    case TrainableSet::prompt_table: return "prompt_table";
    case TrainableSet::mlm_head: return "mlm_head";
    case TrainableSet::backbone: return "backbone";
  }
  return "prompt_table";
}

TrainableSet trainable_set_from_string(const std::string& s) {
  if (s == "prompt_table") return TrainableSet::prompt_table;
  if (s == "mlm_head") return TrainableSet::mlm_head;
  if (s == "backbone") return TrainableSet::backbone;
  throw ConfigError("unknown trainable set: " + s);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
  if (peak_lr < 0.0) throw ConfigError("train config: peak_lr must be >= 0");
  if (weight_decay < 0.0) throw ConfigError("train config: weight_decay must be >= 0");
  if (freeze_policy == FreezePolicy::frozen_backbone &&
      trainable_sets.count(TrainableSet::backbone)) {
    throw ConfigError("train config: frozen_backbone excludes the backbone trainable set");
  }
}

void LRSchedule::validate() const {
  if (warmup_steps <= 0 || warmup_steps > total_steps) {
    throw ConfigError("lr schedule: need 0 < warmup_steps <= total_steps");
  }
  if (peak_lr < 0.0) throw ConfigError("lr schedule: peak_lr must be >= 0");
}

double lr_at(const LRSchedule& schedule, int step) {
  schedule.validate();
  if (step < 0 || step > schedule.total_steps) {
    throw ConfigError("lr_at: step " + std::to_string(step) + " outside [0, " +
                      std::to_string(schedule.total_steps) + "]");
  }
  if (step <= schedule.warmup_steps) {
    return schedule.peak_lr * (static_cast<double>(step) / schedule.warmup_steps);
  }
  return schedule.peak_lr * (static_cast<double>(schedule.total_steps - step) /
                             (schedule.total_steps - schedule.warmup_steps));
}

double mlm_loss(const Eigen::RowVectorXd& logits, int gold_candidate_id) {
  return softmax_cross_entropy(logits, gold_candidate_id);
}

// --- TaskModel ---------------------------------------------------------------

ParamList TaskModel::all_params() {
  ParamList list = backbone.params();
  list.push_back(&prompts.vectors);
  return list;
}

ConstParamList TaskModel::all_params() const {
  ConstParamList list;
  auto& self = const_cast<TaskModel&>(*this);
  for (Param* p : self.all_params()) list.push_back(p);
  return list;
}

ParamList TaskModel::params_for(const std::set<TrainableSet>& sets) {
  ParamList list;
  for (Param* p : all_params()) {
    const bool in =
        (p->group == ParamGroup::prompt_table && sets.count(TrainableSet::prompt_table)) ||
        (p->group == ParamGroup::mlm_head && sets.count(TrainableSet::mlm_head)) ||
        ((p->group == ParamGroup::encoder || p->group == ParamGroup::word_embeddings) &&
         sets.count(TrainableSet::backbone));
    if (in) list.push_back(p);
  }
  return list;
}

uint64_t TaskModel::group_hash(ParamGroup group) const { return hash_group(all_params(), group); }

double TaskModel::example_loss(const MaskedSequence& seq, int gold_id) const {
  Mat x = assemble_embeddings(seq, backbone, prompts);
  Mat hidden = backbone.encoder.forward(x, {}, nullptr);
  Mat row = hidden.middleRows(seq.mask_index, 1);
  Mat logits = backbone.mlm_head.forward(row);
  return mlm_loss(logits.row(0), gold_id);
}

double TaskModel::example_loss_and_grad(const MaskedSequence& seq, int gold_id, double scale) {
  Mat x = assemble_embeddings(seq, backbone, prompts);
  EncoderWorkspace ws;
  Mat hidden = backbone.encoder.forward(x, {}, &ws);
  Mat row = hidden.middleRows(seq.mask_index, 1);
  MlmHead::Cache head_cache;
  Mat logits = backbone.mlm_head.forward(row, &head_cache);
  const double loss = mlm_loss(logits.row(0), gold_id);

  Mat dlogits(1, logits.cols());
  dlogits.row(0) = softmax_cross_entropy_grad(logits.row(0), gold_id, scale);
  Mat drow = backbone.mlm_head.backward(dlogits, head_cache);
  Mat dhidden = Mat::Zero(hidden.rows(), hidden.cols());
  dhidden.row(seq.mask_index) = drow.row(0);
  Mat dx = backbone.encoder.backward(dhidden, ws);
  scatter_embedding_grads(seq, dx, backbone, prompts);
  return loss;
}

Prediction TaskModel::predict(const MaskedSequence& seq) const {
  Mat x = assemble_embeddings(seq, backbone, prompts);
  Mat hidden = backbone.encoder.forward(x, {}, nullptr);
  Mat row = hidden.middleRows(seq.mask_index, 1);
  Mat logits = backbone.mlm_head.forward(row);
  return predict_label(logits.row(0), verbalizer);
}

double TaskModel::score(const MaskedSequence& seq) const {
  Mat x = assemble_embeddings(seq, backbone, prompts);
  Mat hidden = backbone.encoder.forward(x, {}, nullptr);
  Mat row = hidden.middleRows(seq.mask_index, 1);
  Mat logits = backbone.mlm_head.forward(row);
  return ranking_score(logits.row(0), verbalizer);
}

// --- training loop -----------------------------------------------------------

namespace {

struct RenderedExample {
  MaskedSequence seq;
  int gold_id = 0;
  Label gold_label = Label::negative;
};

std::vector<RenderedExample> render_all(const TaskModel& model,
                                        const std::vector<TaskExample>& examples) {
  std::vector<RenderedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    RenderedExample r;
    r.seq = render(model.tmpl, ex, model.backbone.tokenizer, model.budget);
    r.gold_id = model.verbalizer.gold_id(ex.label);
    r.gold_label = ex.label;
    out.push_back(std::move(r));
  }
  return out;
}

double accuracy_over(const TaskModel& model, const std::vector<RenderedExample>& rendered) {
  if (rendered.empty()) return 0.0;
  int correct = 0;
  for (const auto& r : rendered) {
    if (model.predict(r.seq).label == r.gold_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(rendered.size());
}

TrainCheckpoint snapshot(TaskModel& model, const TrainConfig& config, int epoch,
                         double val_accuracy) {
  TrainCheckpoint ck;
  ck.epoch = epoch;
  ck.validation_accuracy = val_accuracy;
  for (Param* p : model.params_for(config.trainable_sets)) {
    ck.trainable_values.emplace_back(p->name, p->value);
  }
  return ck;
}

}  // namespace

void restore_checkpoint(TaskModel& model, const TrainCheckpoint& checkpoint) {
  auto params = model.all_params();
  for (const auto& [name, value] : checkpoint.trainable_values) {
    bool found = false;
    for (Param* p : params) {
      if (p->name == name) {
        if (p->value.rows() != value.rows() || p->value.cols() != value.cols()) {
          throw ConfigError("restore_checkpoint: shape mismatch for " + name);
        }
        p->value = value;
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("restore_checkpoint: unknown parameter " + name);
  }
}

TrainResult train(TaskModel& model, const std::vector<TaskExample>& train_set,
                  const std::vector<TaskExample>& validation_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw ConfigError("train: empty train split");

  auto rendered_train = render_all(model, train_set);
  auto rendered_val = render_all(model, validation_set.empty() ? train_set : validation_set);

  const int n = static_cast<int>(rendered_train.size());
  const int steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  LRSchedule schedule{steps_per_epoch, steps_per_epoch * config.epochs, config.peak_lr};

  ParamList every_param = model.all_params();
  ParamList trainable = model.params_for(config.trainable_sets);
  AdamW optimizer(trainable, config.weight_decay);

  TrainResult result;
  result.schedule = schedule;
  bool have_best = false;
  int completed_steps = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng shuffle_rng(config.seed ^ static_cast<uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    double lr_last = 0.0;
    for (int start = 0; start < n; start += config.batch_size) {
      const int count = std::min(config.batch_size, n - start);
      zero_grads(every_param);
      const double scale = 1.0 / static_cast<double>(count);
      double batch_loss = 0.0;
      for (int b = 0; b < count; ++b) {
        const auto& r = rendered_train[static_cast<size_t>(order[static_cast<size_t>(start + b)])];
        batch_loss += model.example_loss_and_grad(r.seq, r.gold_id, scale) * scale;
      }
      if (!std::isfinite(batch_loss)) {
        throw InvariantError("train: non-finite batch loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += batch_loss * count;
      clip_global_norm(trainable, config.grad_clip_norm);
      // update k (1-based) uses lr_at(k): the warmup tops out on the last
      // step of epoch 1 and the final update lands exactly at 0
      const double lr = lr_at(schedule, completed_steps + 1);
      optimizer.step(lr);
      ++completed_steps;
      lr_last = lr;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = epoch_loss / n;
    record.val_accuracy = accuracy_over(model, rendered_val);
    record.lr_last = lr_last;
    result.history.push_back(record);

    if (!have_best || record.val_accuracy > result.best.validation_accuracy) {
      result.best = snapshot(model, config, epoch, record.val_accuracy);
      have_best = true;
    }
  }

  restore_checkpoint(model, result.best);
  return result;
}

TrainResult train(TaskModel& model, const DatasetSplit& split, const TrainConfig& config) {
  return train(model, split.train, split.validation, config);
}

std::vector<Prediction> zero_shot_apply(const TaskModel& model,
                                        const std::vector<TaskExample>& examples) {
  std::vector<Prediction> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    MaskedSequence seq = render(model.tmpl, ex, model.backbone.tokenizer, model.budget);
    out.push_back(model.predict(seq));
  }
  return out;
}

TrainResult few_shot_continue(TaskModel& model, const std::vector<TaskExample>& few_examples,
                              const std::vector<TaskExample>& validation_set,
                              const TrainConfig& config) {
  if (few_examples.empty()) {
    throw ConfigError("few_shot_continue: need at least one target example");
  }
  return train(model, few_examples, validation_set, config);
}

}  // namespace ptkit
