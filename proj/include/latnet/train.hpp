#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "latnet/datasim.hpp"
#include "latnet/encoding.hpp"
#include "latnet/model.hpp"

namespace latnet {

struct OptimizerConfig {
  double lr = 6.25e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Linear warm-up: lr is scaled by min(1, step / warmup_steps), so step 0
  // leaves the parameters untouched. 0 disables the warm-up.
  int warmup_steps = 100;

  void check() const;
};

// Adam moment accumulators, shaped like the parameters they track.
struct AdamState {
  ModelParams m;
  ModelParams v;
  long step = 0;

  static AdamState init(const ModelParams& params);
};

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const OptimizerConfig& opt);

enum class Task { kIntent, kSlot };

Task task_from_string(const std::string& name);
const char* to_string(Task task);

// One dataset example fixed into model inputs and gold label ids.
struct PreparedExample {
  EncodedInput input;
  std::vector<int> positive_labels;
};

PreparedExample prepare_example(const Example& example,
                                const Tokenizer& tokenizer, InputMode mode,
                                Task task, const LabelInventory& labels);

std::vector<PreparedExample> prepare_corpus(const std::vector<Example>& corpus,
                                            const Tokenizer& tokenizer,
                                            InputMode mode, Task task,
                                            const LabelInventory& labels);

struct TrainConfig {
  ModelConfig model;
  OptimizerConfig optimizer;
  int epochs = 5;
  int batch_size = 8;
  // Optional next-token pass over the same inputs before classification.
  int lm_epochs = 0;
  std::uint64_t seed = 0;
};

struct LmEpochMetrics {
  int epoch = 0;
  double loss = 0.0;
};

// Mean optimization loss over the epoch plus a full pass over the training
// set with the parameters the epoch ended on.
struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double micro_f1 = 0.0;
  double exact_match = 0.0;
};

struct EvalMetrics {
  double loss = 0.0;
  double micro_f1 = 0.0;
  double exact_match = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<LmEpochMetrics> lm_epochs;
  std::vector<EpochMetrics> epochs;
};

// Labels whose logit clears the sigmoid midpoint.
std::set<int> predict_labels(const Eigen::RowVectorXd& logits);

EvalMetrics evaluate_model(const ModelParams& params, const ModelConfig& config,
                           const std::vector<PreparedExample>& dataset);

// Single-threaded minibatch training, deterministic given the seed: fixed
// init, fixed shuffles, batch-mean gradients, one Adam step per batch.
// Throws on a non-finite loss instead of training through it.
TrainResult train(const TrainConfig& config,
                  const std::vector<PreparedExample>& dataset);

}  // namespace latnet
