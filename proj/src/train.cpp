#include "latnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace latnet {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::vector<Eigen::MatrixXd*> tensors_of(ModelParams& params) {
  std::vector<Eigen::MatrixXd*> out;
  params.for_each(
      [&](const std::string&, Eigen::MatrixXd& mat) { out.push_back(&mat); });
  return out;
}

std::vector<const Eigen::MatrixXd*> tensors_of(const ModelParams& params) {
  std::vector<const Eigen::MatrixXd*> out;
  params.for_each([&](const std::string&, const Eigen::MatrixXd& mat) {
    out.push_back(&mat);
  });
  return out;
}

}  // namespace

void OptimizerConfig::check() const {
  if (lr < 0.0) throw Error("learning rate must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw Error("Adam betas must be in [0, 1)");
  }
  if (eps <= 0.0) throw Error("Adam epsilon must be positive");
  if (warmup_steps < 0) throw Error("warmup steps must be >= 0");
}

AdamState AdamState::init(const ModelParams& params) {
  AdamState state;
  state.m = ModelParams::zeros_like(params);
  state.v = ModelParams::zeros_like(params);
  return state;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const OptimizerConfig& opt) {
  opt.check();
  const double t = static_cast<double>(state.step + 1);
  const double warm =
      opt.warmup_steps > 0
          ? std::min(1.0, static_cast<double>(state.step) / opt.warmup_steps)
          : 1.0;
  const double lr_eff = opt.lr * warm;
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);

  auto ps = tensors_of(params);
  auto gs = tensors_of(grads);
  auto ms = tensors_of(state.m);
  auto vs = tensors_of(state.v);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto& p = *ps[i];
    const auto& g = *gs[i];
    auto& m = *ms[i];
    auto& v = *vs[i];
    m.array() = opt.beta1 * m.array() + (1.0 - opt.beta1) * g.array();
    v.array() = opt.beta2 * v.array() + (1.0 - opt.beta2) * g.array().square();
    p.array() -=
        lr_eff * (m.array() / bc1) / ((v.array() / bc2).sqrt() + opt.eps);
  }
  state.step += 1;
}

Task task_from_string(const std::string& name) {
  if (name == "intent") return Task::kIntent;
  if (name == "slot") return Task::kSlot;
  throw Error("unknown task: " + name);
}

const char* to_string(Task task) {
  return task == Task::kIntent ? "intent" : "slot";
}

PreparedExample prepare_example(const Example& example,
                                const Tokenizer& tokenizer, InputMode mode,
                                Task task, const LabelInventory& labels) {
  PreparedExample out;
  out.input = encode_lattice_input(example.lattice, tokenizer, mode);
  const auto& names = task == Task::kIntent ? example.intents : example.slots;
  for (const std::string& name : names) {
    out.positive_labels.push_back(task == Task::kIntent
                                      ? labels.intent_id(name)
                                      : labels.slot_id(name));
  }
  return out;
}

std::vector<PreparedExample> prepare_corpus(const std::vector<Example>& corpus,
                                            const Tokenizer& tokenizer,
                                            InputMode mode, Task task,
                                            const LabelInventory& labels) {
  std::vector<PreparedExample> out;
  out.reserve(corpus.size());
  for (const Example& e : corpus) {
    out.push_back(prepare_example(e, tokenizer, mode, task, labels));
  }
  return out;
}

std::set<int> predict_labels(const Eigen::RowVectorXd& logits) {
  std::set<int> out;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (logits(i) > 0.0) out.insert(static_cast<int>(i));
  }
  return out;
}

EvalMetrics evaluate_model(const ModelParams& params, const ModelConfig& config,
                           const std::vector<PreparedExample>& dataset) {
  if (dataset.empty()) throw Error("nothing to evaluate");
  double loss_sum = 0.0;
  std::vector<std::set<int>> predictions, gold;
  predictions.reserve(dataset.size());
  gold.reserve(dataset.size());
  for (const PreparedExample& ex : dataset) {
    predictions.push_back(predict_labels(classify_eval(params, config, ex.input)));
    gold.push_back({ex.positive_labels.begin(), ex.positive_labels.end()});
    loss_sum += classification_loss_eval(params, config, ex.input,
                                         ex.positive_labels);
  }
  EvalScores scores = evaluate(predictions, gold);
  return {loss_sum / static_cast<double>(dataset.size()), scores.micro_f1,
          scores.exact_match};
}

TrainResult train(const TrainConfig& config,
                  const std::vector<PreparedExample>& dataset) {
  config.model.check();
  config.optimizer.check();
  if (config.epochs < 0 || config.lm_epochs < 0) {
    throw Error("epoch counts must be >= 0");
  }
  if (config.batch_size < 1) throw Error("batch size must be >= 1");
  if (dataset.empty()) throw Error("empty training set");
  for (const PreparedExample& ex : dataset) {
    ex.input.check(config.model);
    for (int label : ex.positive_labels) {
      if (label < 0 || label >= config.model.n_labels) {
        throw Error("label id out of range: " + std::to_string(label));
      }
    }
  }

  TrainResult result;
  result.params = ModelParams::init(config.model, config.seed);
  AdamState state = AdamState::init(result.params);
  std::mt19937_64 shuffle_rng(mix(config.seed, 0x5AFE));
  std::mt19937_64 dropout_rng(mix(config.seed, 0xD20F));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  auto run_epoch = [&](bool lm_phase) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t count =
          std::min<std::size_t>(config.batch_size, order.size() - start);
      ModelParams grads = ModelParams::zeros_like(result.params);
      for (std::size_t i = start; i < start + count; ++i) {
        const PreparedExample& ex = dataset[order[i]];
        ad::Tape tape;
        ParamVars pv = ParamVars::bind(tape, result.params, &grads);
        ForwardOptions opts{config.model.dropout_rate, &dropout_rng};
        ad::Var hidden = encode(tape, pv, ex.input, config.model, opts);
        ad::Var loss =
            lm_phase
                ? lm_loss(tape, hidden, ex.input.token_ids, pv)
                : classification_loss(
                      tape,
                      classify_logits(tape, hidden, ex.input.classify_index,
                                      pv),
                      ex.positive_labels, config.model.n_labels);
        const double value = tape.value(loss)(0, 0);
        if (!std::isfinite(value)) {
          throw Error("training diverged at step " +
                      std::to_string(state.step));
        }
        loss_sum += value;
        // Batch-mean objective: scale each example before backprop.
        tape.backward(tape.scale(loss, 1.0 / static_cast<double>(count)));
      }
      adam_step(result.params, grads, state, config.optimizer);
    }
    return loss_sum / static_cast<double>(order.size());
  };

  for (int epoch = 1; epoch <= config.lm_epochs; ++epoch) {
    result.lm_epochs.push_back({epoch, run_epoch(true)});
  }
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.loss = run_epoch(false);
    EvalMetrics eval = evaluate_model(result.params, config.model, dataset);
    metrics.micro_f1 = eval.micro_f1;
    metrics.exact_match = eval.exact_match;
    result.epochs.push_back(metrics);
  }
  if (!result.params.all_finite()) {
    throw Error("training produced non-finite parameters");
  }
  return result;
}

}  // namespace latnet
