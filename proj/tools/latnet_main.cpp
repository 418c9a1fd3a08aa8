#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "latnet/checkpoint.hpp"
#include "latnet/datasim.hpp"
#include "latnet/encoding.hpp"
#include "latnet/lattice.hpp"
#include "latnet/masks.hpp"
#include "latnet/tokenizer.hpp"
#include "latnet/train.hpp"

namespace {

using nlohmann::ordered_json;

int log_level() {
  const char* v = std::getenv("LATNET_LOG");
  return v ? std::atoi(v) : 0;
}

void info(const std::string& message) {
  if (log_level() >= 1) std::cerr << message << "\n";
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

// Emit a metrics object: stdout always, file when a path was given.
void emit(const ordered_json& j, const std::string& path) {
  const std::string text = j.dump();
  std::cout << text << "\n";
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw latnet::Error("cannot write " + path);
  out << text << "\n";
}

ordered_json eval_to_json(const latnet::EvalMetrics& m) {
  ordered_json j;
  j["loss"] = m.loss;
  j["micro_f1"] = m.micro_f1;
  j["exact_match"] = m.exact_match;
  return j;
}

struct GenFlags {
  std::string out_dir;
  std::string preset = "cond3";
  int train_size = 4478;
  int test_size = 893;
  int vocab_size = 500;
  std::uint64_t seed = 0;
};

void run_gen(const GenFlags& f) {
  latnet::Grammar grammar = latnet::Grammar::flight_domain();
  latnet::NoiseModel noise = latnet::NoiseModel::preset(f.preset);

  auto make_split = [&](int size, std::uint64_t corpus_salt,
                        std::uint64_t noise_salt) {
    auto corpus = latnet::generate_corpus(grammar, size, mix(f.seed, corpus_salt));
    latnet::NoiseModel split_noise = noise;
    split_noise.seed = mix(f.seed, noise_salt);
    return latnet::corrupt_corpus(corpus, grammar, split_noise);
  };
  info("generating " + std::to_string(f.train_size) + "+" +
       std::to_string(f.test_size) + " examples with preset " + f.preset);
  auto train_set = make_split(f.train_size, 0xA, 0xC);
  auto test_set = make_split(f.test_size, 0xB, 0xD);

  const std::string base = f.out_dir.empty() ? "." : f.out_dir;
  std::filesystem::create_directories(base);
  latnet::save_examples(train_set, base + "/train.jsonl");
  latnet::save_examples(test_set, base + "/test.jsonl");
  latnet::LabelInventory::from_grammar(grammar).save(base + "/labels.json");
  latnet::Tokenizer tokenizer(
      latnet::build_subword_vocab(latnet::corpus_words(train_set), f.vocab_size));
  tokenizer.save(base + "/vocab.txt");

  ordered_json j;
  j["preset"] = f.preset;
  j["train_examples"] = f.train_size;
  j["test_examples"] = f.test_size;
  j["train_one_best_wer"] = latnet::corpus_one_best_wer(train_set);
  j["test_one_best_wer"] = latnet::corpus_one_best_wer(test_set);
  emit(j, "");
}

struct TrainFlags {
  std::string data_path;
  std::string eval_path;
  std::string labels_path;
  std::string vocab_path;
  std::string task = "intent";
  std::string mode = "one_best";
  int layers = 2;
  int heads = 4;
  int d_model = 64;
  int d_ff = 128;
  // Linearized inputs at the noisiest preset reach ~100 tokens.
  int max_position = 128;
  double dropout = 0.0;
  int epochs = 5;
  int batch_size = 8;
  double lr = 6.25e-5;
  int warmup = 100;
  int lm_epochs = 0;
  std::uint64_t seed = 0;
  std::string checkpoint_path;
  std::string metrics_path;
};

void add_model_options(CLI::App* sub, TrainFlags& f, bool with_eval_data) {
  sub->add_option("--data", f.data_path, "training JSONL")->required();
  if (with_eval_data) {
    sub->add_option("--eval-data", f.eval_path, "held-out JSONL")->required();
  } else {
    sub->add_option("--eval-data", f.eval_path,
                    "held-out JSONL for the final metrics");
  }
  sub->add_option("--labels", f.labels_path, "label inventory JSON")
      ->required();
  sub->add_option("--vocab", f.vocab_path, "tokenizer unit file")->required();
  sub->add_option("--task", f.task, "intent or slot");
  sub->add_option("--mode", f.mode,
                  "one_best, linearize, lattice_binary or lattice_prob");
  sub->add_option("--layers", f.layers, "encoder blocks");
  sub->add_option("--heads", f.heads, "attention heads");
  sub->add_option("--d-model", f.d_model, "model width");
  sub->add_option("--d-ff", f.d_ff, "feed-forward width");
  sub->add_option("--max-position", f.max_position, "position table size");
  sub->add_option("--dropout", f.dropout, "dropout rate");
  sub->add_option("--epochs", f.epochs, "training epochs");
  sub->add_option("--batch-size", f.batch_size, "examples per Adam step");
  sub->add_option("--lr", f.lr, "learning rate");
  sub->add_option("--warmup", f.warmup, "linear warm-up steps");
  sub->add_option("--lm-epochs", f.lm_epochs,
                  "next-token epochs before classification");
  sub->add_option("--seed", f.seed, "run seed")->required();
  sub->add_option("--metrics", f.metrics_path, "metrics JSON output path");
}

struct LoadedRun {
  std::vector<latnet::Example> train_examples;
  std::vector<latnet::Example> eval_examples;
  latnet::Tokenizer tokenizer;
  latnet::LabelInventory labels;
  latnet::Task task = latnet::Task::kIntent;
  latnet::InputMode mode = latnet::InputMode::kOneBest;
  latnet::TrainConfig config;
  std::vector<latnet::PreparedExample> train_set;
  std::vector<latnet::PreparedExample> eval_set;
};

LoadedRun load_run(const TrainFlags& f) {
  LoadedRun run;
  run.train_examples = latnet::load_examples(f.data_path);
  if (run.train_examples.empty()) {
    throw latnet::Error("empty dataset: " + f.data_path);
  }
  if (!f.eval_path.empty()) {
    run.eval_examples = latnet::load_examples(f.eval_path);
    if (run.eval_examples.empty()) {
      throw latnet::Error("empty dataset: " + f.eval_path);
    }
  }
  run.tokenizer = latnet::Tokenizer::from_file(f.vocab_path);
  run.labels = latnet::LabelInventory::load(f.labels_path);
  run.task = latnet::task_from_string(f.task);
  run.mode = latnet::input_mode_from_string(f.mode);

  run.config.model.n_layers = f.layers;
  run.config.model.n_heads = f.heads;
  run.config.model.d_model = f.d_model;
  run.config.model.d_ff = f.d_ff;
  run.config.model.vocab_size = run.tokenizer.size();
  run.config.model.max_position = f.max_position;
  run.config.model.n_labels = static_cast<int>(
      run.task == latnet::Task::kIntent ? run.labels.intents.size()
                                        : run.labels.slots.size());
  run.config.model.dropout_rate = f.dropout;
  run.config.optimizer.lr = f.lr;
  run.config.optimizer.warmup_steps = f.warmup;
  run.config.epochs = f.epochs;
  run.config.batch_size = f.batch_size;
  run.config.lm_epochs = f.lm_epochs;
  run.config.seed = f.seed;

  run.train_set = latnet::prepare_corpus(run.train_examples, run.tokenizer,
                                         run.mode, run.task, run.labels);
  if (!run.eval_examples.empty()) {
    run.eval_set = latnet::prepare_corpus(run.eval_examples, run.tokenizer,
                                          run.mode, run.task, run.labels);
  }
  return run;
}

ordered_json epochs_to_json(const latnet::TrainResult& result) {
  ordered_json epochs = ordered_json::array();
  for (const latnet::EpochMetrics& m : result.epochs) {
    ordered_json e;
    e["epoch"] = m.epoch;
    e["loss"] = m.loss;
    e["micro_f1"] = m.micro_f1;
    e["exact_match"] = m.exact_match;
    epochs.push_back(std::move(e));
  }
  return epochs;
}

void run_train(const TrainFlags& f) {
  LoadedRun run = load_run(f);
  info("training " + f.task + "/" + f.mode + " on " +
       std::to_string(run.train_set.size()) + " examples");
  latnet::TrainResult result = latnet::train(run.config, run.train_set);
  for (const latnet::EpochMetrics& m : result.epochs) {
    info("epoch " + std::to_string(m.epoch) + " loss " +
         std::to_string(m.loss) + " f1 " + std::to_string(m.micro_f1));
  }

  const bool held_out = !run.eval_set.empty();
  latnet::EvalMetrics final_metrics = latnet::evaluate_model(
      result.params, run.config.model, held_out ? run.eval_set : run.train_set);

  if (!f.checkpoint_path.empty()) {
    latnet::Checkpoint ckpt;
    ckpt.config = run.config.model;
    ckpt.task = run.task;
    ckpt.mode = run.mode;
    ckpt.labels = run.labels;
    const auto& pieces = run.tokenizer.pieces();
    ckpt.vocab_units.assign(pieces.begin() + 3, pieces.end());
    ckpt.params = result.params;
    latnet::save_checkpoint(ckpt, f.checkpoint_path);
  }

  ordered_json j;
  j["task"] = f.task;
  j["mode"] = f.mode;
  j["seed"] = f.seed;
  j["train_examples"] = run.train_set.size();
  ordered_json lm = ordered_json::array();
  for (const latnet::LmEpochMetrics& m : result.lm_epochs) {
    ordered_json e;
    e["epoch"] = m.epoch;
    e["loss"] = m.loss;
    lm.push_back(std::move(e));
  }
  j["lm_epochs"] = std::move(lm);
  j["epochs"] = epochs_to_json(result);
  ordered_json fin = eval_to_json(final_metrics);
  fin["dataset"] = held_out ? "eval" : "train";
  fin["examples"] = held_out ? run.eval_set.size() : run.train_set.size();
  j["final"] = std::move(fin);
  emit(j, f.metrics_path);
}

struct EvalFlags {
  std::string checkpoint_path;
  std::string data_path;
  std::string metrics_path;
  bool wer_buckets = false;
};

void run_eval(const EvalFlags& f) {
  latnet::Checkpoint ckpt = latnet::load_checkpoint(f.checkpoint_path);
  auto examples = latnet::load_examples(f.data_path);
  if (examples.empty()) throw latnet::Error("empty dataset: " + f.data_path);
  latnet::Tokenizer tokenizer = ckpt.tokenizer();
  auto dataset = latnet::prepare_corpus(examples, tokenizer, ckpt.mode,
                                        ckpt.task, ckpt.labels);
  latnet::EvalMetrics metrics =
      latnet::evaluate_model(ckpt.params, ckpt.config, dataset);

  ordered_json j;
  j["task"] = latnet::to_string(ckpt.task);
  j["mode"] = latnet::to_string(ckpt.mode);
  j["examples"] = examples.size();
  j["loss"] = metrics.loss;
  j["micro_f1"] = metrics.micro_f1;
  j["exact_match"] = metrics.exact_match;

  if (f.wer_buckets) {
    // Partition by utterance-level 1-best WER and score each band.
    struct Band {
      const char* name;
      double lo, hi;  // (lo, hi], except the first band which is exactly 0
    };
    const Band bands[] = {{"0", -1.0, 0.0},
                          {"(0,0.2]", 0.0, 0.2},
                          {"(0.2,0.4]", 0.2, 0.4},
                          {">0.4", 0.4, 1e18}};
    ordered_json buckets = ordered_json::array();
    for (const Band& band : bands) {
      std::vector<latnet::PreparedExample> members;
      for (std::size_t i = 0; i < examples.size(); ++i) {
        double w = latnet::wer(latnet::one_best_words(examples[i].lattice),
                               examples[i].reference);
        if (w > band.lo && w <= band.hi) members.push_back(dataset[i]);
      }
      ordered_json b;
      b["wer_band"] = band.name;
      b["count"] = members.size();
      if (members.empty()) {
        b["micro_f1"] = nullptr;
      } else {
        b["micro_f1"] =
            latnet::evaluate_model(ckpt.params, ckpt.config, members).micro_f1;
      }
      buckets.push_back(std::move(b));
    }
    j["buckets"] = std::move(buckets);
  }
  emit(j, f.metrics_path);
}

struct SweepFlags {
  TrainFlags train;
  std::vector<int> sizes;
};

void run_sweep(const SweepFlags& f) {
  LoadedRun run = load_run(f.train);
  const std::size_t total = run.train_set.size();
  for (int size : f.sizes) {
    if (size < 1 || static_cast<std::size_t>(size) > total) {
      throw latnet::Error("sweep size " + std::to_string(size) +
                          " exceeds the corpus (" + std::to_string(total) +
                          " examples)");
    }
  }

  // One shuffled index list; prefixes give nested subsets across sizes.
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix(f.train.seed, 0x517E));
  std::shuffle(order.begin(), order.end(), rng);

  ordered_json j;
  j["task"] = f.train.task;
  j["mode"] = f.train.mode;
  j["seed"] = f.train.seed;
  ordered_json rows = ordered_json::array();
  for (int size : f.sizes) {
    std::vector<latnet::PreparedExample> subset;
    if (static_cast<std::size_t>(size) == total) {
      subset = run.train_set;  // full corpus in file order matches cmd train
    } else {
      subset.reserve(size);
      for (int i = 0; i < size; ++i) subset.push_back(run.train_set[order[i]]);
    }
    info("sweep size " + std::to_string(size));
    latnet::TrainResult result = latnet::train(run.config, subset);
    latnet::EvalMetrics metrics =
        latnet::evaluate_model(result.params, run.config.model, run.eval_set);
    ordered_json row;
    row["size"] = size;
    row.update(eval_to_json(metrics));
    rows.push_back(std::move(row));
  }
  j["sizes"] = std::move(rows);
  emit(j, f.train.metrics_path);
}

struct MaskFlags {
  std::string lattice_path;
  std::string kind = "binary";
  std::string out_path;
};

void run_masks(const MaskFlags& f) {
  latnet::Lattice lattice = latnet::load_lattice_file(f.lattice_path);
  std::vector<latnet::NodeId> order = latnet::topological_order(lattice);
  latnet::AttentionMask mask;
  if (f.kind == "binary") {
    mask = latnet::binary_mask(lattice, order);
  } else if (f.kind == "prob") {
    mask = latnet::prob_mask(lattice, order);
  } else if (f.kind == "causal") {
    mask = latnet::causal_mask(static_cast<int>(order.size()));
  } else {
    throw latnet::Error("unknown mask kind: " + f.kind);
  }
  const std::string text = mask.to_json();
  std::cout << text << "\n";
  if (!f.out_path.empty()) {
    std::ofstream out(f.out_path);
    if (!out) throw latnet::Error("cannot write " + f.out_path);
    out << text << "\n";
  }
}

void run_inspect(const std::string& path) {
  latnet::Lattice lattice = latnet::load_lattice_file(path);
  std::vector<latnet::NodeId> order = latnet::topological_order(lattice);
  auto ldist = latnet::longest_path_distance(lattice);
  auto alpha = latnet::forward_mass(lattice);

  std::cout << "nodes (topological order):\n";
  std::cout << "  id\tlabel\tldist\talpha\n";
  for (latnet::NodeId id : order) {
    std::cout << "  " << id << "\t" << lattice.node_at(id).label << "\t"
              << ldist.at(id) << "\t" << alpha.at(id) << "\n";
  }
  std::cout << "one-best:";
  for (const std::string& word : latnet::one_best_path(lattice)) {
    std::cout << " " << word;
  }
  std::cout << "\n";
  std::cout << "binary mask: " << latnet::binary_mask(lattice, order).to_json()
            << "\n";
  std::cout << "prob mask: " << latnet::prob_mask(lattice, order).to_json()
            << "\n";
}

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Expands a flat key=value config file into --key=value tokens appended after
// the command line, skipping keys already given there so flags win.
std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  std::set<std::string> given;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0) continue;
    given.insert(a.substr(0, a.find('=')));
    if (a == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (a.rfind("--config=", 0) == 0) config_path = a.substr(9);
  }
  if (config_path.empty()) return args;
  std::ifstream in(config_path);
  if (!in) throw latnet::Error("cannot read config file " + config_path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trimmed(line);
    if (line.empty() || line[0] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw latnet::Error("config line " + std::to_string(line_no) +
                          " is not key=value: " + line);
    }
    std::string key = trimmed(line.substr(0, eq));
    std::string value = trimmed(line.substr(eq + 1));
    if (key.empty()) {
      throw latnet::Error("config line " + std::to_string(line_no) +
                          " has an empty key");
    }
    if (given.count("--" + key)) continue;
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

int run_validate(const std::string& path) {
  latnet::Lattice lattice = latnet::load_lattice_file(path);
  std::vector<std::string> violations = latnet::validate(lattice);
  if (violations.empty()) {
    std::cout << "valid\n";
    return 0;
  }
  for (const std::string& v : violations) std::cout << v << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"word-lattice spoken language understanding toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  std::string config_file;
  GenFlags gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a noisy dataset");
  gen_cmd->add_option("--config", config_file, "key=value file, flags override");
  gen_cmd->add_option("--out", gen.out_dir, "output directory")->required();
  gen_cmd->add_option("--preset", gen.preset,
                      "clean, cond1, cond2 or cond3");
  gen_cmd->add_option("--train-size", gen.train_size, "training examples");
  gen_cmd->add_option("--test-size", gen.test_size, "test examples");
  gen_cmd->add_option("--vocab-size", gen.vocab_size, "subword units kept");
  gen_cmd->add_option("--seed", gen.seed, "generation seed")->required();
  gen_cmd->callback([&]() { run_gen(gen); });

  TrainFlags train;
  CLI::App* train_cmd = app.add_subcommand("train", "train a classifier");
  train_cmd->add_option("--config", config_file, "key=value file, flags override");
  add_model_options(train_cmd, train, false);
  train_cmd->add_option("--checkpoint", train.checkpoint_path,
                        "checkpoint output path");
  train_cmd->callback([&]() { run_train(train); });

  EvalFlags eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--config", config_file, "key=value file, flags override");
  eval_cmd->add_option("--checkpoint", eval.checkpoint_path, "checkpoint path")
      ->required();
  eval_cmd->add_option("--data", eval.data_path, "dataset JSONL")->required();
  eval_cmd->add_option("--metrics", eval.metrics_path,
                       "metrics JSON output path");
  eval_cmd->add_flag("--wer-buckets", eval.wer_buckets,
                     "report per-WER-band F1");
  eval_cmd->callback([&]() { run_eval(eval); });

  SweepFlags sweep;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep-size", "train at several corpus sizes");
  sweep_cmd->add_option("--config", config_file, "key=value file, flags override");
  add_model_options(sweep_cmd, sweep.train, true);
  sweep_cmd->add_option("--sizes", sweep.sizes, "training sizes")
      ->required()
      ->delimiter(',');
  sweep_cmd->callback([&]() { run_sweep(sweep); });

  MaskFlags masks;
  CLI::App* masks_cmd = app.add_subcommand("masks", "dump a mask as JSON");
  masks_cmd->add_option("--lattice", masks.lattice_path, "lattice JSON file")
      ->required();
  masks_cmd->add_option("--kind", masks.kind, "binary, prob or causal");
  masks_cmd->add_option("--out", masks.out_path, "write the JSON here too");
  masks_cmd->callback([&]() { run_masks(masks); });

  std::string inspect_path;
  CLI::App* inspect_cmd =
      app.add_subcommand("inspect", "print nodes, mass and masks");
  inspect_cmd->add_option("--lattice", inspect_path, "lattice JSON file")
      ->required();
  inspect_cmd->callback([&]() { run_inspect(inspect_path); });

  std::string validate_path;
  CLI::App* validate_cmd =
      app.add_subcommand("validate", "check lattice invariants");
  validate_cmd->add_option("--lattice", validate_path, "lattice JSON file")
      ->required();
  validate_cmd->callback([&]() { rc = run_validate(validate_path); });

  try {
    std::vector<std::string> args = expand_config_args(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const latnet::ParseError& e) {
    std::cerr << "parse error at line " << e.line << ", column " << e.column
              << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
