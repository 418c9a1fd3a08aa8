// Python bindings for the lattice, mask, model and data-simulation APIs.
// Thin and mechanical: field-for-field classes, free functions kept free.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "latnet/checkpoint.hpp"
#include "latnet/datasim.hpp"
#include "latnet/encoding.hpp"
#include "latnet/lattice.hpp"
#include "latnet/masks.hpp"
#include "latnet/model.hpp"
#include "latnet/tokenizer.hpp"
#include "latnet/train.hpp"

namespace py = pybind11;
using namespace latnet;

namespace {

Eigen::MatrixXd mask_values(const AttentionMask& mask) {
  Eigen::MatrixXd out(mask.size(), mask.size());
  for (int i = 0; i < mask.size(); ++i) {
    for (int j = 0; j < mask.size(); ++j) out(i, j) = mask.value(i, j);
  }
  return out;
}

Eigen::MatrixXi mask_pattern(const AttentionMask& mask) {
  Eigen::MatrixXi out(mask.size(), mask.size());
  for (int i = 0; i < mask.size(); ++i) {
    for (int j = 0; j < mask.size(); ++j) out(i, j) = mask.is_masked(i, j);
  }
  return out;
}

py::dict param_tensors(const ModelParams& params) {
  py::dict out;
  params.for_each([&](const std::string& name, const Eigen::MatrixXd& m) {
    out[py::str(name)] = m;
  });
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Word-lattice inputs for a transformer encoder";

  // ------------------------------------------------------------- lattice
  py::class_<Node>(m, "Node")
      .def(py::init<>())
      .def(py::init([](NodeId id, const std::string& label) {
             return Node{id, label, std::nullopt};
           }),
           py::arg("id"), py::arg("label"))
      .def_readwrite("id", &Node::id)
      .def_readwrite("label", &Node::label)
      .def_readwrite("word_origin", &Node::word_origin)
      .def("__repr__", [](const Node& n) {
        return "Node(" + std::to_string(n.id) + ", '" + n.label + "')";
      });

  py::class_<Edge>(m, "Edge")
      .def(py::init<>())
      .def(py::init([](NodeId from, NodeId to, double prob) {
             return Edge{from, to, prob};
           }),
           py::arg("from_"), py::arg("to"), py::arg("prob"))
      .def_readwrite("from_", &Edge::from)
      .def_readwrite("to", &Edge::to)
      .def_readwrite("prob", &Edge::prob)
      .def("__repr__", [](const Edge& e) {
        return "Edge(" + std::to_string(e.from) + " -> " + std::to_string(e.to) +
               ", " + std::to_string(e.prob) + ")";
      });

  py::class_<Lattice>(m, "Lattice")
      .def(py::init<>())
      .def_readwrite("nodes", &Lattice::nodes)
      .def_readwrite("edges", &Lattice::edges)
      .def_readwrite("start", &Lattice::start)
      .def_readwrite("end", &Lattice::end)
      .def_static("chain", &Lattice::chain, py::arg("interior_labels"))
      .def("node_at", &Lattice::node_at, py::arg("id"),
           py::return_value_policy::copy)
      .def("has_node", &Lattice::has_node, py::arg("id"));

  m.attr("BOS_LABEL") = kBosLabel;
  m.attr("EOS_LABEL") = kEosLabel;
  m.def("lattice_from_json", &lattice_from_json, py::arg("text"));
  m.def("lattice_to_json", &lattice_to_json, py::arg("lattice"));
  m.def("load_lattice_file", &load_lattice_file, py::arg("path"));
  m.def("validate", &validate, py::arg("lattice"),
        "Problem descriptions; empty means the lattice is well formed.");
  m.def("topological_order", &topological_order, py::arg("lattice"));
  m.def("longest_path_distance", &longest_path_distance, py::arg("lattice"));
  m.def("forward_mass", &forward_mass, py::arg("lattice"));
  m.def("path_mass_between", &path_mass_between, py::arg("lattice"),
        py::arg("from_"), py::arg("to"));
  m.def("predecessor_prob", &predecessor_prob, py::arg("lattice"),
        py::arg("v_j"), py::arg("v_i"),
        "P(v_j appears before v_i | the path contains v_i).");
  m.def("predecessors", &predecessors, py::arg("lattice"), py::arg("v"));
  m.def("one_best_path", &one_best_path, py::arg("lattice"));
  m.def("linearize", &linearize, py::arg("lattice"));

  // --------------------------------------------------------------- masks
  py::class_<AttentionMask>(m, "AttentionMask")
      .def("size", &AttentionMask::size)
      .def("order", &AttentionMask::order)
      .def("is_masked", &AttentionMask::is_masked, py::arg("i"), py::arg("j"))
      .def("value", &AttentionMask::value, py::arg("i"), py::arg("j"))
      .def("apply", &AttentionMask::apply, py::arg("logits"))
      .def("values", &mask_values, "Additive mask values as a dense matrix.")
      .def("pattern", &mask_pattern, "0/1 matrix; 1 marks masked entries.")
      .def("to_json", &AttentionMask::to_json)
      .def("__eq__", [](const AttentionMask& a, const AttentionMask& b) {
        return a == b;
      });
  m.attr("MASKED_LOGIT") = AttentionMask::kMaskedLogit;
  m.def("causal_mask", &causal_mask, py::arg("n"));
  m.def("binary_mask", &binary_mask, py::arg("lattice"), py::arg("order"));
  m.def("prob_mask", &prob_mask, py::arg("lattice"), py::arg("order"));

  // ----------------------------------------------------------- tokenizer
  py::class_<Tokenizer>(m, "Tokenizer")
      .def(py::init<std::vector<std::string>>(), py::arg("units"))
      .def_static("from_file", &Tokenizer::from_file, py::arg("path"))
      .def("save", &Tokenizer::save, py::arg("path"))
      .def("pieces", &Tokenizer::pieces)
      .def("size", &Tokenizer::size)
      .def("id_of", &Tokenizer::id_of, py::arg("piece"))
      .def("bos_id", &Tokenizer::bos_id)
      .def("eos_id", &Tokenizer::eos_id)
      .def("unk_id", &Tokenizer::unk_id)
      .def("has_unit", &Tokenizer::has_unit, py::arg("unit"))
      .def("segment", &Tokenizer::segment, py::arg("word"));
  m.def("split_nodes", &split_nodes, py::arg("lattice"), py::arg("tokenizer"));

  // ------------------------------------------------------------ encoding
  py::enum_<InputMode>(m, "InputMode")
      .value("one_best", InputMode::kOneBest)
      .value("linearize", InputMode::kLinearize)
      .value("lattice_binary", InputMode::kLatticeBinary)
      .value("lattice_prob", InputMode::kLatticeProb);
  m.def("input_mode_from_string", &input_mode_from_string, py::arg("name"));
  m.def("encode_lattice_input", &encode_lattice_input, py::arg("lattice"),
        py::arg("tokenizer"), py::arg("mode"));
  m.def(
      "encode_lattice_input",
      [](const Lattice& lattice, const Tokenizer& tokenizer,
         const std::string& mode) {
        return encode_lattice_input(lattice, tokenizer,
                                    input_mode_from_string(mode));
      },
      py::arg("lattice"), py::arg("tokenizer"), py::arg("mode"));

  // --------------------------------------------------------------- model
  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("n_layers", &ModelConfig::n_layers)
      .def_readwrite("n_heads", &ModelConfig::n_heads)
      .def_readwrite("d_model", &ModelConfig::d_model)
      .def_readwrite("d_ff", &ModelConfig::d_ff)
      .def_readwrite("vocab_size", &ModelConfig::vocab_size)
      .def_readwrite("max_position", &ModelConfig::max_position)
      .def_readwrite("n_labels", &ModelConfig::n_labels)
      .def_readwrite("dropout_rate", &ModelConfig::dropout_rate)
      .def("d_k", &ModelConfig::d_k)
      .def("check", &ModelConfig::check);

  py::class_<EncodedInput>(m, "EncodedInput")
      .def(py::init<>())
      .def_readwrite("token_ids", &EncodedInput::token_ids)
      .def_readwrite("positions", &EncodedInput::positions)
      .def_readwrite("mask", &EncodedInput::mask)
      .def_readwrite("classify_index", &EncodedInput::classify_index)
      .def("length", &EncodedInput::length)
      .def("check", &EncodedInput::check, py::arg("config"));

  py::class_<ModelParams>(m, "ModelParams")
      .def_static("init", &ModelParams::init, py::arg("config"),
                  py::arg("seed"))
      .def_static("zeros_like", &ModelParams::zeros_like, py::arg("other"))
      .def("all_finite", &ModelParams::all_finite)
      .def("tensors", &param_tensors,
           "Copies of every parameter tensor, keyed by name.");

  m.def("encode_eval", &encode_eval, py::arg("params"), py::arg("config"),
        py::arg("input"));
  m.def("classify_eval", &classify_eval, py::arg("params"), py::arg("config"),
        py::arg("input"));
  m.def("lm_loss_eval", &lm_loss_eval, py::arg("params"), py::arg("config"),
        py::arg("input"));
  m.def("classification_loss_eval", &classification_loss_eval,
        py::arg("params"), py::arg("config"), py::arg("input"),
        py::arg("positive_labels"));

  // ------------------------------------------------------------- datasim
  py::class_<Grammar>(m, "Grammar")
      .def_static("flight_domain", &Grammar::flight_domain)
      .def_readonly("intent_names", &Grammar::intent_names)
      .def("slot_names", &Grammar::slot_names)
      .def("word_inventory", &Grammar::word_inventory);

  py::class_<NoiseModel>(m, "NoiseModel")
      .def(py::init<>())
      .def_static("preset", &NoiseModel::preset, py::arg("name"))
      .def_readwrite("p_sub", &NoiseModel::p_sub)
      .def_readwrite("p_del", &NoiseModel::p_del)
      .def_readwrite("p_ins", &NoiseModel::p_ins)
      .def_readwrite("k", &NoiseModel::k)
      .def_readwrite("true_score_bias", &NoiseModel::true_score_bias)
      .def_readwrite("vocab_score_bonus", &NoiseModel::vocab_score_bonus)
      .def_readwrite("temperature", &NoiseModel::temperature)
      .def_readwrite("seed", &NoiseModel::seed)
      .def("check", &NoiseModel::check);

  py::class_<Example>(m, "Example")
      .def(py::init<>())
      .def_readwrite("lattice", &Example::lattice)
      .def_readwrite("reference", &Example::reference)
      .def_readwrite("intents", &Example::intents)
      .def_readwrite("slots", &Example::slots);

  py::class_<LabelInventory>(m, "LabelInventory")
      .def(py::init<>())
      .def_readwrite("intents", &LabelInventory::intents)
      .def_readwrite("slots", &LabelInventory::slots)
      .def_static("from_grammar", &LabelInventory::from_grammar,
                  py::arg("grammar"))
      .def_static("load", &LabelInventory::load, py::arg("path"))
      .def("save", &LabelInventory::save, py::arg("path"))
      .def("intent_id", &LabelInventory::intent_id, py::arg("name"))
      .def("slot_id", &LabelInventory::slot_id, py::arg("name"));

  m.def("generate_corpus", &generate_corpus, py::arg("grammar"),
        py::arg("size"), py::arg("seed"));
  m.def("corrupt", &corrupt, py::arg("example"), py::arg("grammar"),
        py::arg("noise"), py::arg("salt") = 0);
  m.def("corrupt_corpus", &corrupt_corpus, py::arg("corpus"),
        py::arg("grammar"), py::arg("noise"));
  m.def("wer", &wer, py::arg("hypothesis"), py::arg("reference"));
  m.def("one_best_words", &one_best_words, py::arg("lattice"));
  m.def("corpus_one_best_wer", &corpus_one_best_wer, py::arg("examples"));
  m.def("build_subword_vocab", &build_subword_vocab, py::arg("words"),
        py::arg("top_n") = 500, py::arg("max_len") = 6);
  m.def("corpus_words", &corpus_words, py::arg("examples"));
  m.def("save_examples", &save_examples, py::arg("examples"), py::arg("path"));
  m.def("load_examples", &load_examples, py::arg("path"));

  py::class_<EvalScores>(m, "EvalScores")
      .def_readonly("micro_f1", &EvalScores::micro_f1)
      .def_readonly("exact_match", &EvalScores::exact_match);
  m.def("evaluate", &evaluate, py::arg("predictions"), py::arg("gold"));

  // ------------------------------------------------------------ training
  py::enum_<Task>(m, "Task")
      .value("intent", Task::kIntent)
      .value("slot", Task::kSlot);
  m.def("task_from_string", &task_from_string, py::arg("name"));

  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("lr", &OptimizerConfig::lr)
      .def_readwrite("beta1", &OptimizerConfig::beta1)
      .def_readwrite("beta2", &OptimizerConfig::beta2)
      .def_readwrite("eps", &OptimizerConfig::eps)
      .def_readwrite("warmup_steps", &OptimizerConfig::warmup_steps)
      .def("check", &OptimizerConfig::check);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("model", &TrainConfig::model)
      .def_readwrite("optimizer", &TrainConfig::optimizer)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("lm_epochs", &TrainConfig::lm_epochs)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<PreparedExample>(m, "PreparedExample")
      .def(py::init<>())
      .def_readwrite("input", &PreparedExample::input)
      .def_readwrite("positive_labels", &PreparedExample::positive_labels);
  m.def("prepare_example", &prepare_example, py::arg("example"),
        py::arg("tokenizer"), py::arg("mode"), py::arg("task"),
        py::arg("labels"));
  m.def("prepare_corpus", &prepare_corpus, py::arg("corpus"),
        py::arg("tokenizer"), py::arg("mode"), py::arg("task"),
        py::arg("labels"));

  py::class_<LmEpochMetrics>(m, "LmEpochMetrics")
      .def_readonly("epoch", &LmEpochMetrics::epoch)
      .def_readonly("loss", &LmEpochMetrics::loss);
  py::class_<EpochMetrics>(m, "EpochMetrics")
      .def_readonly("epoch", &EpochMetrics::epoch)
      .def_readonly("loss", &EpochMetrics::loss)
      .def_readonly("micro_f1", &EpochMetrics::micro_f1)
      .def_readonly("exact_match", &EpochMetrics::exact_match);
  py::class_<EvalMetrics>(m, "EvalMetrics")
      .def_readonly("loss", &EvalMetrics::loss)
      .def_readonly("micro_f1", &EvalMetrics::micro_f1)
      .def_readonly("exact_match", &EvalMetrics::exact_match);
  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("lm_epochs", &TrainResult::lm_epochs)
      .def_readonly("epochs", &TrainResult::epochs);

  m.def("predict_labels", &predict_labels, py::arg("logits"));
  m.def("evaluate_model", &evaluate_model, py::arg("params"),
        py::arg("config"), py::arg("dataset"));
  m.def("train", &train, py::arg("config"), py::arg("dataset"),
        py::call_guard<py::gil_scoped_release>());

  // ----------------------------------------------------------- checkpoint
  py::class_<Checkpoint>(m, "Checkpoint")
      .def(py::init<>())
      .def_readwrite("config", &Checkpoint::config)
      .def_readwrite("task", &Checkpoint::task)
      .def_readwrite("mode", &Checkpoint::mode)
      .def_readwrite("labels", &Checkpoint::labels)
      .def_readwrite("vocab_units", &Checkpoint::vocab_units)
      .def_readwrite("params", &Checkpoint::params)
      .def("tokenizer", &Checkpoint::tokenizer)
      .def("n_labels_for_task", &Checkpoint::n_labels_for_task);
  m.def("save_checkpoint", &save_checkpoint, py::arg("checkpoint"),
        py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
}
