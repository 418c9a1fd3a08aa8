#include "latnet/checkpoint.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace latnet {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

ordered_json config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["d_model"] = c.d_model;
  j["d_ff"] = c.d_ff;
  j["vocab_size"] = c.vocab_size;
  j["max_position"] = c.max_position;
  j["n_labels"] = c.n_labels;
  j["dropout_rate"] = c.dropout_rate;
  return j;
}

ModelConfig config_from_json(const ordered_json& j) {
  ModelConfig c;
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_position = j.at("max_position").get<int>();
  c.n_labels = j.at("n_labels").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  return c;
}

Checkpoint checkpoint_from_json(const ordered_json& j) {
  if (j.at("format_version").get<int>() != kFormatVersion) {
    throw Error("unsupported checkpoint format version");
  }

  Checkpoint ckpt;
  ckpt.config = config_from_json(j.at("config"));
  ckpt.config.check();
  ckpt.task = task_from_string(j.at("task").get<std::string>());
  ckpt.mode = input_mode_from_string(j.at("mode").get<std::string>());
  ckpt.labels.intents =
      j.at("labels").at("intents").get<std::vector<std::string>>();
  ckpt.labels.slots = j.at("labels").at("slots").get<std::vector<std::string>>();
  ckpt.vocab_units = j.at("vocab").get<std::vector<std::string>>();

  ckpt.params = ModelParams::init(ckpt.config, 0);
  const ordered_json& tensors = j.at("tensors");
  std::set<std::string> expected;
  ckpt.params.for_each([&](const std::string& name, Eigen::MatrixXd& mat) {
    expected.insert(name);
    if (!tensors.contains(name)) {
      throw Error("checkpoint missing tensor " + name);
    }
    const ordered_json& t = tensors.at(name);
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    if (rows != mat.rows() || cols != mat.cols()) {
      throw Error("tensor " + name + " has shape " + std::to_string(rows) +
                  "x" + std::to_string(cols) + ", expected " +
                  std::to_string(mat.rows()) + "x" +
                  std::to_string(mat.cols()));
    }
    const auto& data = t.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw Error("tensor " + name + " has wrong element count");
    }
    Eigen::Index i = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        mat(r, c) = data.at(i++).get<double>();
      }
    }
  });
  for (const auto& [name, value] : tensors.items()) {
    if (!expected.count(name)) throw Error("unexpected tensor " + name);
  }
  if (!ckpt.params.all_finite()) {
    throw Error("checkpoint holds non-finite parameters");
  }
  return ckpt;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  checkpoint.config.check();
  if (!checkpoint.params.all_finite()) {
    throw Error("refusing to save non-finite parameters");
  }
  ordered_json j;
  j["format_version"] = kFormatVersion;
  j["config"] = config_to_json(checkpoint.config);
  j["task"] = to_string(checkpoint.task);
  j["mode"] = to_string(checkpoint.mode);
  j["labels"] = ordered_json::object();
  j["labels"]["intents"] = checkpoint.labels.intents;
  j["labels"]["slots"] = checkpoint.labels.slots;
  j["vocab"] = checkpoint.vocab_units;
  ordered_json tensors = ordered_json::object();
  checkpoint.params.for_each(
      [&](const std::string& name, const Eigen::MatrixXd& mat) {
        ordered_json t;
        t["rows"] = mat.rows();
        t["cols"] = mat.cols();
        std::vector<double> data;
        data.reserve(mat.size());
        for (Eigen::Index r = 0; r < mat.rows(); ++r) {
          for (Eigen::Index c = 0; c < mat.cols(); ++c) {
            data.push_back(mat(r, c));
          }
        }
        t["data"] = std::move(data);
        tensors[name] = std::move(t);
      });
  j["tensors"] = std::move(tensors);

  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump() << "\n";
  if (!out) throw Error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const ordered_json::parse_error& e) {
    throw Error("bad checkpoint " + path + ": " + e.what());
  }
  try {
    return checkpoint_from_json(j);
  } catch (const ordered_json::exception& e) {
    throw Error("bad checkpoint " + path + ": " + e.what());
  }
}

}  // namespace latnet
