#pragma once

#include <string>
#include <vector>

#include "latnet/datasim.hpp"
#include "latnet/encoding.hpp"
#include "latnet/model.hpp"
#include "latnet/train.hpp"

namespace latnet {

// Everything needed to reload a trained model: architecture, task, input
// mode, label inventory, tokenizer units (insertion order, specials
// excluded), and the parameter tensors. Stored as JSON with exact double
// round trips, so save -> load -> save is byte-identical.
struct Checkpoint {
  ModelConfig config;
  Task task = Task::kIntent;
  InputMode mode = InputMode::kOneBest;
  LabelInventory labels;
  std::vector<std::string> vocab_units;
  ModelParams params;

  Tokenizer tokenizer() const { return Tokenizer(vocab_units); }
  int n_labels_for_task() const {
    return static_cast<int>(task == Task::kIntent ? labels.intents.size()
                                                  : labels.slots.size());
  }
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace latnet
