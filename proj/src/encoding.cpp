#include "latnet/encoding.hpp"

#include <numeric>

namespace latnet {

InputMode input_mode_from_string(const std::string& name) {
  if (name == "one_best") return InputMode::kOneBest;
  if (name == "linearize") return InputMode::kLinearize;
  if (name == "lattice_binary") return InputMode::kLatticeBinary;
  if (name == "lattice_prob") return InputMode::kLatticeProb;
  throw Error("unknown input mode: " + name);
}

const char* to_string(InputMode mode) {
  switch (mode) {
    case InputMode::kOneBest: return "one_best";
    case InputMode::kLinearize: return "linearize";
    case InputMode::kLatticeBinary: return "lattice_binary";
    case InputMode::kLatticeProb: return "lattice_prob";
  }
  throw Error("unknown input mode");
}

namespace {

EncodedInput from_word_sequence(const std::vector<std::string>& words,
                                const Tokenizer& tokenizer) {
  EncodedInput input;
  for (const std::string& word : words) {
    for (const std::string& piece : tokenizer.segment(word)) {
      input.token_ids.push_back(tokenizer.id_of(piece));
    }
  }
  const int n = input.length();
  input.positions.resize(n);
  std::iota(input.positions.begin(), input.positions.end(), 0);
  input.mask = causal_mask(n);
  input.classify_index = n - 1;
  return input;
}

}  // namespace

EncodedInput encode_lattice_input(const Lattice& lattice,
                                  const Tokenizer& tokenizer, InputMode mode) {
  switch (mode) {
    case InputMode::kOneBest:
      return from_word_sequence(one_best_path(lattice), tokenizer);
    case InputMode::kLinearize:
      return from_word_sequence(linearize(lattice), tokenizer);
    case InputMode::kLatticeBinary:
    case InputMode::kLatticeProb: {
      Lattice split = split_nodes(lattice, tokenizer);
      std::vector<NodeId> order = topological_order(split);
      std::map<NodeId, int> ldist = longest_path_distance(split);
      EncodedInput input;
      for (NodeId id : order) {
        input.token_ids.push_back(tokenizer.id_of(split.node_at(id).label));
        input.positions.push_back(ldist.at(id));
      }
      input.mask = mode == InputMode::kLatticeBinary
                       ? binary_mask(split, order)
                       : prob_mask(split, order);
      // The end node has no successors, so Kahn's order puts it last.
      input.classify_index = input.length() - 1;
      return input;
    }
  }
  throw Error("unknown input mode");
}

}  // namespace latnet
