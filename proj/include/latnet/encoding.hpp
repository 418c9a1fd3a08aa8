#pragma once

#include <string>

#include "latnet/lattice.hpp"
#include "latnet/model.hpp"
#include "latnet/tokenizer.hpp"

namespace latnet {

// The four ways a lattice reaches the encoder:
//   one_best        Viterbi labels as a plain sequence, causal mask
//   linearize       all labels in topological order, causal mask
//   lattice_binary  split lattice, reachability mask, longest-path positions
//   lattice_prob    as lattice_binary with log-probability mask values
enum class InputMode { kOneBest, kLinearize, kLatticeBinary, kLatticeProb };

InputMode input_mode_from_string(const std::string& name);
const char* to_string(InputMode mode);

// Tokenized, positioned and masked model input for one lattice. Sequence
// modes segment each word and use index positions; lattice modes split
// multi-piece nodes first and classify at the end node (last in order).
EncodedInput encode_lattice_input(const Lattice& lattice,
                                  const Tokenizer& tokenizer, InputMode mode);

}  // namespace latnet
