#pragma once

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "latnet/lattice.hpp"

namespace latnet {

inline constexpr const char* kUnkLabel = "<unk>";

// Greedy longest-prefix subword tokenizer over a fixed vocabulary of units.
// Specials ("<s>", "</s>", "<unk>") are never split; characters missing from
// the vocabulary segment to "<unk>" one codepoint at a time.
class Tokenizer {
 public:
  Tokenizer() = default;
  explicit Tokenizer(const std::vector<std::string>& units);

  // One unit per line, lines starting with '#' ignored.
  static Tokenizer from_file(const std::string& path);
  void save(const std::string& path) const;

  // Id order: <s>, </s>, <unk>, then units in insertion order.
  const std::vector<std::string>& pieces() const { return pieces_; }
  int size() const { return static_cast<int>(pieces_.size()); }
  int id_of(const std::string& piece) const;  // unk id when absent
  int bos_id() const { return 0; }
  int eos_id() const { return 1; }
  int unk_id() const { return 2; }
  bool has_unit(const std::string& unit) const { return ids_.count(unit) > 0; }

  std::vector<std::string> segment(const std::string& word) const;

 private:
  void add_piece(const std::string& piece);

  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> ids_;
  std::size_t max_unit_bytes_ = 0;
};

// Replace each node whose label segments into k > 1 pieces by a chain of k
// nodes. Incoming edges keep their probabilities and attach to the first
// piece, internal chain edges have probability 1, outgoing edges leave the
// last piece. Each piece records the source node in word_origin; nodes that
// segment into a single piece pass through unchanged, so applying the split
// twice gives the same lattice.
Lattice split_nodes(const Lattice& lattice, const Tokenizer& tokenizer);

}  // namespace latnet
