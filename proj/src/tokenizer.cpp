#include "latnet/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace latnet {

namespace {

bool is_special(const std::string& s) {
  return s == kBosLabel || s == kEosLabel || s == kUnkLabel;
}

std::size_t utf8_char_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;  // invalid byte, consume it alone
}

}  // namespace

Tokenizer::Tokenizer(const std::vector<std::string>& units) {
  add_piece(kBosLabel);
  add_piece(kEosLabel);
  add_piece(kUnkLabel);
  for (const std::string& unit : units) {
    if (unit.empty() || is_special(unit)) continue;
    add_piece(unit);
  }
}

void Tokenizer::add_piece(const std::string& piece) {
  if (ids_.count(piece)) return;
  ids_[piece] = static_cast<int>(pieces_.size());
  pieces_.push_back(piece);
  if (!is_special(piece)) {
    max_unit_bytes_ = std::max(max_unit_bytes_, piece.size());
  }
}

Tokenizer Tokenizer::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vocabulary file: " + path);
  std::vector<std::string> units;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    units.push_back(line);
  }
  return Tokenizer(units);
}

void Tokenizer::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write vocabulary file: " + path);
  out << "# subword units, one per line\n";
  for (int i = 3; i < size(); ++i) out << pieces_[i] << "\n";
}

int Tokenizer::id_of(const std::string& piece) const {
  auto it = ids_.find(piece);
  return it == ids_.end() ? unk_id() : it->second;
}

std::vector<std::string> Tokenizer::segment(const std::string& word) const {
  if (word.empty()) throw Error("cannot segment an empty word");
  if (is_special(word)) return {word};
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < word.size()) {
    std::size_t best = 0;
    std::size_t limit = std::min(max_unit_bytes_, word.size() - pos);
    for (std::size_t len = limit; len >= 1; --len) {
      if (ids_.count(word.substr(pos, len))) {
        best = len;
        break;
      }
    }
    if (best > 0) {
      out.push_back(word.substr(pos, best));
      pos += best;
    } else {
      out.push_back(kUnkLabel);
      pos += utf8_char_len(static_cast<unsigned char>(word[pos]));
    }
  }
  return out;
}

Lattice split_nodes(const Lattice& lattice, const Tokenizer& tokenizer) {
  Lattice result;
  result.start = lattice.start;
  result.end = lattice.end;

  std::vector<const Node*> nodes;
  for (const Node& n : lattice.nodes) nodes.push_back(&n);
  std::sort(nodes.begin(), nodes.end(),
            [](const Node* a, const Node* b) { return a->id < b->id; });

  NodeId next_id = nodes.empty() ? 0 : nodes.back()->id + 1;
  std::map<NodeId, NodeId> last_piece;  // original id -> id carrying out-edges
  for (const Node* n : nodes) {
    std::vector<std::string> pieces = tokenizer.segment(n->label);
    if (pieces.size() == 1) {
      result.nodes.push_back(*n);  // unsplit nodes pass through unchanged
      last_piece[n->id] = n->id;
      continue;
    }
    NodeId piece_id = n->id;  // first piece keeps the original id
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      result.nodes.push_back({piece_id, pieces[k], n->id});
      if (k + 1 < pieces.size()) {
        NodeId chain_next = next_id++;
        result.edges.push_back({piece_id, chain_next, 1.0});
        piece_id = chain_next;
      }
    }
    last_piece[n->id] = piece_id;
  }
  // Original edges re-attach from the last piece of their source; targets
  // keep their ids because first pieces do.
  for (const Edge& e : lattice.edges) {
    result.edges.push_back({last_piece.at(e.from), e.to, e.prob});
  }
  return result;
}

}  // namespace latnet
