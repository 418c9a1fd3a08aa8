#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace latnet {

using NodeId = std::int64_t;

/// Generic toolkit failure (bad arguments, inconsistent structures, ...).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when text input cannot be parsed; carries a 1-based location.
struct ParseError : Error {
  ParseError(const std::string& what, int line_, int column_)
      : Error(what), line(line_), column(column_) {}
  int line = 0;
  int column = 0;
};

struct Node {
  NodeId id = 0;
  std::string label;
  // Id of the word node this node was split from, if any.
  std::optional<NodeId> word_origin;
};

struct Edge {
  NodeId from = 0;
  NodeId to = 0;
  double prob = 1.0;
};

// A weighted DAG of token-labeled nodes. One start node labeled "<s>" with
// in-degree 0, one end node labeled "</s>" with out-degree 0, every node on
// some start->end path, outgoing probabilities of non-end nodes sum to 1.
struct Lattice {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  NodeId start = 0;
  NodeId end = 0;

  const Node* find_node(NodeId id) const;
  const Node& node_at(NodeId id) const;  // throws Error on unknown id
  bool has_node(NodeId id) const { return find_node(id) != nullptr; }

  // Convenience for building a linear chain out of labels. Interior labels
  // get ids 0..n-1 in order; bos/eos are added around them.
  static Lattice chain(const std::vector<std::string>& interior_labels);
};

inline constexpr const char* kBosLabel = "<s>";
inline constexpr const char* kEosLabel = "</s>";
inline constexpr double kProbSumTolerance = 1e-6;

// Every violated invariant, with node/edge ids; empty means valid.
std::vector<std::string> validate(const Lattice& lattice);

// Kahn's algorithm with a min-id frontier; throws Error naming a node on the
// cycle if the graph is cyclic.
std::vector<NodeId> topological_order(const Lattice& lattice);

// Longest-path distance (in hops) from the start node.
std::map<NodeId, int> longest_path_distance(const Lattice& lattice);

// alpha: probability mass of the paths from start reaching each node.
std::map<NodeId, double> forward_mass(const Lattice& lattice);

// beta: sum over all from->to paths of the product of edge probabilities.
// 1 when from == to, 0 when unreachable.
double path_mass_between(const Lattice& lattice, NodeId from, NodeId to);

// P(v_j in Pre(v_i) | v_i): probability that a start->end path contains v_j
// before v_i, given that it contains v_i. Defined 1 when v_j == v_i, 0 when
// v_j is not a predecessor.
double predecessor_prob(const Lattice& lattice, NodeId v_j, NodeId v_i);

// Transitive-closure predecessors of v, excluding v itself.
std::set<NodeId> predecessors(const Lattice& lattice, NodeId v);

// Labels of the Viterbi path, "<s>"/"</s>" included. Probability ties break
// toward the lexicographically smallest node-id sequence.
std::vector<std::string> one_best_path(const Lattice& lattice);

// Node labels in topological order.
std::vector<std::string> linearize(const Lattice& lattice);

// JSON schema: {"nodes":[{"id":..,"label":..}],"edges":[{"from":..,"to":..,
// "prob":..}],"start":..,"end":..}. Unknown top-level keys are rejected.
// The serializer emits keys in that order, nodes sorted by id and edges
// sorted by (from, to).
Lattice lattice_from_json(const std::string& text);
std::string lattice_to_json(const Lattice& lattice);

Lattice load_lattice_file(const std::string& path);

}  // namespace latnet
