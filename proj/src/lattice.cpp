#include "latnet/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace latnet {

namespace {

using AdjacencyMap = std::map<NodeId, std::vector<const Edge*>>;

AdjacencyMap outgoing_edges(const Lattice& lattice) {
  AdjacencyMap out;
  for (const Node& n : lattice.nodes) out[n.id];
  for (const Edge& e : lattice.edges) {
    if (out.count(e.from) && out.count(e.to)) out[e.from].push_back(&e);
  }
  return out;
}

AdjacencyMap incoming_edges(const Lattice& lattice) {
  AdjacencyMap in;
  for (const Node& n : lattice.nodes) in[n.id];
  for (const Edge& e : lattice.edges) {
    if (in.count(e.from) && in.count(e.to)) in[e.to].push_back(&e);
  }
  return in;
}

struct KahnResult {
  std::vector<NodeId> order;
  bool complete = false;
  NodeId cycle_node = -1;
};

// Min-id frontier makes the order unique and reproducible.
KahnResult kahn_order(const Lattice& lattice) {
  KahnResult result;
  std::map<NodeId, int> indegree;
  std::map<NodeId, std::vector<NodeId>> succ;
  for (const Node& n : lattice.nodes) indegree[n.id];
  for (const Edge& e : lattice.edges) {
    if (!indegree.count(e.from) || !indegree.count(e.to)) continue;
    indegree[e.to]++;
    succ[e.from].push_back(e.to);
  }
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<NodeId>> ready;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) ready.push(id);
  }
  while (!ready.empty()) {
    NodeId id = ready.top();
    ready.pop();
    result.order.push_back(id);
    for (NodeId next : succ[id]) {
      if (--indegree[next] == 0) ready.push(next);
    }
  }
  result.complete = result.order.size() == indegree.size();
  if (!result.complete) {
    // Walk incoming edges inside the unfinished set until a node repeats;
    // that node is on a cycle.
    std::set<NodeId> unfinished;
    for (const auto& [id, deg] : indegree) {
      if (deg > 0) unfinished.insert(id);
    }
    std::map<NodeId, std::vector<NodeId>> pred;
    for (const Edge& e : lattice.edges) {
      if (unfinished.count(e.from) && unfinished.count(e.to)) {
        pred[e.to].push_back(e.from);
      }
    }
    NodeId cur = *unfinished.begin();
    std::set<NodeId> seen;
    while (!seen.count(cur)) {
      seen.insert(cur);
      cur = pred[cur].front();
    }
    result.cycle_node = cur;
  }
  return result;
}

// Path mass into every node, restricted to paths starting at `from`.
std::map<NodeId, double> mass_from(const Lattice& lattice, NodeId from,
                                   const std::vector<NodeId>& order) {
  AdjacencyMap in = incoming_edges(lattice);
  std::map<NodeId, double> mass;
  for (NodeId id : order) {
    double m = id == from ? 1.0 : 0.0;
    if (id != from) {
      for (const Edge* e : in[id]) {
        auto it = mass.find(e->from);
        if (it != mass.end()) m += it->second * e->prob;
      }
    }
    mass[id] = m;
  }
  return mass;
}

}  // namespace

const Node* Lattice::find_node(NodeId id) const {
  for (const Node& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const Node& Lattice::node_at(NodeId id) const {
  const Node* n = find_node(id);
  if (!n) throw Error("unknown node id " + std::to_string(id));
  return *n;
}

Lattice Lattice::chain(const std::vector<std::string>& interior_labels) {
  Lattice lattice;
  NodeId id = 0;
  lattice.nodes.push_back({id++, kBosLabel, std::nullopt});
  for (const std::string& label : interior_labels) {
    lattice.nodes.push_back({id++, label, std::nullopt});
  }
  lattice.nodes.push_back({id, kEosLabel, std::nullopt});
  for (NodeId i = 0; i < id; ++i) lattice.edges.push_back({i, i + 1, 1.0});
  lattice.start = 0;
  lattice.end = id;
  return lattice;
}

std::vector<std::string> validate(const Lattice& lattice) {
  std::vector<std::string> violations;
  auto report = [&](const std::string& msg) { violations.push_back(msg); };

  if (lattice.nodes.empty()) {
    report("lattice has no nodes");
    return violations;
  }

  std::set<NodeId> ids;
  for (const Node& n : lattice.nodes) {
    if (n.id < 0) report("node id " + std::to_string(n.id) + " is negative");
    if (!ids.insert(n.id).second) {
      report("duplicate node id " + std::to_string(n.id));
    }
    if (n.label.empty()) {
      report("node " + std::to_string(n.id) + " has an empty label");
    }
  }

  std::map<NodeId, int> indegree, outdegree;
  for (NodeId id : ids) indegree[id] = outdegree[id] = 0;
  std::set<std::pair<NodeId, NodeId>> seen_edges;
  for (const Edge& e : lattice.edges) {
    std::string name =
        "edge " + std::to_string(e.from) + "->" + std::to_string(e.to);
    if (e.from == e.to) report(name + " is a self-loop");
    bool endpoints_ok = true;
    if (!ids.count(e.from)) {
      report(name + " leaves unknown node " + std::to_string(e.from));
      endpoints_ok = false;
    }
    if (!ids.count(e.to)) {
      report(name + " enters unknown node " + std::to_string(e.to));
      endpoints_ok = false;
    }
    if (!(e.prob > 0.0) || e.prob > 1.0) {
      report(name + " has prob " + std::to_string(e.prob) +
             " outside (0, 1]");
    }
    if (!seen_edges.insert({e.from, e.to}).second) {
      report("duplicate " + name);
    }
    if (endpoints_ok && e.from != e.to) {
      outdegree[e.from]++;
      indegree[e.to]++;
    }
  }

  if (!ids.count(lattice.start)) {
    report("start id " + std::to_string(lattice.start) + " is not a node");
  }
  if (!ids.count(lattice.end)) {
    report("end id " + std::to_string(lattice.end) + " is not a node");
  }
  if (!violations.empty()) return violations;  // structure too broken to go on

  KahnResult kahn = kahn_order(lattice);
  if (!kahn.complete) {
    report("cycle detected involving node " + std::to_string(kahn.cycle_node));
  }

  std::vector<NodeId> sources, sinks;
  for (NodeId id : ids) {
    if (indegree[id] == 0) sources.push_back(id);
    if (outdegree[id] == 0) sinks.push_back(id);
  }
  auto id_list = [](const std::vector<NodeId>& v) {
    std::string s;
    for (NodeId id : v) s += (s.empty() ? "" : ", ") + std::to_string(id);
    return s;
  };
  if (sources.size() != 1 || sources.front() != lattice.start) {
    report("expected start node " + std::to_string(lattice.start) +
           " as the unique in-degree-0 node, found [" + id_list(sources) +
           "] (multiple start/end or misplaced start)");
  }
  if (sinks.size() != 1 || sinks.front() != lattice.end) {
    report("expected end node " + std::to_string(lattice.end) +
           " as the unique out-degree-0 node, found [" + id_list(sinks) +
           "] (multiple start/end or misplaced end)");
  }
  if (const Node* s = lattice.find_node(lattice.start);
      s && s->label != kBosLabel) {
    report("start node label is '" + s->label + "', expected '<s>'");
  }
  if (const Node* t = lattice.find_node(lattice.end);
      t && t->label != kEosLabel) {
    report("end node label is '" + t->label + "', expected '</s>'");
  }

  if (kahn.complete) {
    // Reachability in both directions: every node on a start->end path.
    std::set<NodeId> from_start, to_end;
    AdjacencyMap out = outgoing_edges(lattice);
    AdjacencyMap in = incoming_edges(lattice);
    for (auto it = kahn.order.begin(); it != kahn.order.end(); ++it) {
      if (*it == lattice.start) from_start.insert(*it);
      for (const Edge* e : in[*it]) {
        if (from_start.count(e->from)) from_start.insert(*it);
      }
    }
    for (auto it = kahn.order.rbegin(); it != kahn.order.rend(); ++it) {
      if (*it == lattice.end) to_end.insert(*it);
      for (const Edge* e : out[*it]) {
        if (to_end.count(e->to)) to_end.insert(*it);
      }
    }
    for (NodeId id : ids) {
      if (!from_start.count(id) || !to_end.count(id)) {
        report("node " + std::to_string(id) + " is on no start->end path");
      }
    }
  }

  {
    AdjacencyMap out = outgoing_edges(lattice);
    for (const auto& [id, edges] : out) {
      if (id == lattice.end) continue;
      double sum = 0.0;
      for (const Edge* e : edges) sum += e->prob;
      if (std::abs(sum - 1.0) > kProbSumTolerance) {
        std::ostringstream msg;
        msg << "outgoing probs of node " << id << " sum to " << sum;
        report(msg.str());
      }
    }
  }

  return violations;
}

std::vector<NodeId> topological_order(const Lattice& lattice) {
  KahnResult kahn = kahn_order(lattice);
  if (!kahn.complete) {
    throw Error("topological ordering failed: cycle detected involving node " +
                std::to_string(kahn.cycle_node));
  }
  return kahn.order;
}

std::map<NodeId, int> longest_path_distance(const Lattice& lattice) {
  std::vector<NodeId> order = topological_order(lattice);
  AdjacencyMap in = incoming_edges(lattice);
  std::map<NodeId, int> ldist;
  for (NodeId id : order) {
    int d = 0;
    for (const Edge* e : in[id]) {
      auto it = ldist.find(e->from);
      if (it != ldist.end()) d = std::max(d, it->second + 1);
    }
    ldist[id] = id == lattice.start ? 0 : d;
  }
  return ldist;
}

std::map<NodeId, double> forward_mass(const Lattice& lattice) {
  std::vector<NodeId> order = topological_order(lattice);
  return mass_from(lattice, lattice.start, order);
}

double path_mass_between(const Lattice& lattice, NodeId from, NodeId to) {
  lattice.node_at(from);
  lattice.node_at(to);
  if (from == to) return 1.0;
  std::vector<NodeId> order = topological_order(lattice);
  return mass_from(lattice, from, order).at(to);
}

double predecessor_prob(const Lattice& lattice, NodeId v_j, NodeId v_i) {
  lattice.node_at(v_j);
  lattice.node_at(v_i);
  if (v_j == v_i) return 1.0;
  std::vector<NodeId> order = topological_order(lattice);
  std::map<NodeId, double> alpha = mass_from(lattice, lattice.start, order);
  double beta = mass_from(lattice, v_j, order).at(v_i);
  if (beta == 0.0) return 0.0;
  return alpha.at(v_j) * beta / alpha.at(v_i);
}

std::set<NodeId> predecessors(const Lattice& lattice, NodeId v) {
  lattice.node_at(v);
  AdjacencyMap in = incoming_edges(lattice);
  std::set<NodeId> result;
  std::vector<NodeId> frontier = {v};
  while (!frontier.empty()) {
    NodeId cur = frontier.back();
    frontier.pop_back();
    for (const Edge* e : in[cur]) {
      if (result.insert(e->from).second) frontier.push_back(e->from);
    }
  }
  result.erase(v);
  return result;
}

std::vector<std::string> one_best_path(const Lattice& lattice) {
  std::vector<NodeId> order = topological_order(lattice);
  AdjacencyMap in = incoming_edges(lattice);
  std::map<NodeId, double> best;
  std::map<NodeId, std::vector<NodeId>> best_path;
  for (NodeId id : order) {
    if (id == lattice.start) {
      best[id] = 1.0;
      best_path[id] = {id};
      continue;
    }
    double top = -1.0;
    std::vector<NodeId> top_path;
    for (const Edge* e : in[id]) {
      auto it = best.find(e->from);
      if (it == best.end()) continue;
      double p = it->second * e->prob;
      const std::vector<NodeId>& through = best_path[e->from];
      if (p > top || (p == top && through < top_path)) {
        top = p;
        top_path = through;
      }
    }
    if (top < 0.0) continue;  // unreachable from start
    top_path.push_back(id);
    best[id] = top;
    best_path[id] = std::move(top_path);
  }
  std::vector<std::string> labels;
  for (NodeId id : best_path.at(lattice.end)) {
    labels.push_back(lattice.node_at(id).label);
  }
  return labels;
}

std::vector<std::string> linearize(const Lattice& lattice) {
  std::vector<std::string> labels;
  for (NodeId id : topological_order(lattice)) {
    labels.push_back(lattice.node_at(id).label);
  }
  return labels;
}

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void position_of(const std::string& text, std::size_t byte, int* line,
                 int* column) {
  *line = 1;
  *column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++*line;
      *column = 1;
    } else {
      ++*column;
    }
  }
}

[[noreturn]] void parse_fail(const std::string& text, const std::string& what,
                             std::size_t byte) {
  int line = 0, column = 0;
  position_of(text, byte, &line, &column);
  std::ostringstream msg;
  msg << "lattice parse error at line " << line << ", column " << column
      << ": " << what;
  throw ParseError(msg.str(), line, column);
}

}  // namespace

Lattice lattice_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte points one past the offending character
    parse_fail(text, e.what(), e.byte > 0 ? e.byte - 1 : 0);
  }
  try {
    if (!doc.is_object()) throw Error("top-level value must be an object");
    for (const auto& [key, _] : doc.items()) {
      if (key != "nodes" && key != "edges" && key != "start" && key != "end") {
        throw Error("unknown top-level key \"" + key + "\"");
      }
    }
    Lattice lattice;
    for (const json& jn : doc.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<NodeId>();
      n.label = jn.at("label").get<std::string>();
      lattice.nodes.push_back(std::move(n));
    }
    for (const json& je : doc.at("edges")) {
      Edge e;
      e.from = je.at("from").get<NodeId>();
      e.to = je.at("to").get<NodeId>();
      e.prob = je.at("prob").get<double>();
      lattice.edges.push_back(e);
    }
    lattice.start = doc.at("start").get<NodeId>();
    lattice.end = doc.at("end").get<NodeId>();
    return lattice;
  } catch (const json::exception& e) {
    throw ParseError(std::string("lattice parse error: ") + e.what(), 0, 0);
  }
}

std::string lattice_to_json(const Lattice& lattice) {
  std::vector<const Node*> nodes;
  for (const Node& n : lattice.nodes) nodes.push_back(&n);
  std::sort(nodes.begin(), nodes.end(),
            [](const Node* a, const Node* b) { return a->id < b->id; });
  std::vector<const Edge*> edges;
  for (const Edge& e : lattice.edges) edges.push_back(&e);
  std::sort(edges.begin(), edges.end(), [](const Edge* a, const Edge* b) {
    return std::tie(a->from, a->to) < std::tie(b->from, b->to);
  });

  ordered_json doc;
  doc["nodes"] = ordered_json::array();
  for (const Node* n : nodes) {
    doc["nodes"].push_back({{"id", n->id}, {"label", n->label}});
  }
  doc["edges"] = ordered_json::array();
  for (const Edge* e : edges) {
    doc["edges"].push_back({{"from", e->from}, {"to", e->to}, {"prob", e->prob}});
  }
  doc["start"] = lattice.start;
  doc["end"] = lattice.end;
  return doc.dump();
}

Lattice load_lattice_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lattice file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return lattice_from_json(buffer.str());
}

}  // namespace latnet
