#include "latnet/masks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

namespace latnet {

namespace {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// The order must be a permutation of the lattice's node ids that respects
// every edge; anything else would silently misalign rows and columns.
void check_order(const Lattice& lattice, const std::vector<NodeId>& order) {
  std::map<NodeId, int> position;
  for (int i = 0; i < static_cast<int>(order.size()); ++i) {
    if (!position.emplace(order[i], i).second) {
      throw Error("mask order repeats node id " + std::to_string(order[i]));
    }
  }
  if (position.size() != lattice.nodes.size()) {
    throw Error("mask order has " + std::to_string(position.size()) +
                " ids, lattice has " + std::to_string(lattice.nodes.size()) +
                " nodes");
  }
  for (const Node& n : lattice.nodes) {
    if (!position.count(n.id)) {
      throw Error("mask order is missing node id " + std::to_string(n.id));
    }
  }
  for (const Edge& e : lattice.edges) {
    if (position.at(e.from) >= position.at(e.to)) {
      throw Error("mask order violates edge " + std::to_string(e.from) +
                  "->" + std::to_string(e.to));
    }
  }
}

}  // namespace

AttentionMask::AttentionMask(std::vector<NodeId> order, Eigen::MatrixXd values,
                             BoolMatrix masked)
    : order_(std::move(order)),
      values_(std::move(values)),
      masked_(std::move(masked)) {
  const int n = static_cast<int>(order_.size());
  if (values_.rows() != n || values_.cols() != n || masked_.rows() != n ||
      masked_.cols() != n) {
    throw Error("attention mask storage does not match order length");
  }
}

Eigen::MatrixXd AttentionMask::apply(const Eigen::MatrixXd& logits) const {
  const int n = size();
  if (logits.rows() != n || logits.cols() != n) {
    throw Error("mask of size " + std::to_string(n) +
                " applied to logits of shape " + std::to_string(logits.rows()) +
                "x" + std::to_string(logits.cols()));
  }
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out(i, j) = masked_(i, j) ? kMaskedLogit : logits(i, j) + values_(i, j);
    }
  }
  return out;
}

std::string AttentionMask::to_json() const {
  nlohmann::ordered_json doc;
  doc["order"] = order_;
  auto entries = nlohmann::ordered_json::array();
  for (int i = 0; i < size(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (int j = 0; j < size(); ++j) {
      if (masked_(i, j)) {
        row.push_back(nullptr);
      } else {
        row.push_back(values_(i, j));
      }
    }
    entries.push_back(std::move(row));
  }
  doc["entries"] = std::move(entries);
  return doc.dump();
}

bool AttentionMask::operator==(const AttentionMask& other) const {
  if (order_ != other.order_) return false;
  for (int i = 0; i < size(); ++i) {
    for (int j = 0; j < size(); ++j) {
      if (masked_(i, j) != other.masked_(i, j)) return false;
      if (!masked_(i, j) && values_(i, j) != other.values_(i, j)) return false;
    }
  }
  return true;
}

AttentionMask causal_mask(int n) {
  if (n < 1) throw Error("causal mask needs n >= 1");
  std::vector<NodeId> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n, n);
  BoolMatrix masked(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) masked(i, j) = j > i;
  }
  return AttentionMask(std::move(order), std::move(values), std::move(masked));
}

AttentionMask binary_mask(const Lattice& lattice,
                          const std::vector<NodeId>& order) {
  check_order(lattice, order);
  const int n = static_cast<int>(order.size());
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n, n);
  BoolMatrix masked = BoolMatrix::Constant(n, n, true);
  for (int i = 0; i < n; ++i) {
    std::set<NodeId> pre = predecessors(lattice, order[i]);
    for (int j = 0; j < n; ++j) {
      if (i == j || pre.count(order[j])) masked(i, j) = false;
    }
  }
  return AttentionMask(order, std::move(values), std::move(masked));
}

AttentionMask prob_mask(const Lattice& lattice,
                        const std::vector<NodeId>& order) {
  check_order(lattice, order);
  const int n = static_cast<int>(order.size());
  std::map<NodeId, int> position;
  for (int i = 0; i < n; ++i) position[order[i]] = i;
  std::vector<std::vector<std::pair<int, double>>> out_by_index(n),
      in_by_index(n);
  for (const Edge& e : lattice.edges) {
    int u = position.at(e.from), v = position.at(e.to);
    out_by_index[u].push_back({v, e.prob});
    in_by_index[v].push_back({u, e.prob});
  }

  // alpha[v] = path mass from start; order respects edges, so a single
  // ascending sweep suffices.
  std::vector<double> alpha(n, 0.0);
  for (int v = 0; v < n; ++v) {
    if (order[v] == lattice.start) {
      alpha[v] = 1.0;
      continue;
    }
    for (const auto& [u, p] : in_by_index[v]) alpha[v] += alpha[u] * p;
  }

  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n, n);
  BoolMatrix masked = BoolMatrix::Constant(n, n, true);
  std::vector<double> beta(n);
  for (int i = 0; i < n; ++i) {
    masked(i, i) = false;
    // beta[j] = path mass from node j to node i.
    std::fill(beta.begin(), beta.end(), 0.0);
    beta[i] = 1.0;
    for (int u = i - 1; u >= 0; --u) {
      for (const auto& [w, p] : out_by_index[u]) beta[u] += p * beta[w];
    }
    for (int j = 0; j < i; ++j) {
      double mass = alpha[j] * beta[j];
      if (mass == 0.0) continue;
      double p = mass / alpha[i];
      masked(i, j) = false;
      // rounding in the mass ratio can push p a hair past 1
      values(i, j) = std::min(0.0, std::log(p));
    }
  }
  return AttentionMask(order, std::move(values), std::move(masked));
}

}  // namespace latnet
