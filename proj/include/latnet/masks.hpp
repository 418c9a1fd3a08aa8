#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "latnet/lattice.hpp"

namespace latnet {

// Additive attention mask over a fixed node ordering. Row i is the query
// node, column j the key node. Entries are either MASKED or a log-domain
// value <= 0; MASKED becomes a finite -1e9 when applied to logits so that
// softmax never sees NaN.
class AttentionMask {
 public:
  static constexpr double kMaskedLogit = -1e9;

  AttentionMask() = default;  // empty mask, size 0
  AttentionMask(std::vector<NodeId> order, Eigen::MatrixXd values,
                Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> masked);

  int size() const { return static_cast<int>(order_.size()); }
  const std::vector<NodeId>& order() const { return order_; }

  bool is_masked(int i, int j) const { return masked_(i, j); }
  double value(int i, int j) const { return values_(i, j); }

  // logit + value where unmasked, -1e9 where masked.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& logits) const;

  // {"order":[ids],"entries":[[value-or-null]]}, null = MASKED.
  std::string to_json() const;

  bool operator==(const AttentionMask& other) const;

 private:
  std::vector<NodeId> order_;
  Eigen::MatrixXd values_;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> masked_;
};

// Lower-triangular sequence mask: (i, j) unmasked with value 0 iff j <= i.
AttentionMask causal_mask(int n);

// (i, j) = 0 iff node_j is a predecessor of node_i or i == j.
AttentionMask binary_mask(const Lattice& lattice,
                          const std::vector<NodeId>& order);

// (i, j) = log predecessor_prob(node_j, node_i) for strict predecessors,
// 0 on the diagonal, MASKED otherwise.
AttentionMask prob_mask(const Lattice& lattice,
                        const std::vector<NodeId>& order);

}  // namespace latnet
