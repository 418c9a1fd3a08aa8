#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "latnet/masks.hpp"

namespace latnet::ad {

// Handle into a Tape.
struct Var {
  int index = -1;
};

// A minimal reverse-mode tape over dense double matrices. Values are
// recorded op by op during the forward pass; backward() runs the recorded
// closures in reverse and accumulates exact gradients.
//
// Leaves reference parameter storage owned by the caller and write their
// gradients into a caller-provided sink, so a batch can accumulate into one
// gradient buffer without copies. Constants get no gradient at all.
class Tape {
 public:
  Tape();

  // Parameter leaf: value stays external, gradients accumulate into *sink.
  // The pointed-to matrices must outlive the tape; the caller zeroes the
  // sink when it wants fresh gradients. A null sink drops the gradient
  // (evaluation-only forward passes).
  Var leaf(const Eigen::MatrixXd* value, Eigen::MatrixXd* sink);
  Var constant(Eigen::MatrixXd value);

  const Eigen::MatrixXd& value(Var v) const;

  Var matmul(Var a, Var b);     // A B
  Var matmul_bt(Var a, Var b);  // A B^T
  Var add(Var a, Var b);
  Var add_rowvec(Var a, Var row);  // row (1xC) broadcast over rows of a
  Var scale(Var a, double s);
  Var mul_elem_const(Var a, Eigen::MatrixXd factor);
  Var relu(Var a);
  Var layer_norm(Var x, Var gain, Var bias, double eps);
  // softmax over rows of mask.apply(scores); plain row softmax when mask is
  // null. The mask must outlive the tape.
  Var masked_softmax_rows(Var scores, const AttentionMask* mask);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, int start, int len);
  Var slice_rows(Var a, int start, int len);
  Var select_row(Var a, int row);
  Var gather_rows(Var table, std::vector<int> ids);
  // mean over rows of -log softmax(row)[target]; returns 1x1.
  Var cross_entropy_mean(Var logits, std::vector<int> targets);
  // mean over entries of binary cross-entropy between sigmoid(logit) and
  // target in {0,1}; logits and targets are 1xL; returns 1x1.
  Var bce_with_logits_mean(Var logits, Eigen::RowVectorXd targets);

  // Runs reverse accumulation from a 1x1 loss node.
  void backward(Var loss);

 private:
  enum class Kind { kLeaf, kConstant, kOp };

  struct Node {
    Kind kind = Kind::kOp;
    const Eigen::MatrixXd* external = nullptr;
    Eigen::MatrixXd owned;
    Eigen::MatrixXd grad;
    Eigen::MatrixXd* sink = nullptr;
    bool grad_touched = false;
    std::function<void(Tape&)> backprop;
  };

  Var push(Node node);
  Node& at(Var v);
  const Node& at(Var v) const;
  // Matrix to accumulate gradient into; nullptr when the node is a constant.
  Eigen::MatrixXd* grad_accumulator(int index);
  const Eigen::MatrixXd& grad_of(int index) const;

  std::vector<Node> nodes_;
};

}  // namespace latnet::ad
