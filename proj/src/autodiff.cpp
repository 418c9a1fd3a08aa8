#include "latnet/autodiff.hpp"

#include <cmath>
#include <utility>

namespace latnet::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(what);
}

}  // namespace

Tape::Tape() { nodes_.reserve(128); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Node& Tape::at(Var v) {
  require(v.index >= 0 && v.index < static_cast<int>(nodes_.size()),
          "invalid tape handle");
  return nodes_[v.index];
}

const Tape::Node& Tape::at(Var v) const {
  require(v.index >= 0 && v.index < static_cast<int>(nodes_.size()),
          "invalid tape handle");
  return nodes_[v.index];
}

Var Tape::leaf(const Eigen::MatrixXd* value, Eigen::MatrixXd* sink) {
  require(value != nullptr, "leaf needs a value");
  require(sink == nullptr ||
              (sink->rows() == value->rows() && sink->cols() == value->cols()),
          "leaf sink shape mismatch");
  Node n;
  n.kind = Kind::kLeaf;
  n.external = value;
  n.sink = sink;
  return push(std::move(n));
}

Var Tape::constant(Eigen::MatrixXd value) {
  Node n;
  n.kind = Kind::kConstant;
  n.owned = std::move(value);
  return push(std::move(n));
}

const Eigen::MatrixXd& Tape::value(Var v) const {
  const Node& n = at(v);
  return n.external ? *n.external : n.owned;
}

Eigen::MatrixXd* Tape::grad_accumulator(int index) {
  Node& n = nodes_[index];
  if (n.kind == Kind::kConstant) return nullptr;
  if (n.kind == Kind::kLeaf) return n.sink;
  if (!n.grad_touched) {
    n.grad.setZero(n.owned.rows(), n.owned.cols());
    n.grad_touched = true;
  }
  return &n.grad;
}

const Eigen::MatrixXd& Tape::grad_of(int index) const {
  return nodes_[index].grad;
}

Var Tape::matmul(Var a, Var b) {
  const Eigen::MatrixXd& av = value(a);
  const Eigen::MatrixXd& bv = value(b);
  require(av.cols() == bv.rows(), "matmul inner dimension mismatch");
  Node n;
  n.owned.noalias() = av * bv;
  n.backprop = [a, b, out = static_cast<int>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& g = t.grad_of(out);
    if (auto* ga = t.grad_accumulator(a.index)) {
      ga->noalias() += g * t.value(b).transpose();
    }
    if (auto* gb = t.grad_accumulator(b.index)) {
      gb->noalias() += t.value(a).transpose() * g;
    }
  };
  return push(std::move(n));
}

Var Tape::matmul_bt(Var a, Var b) {
  const Eigen::MatrixXd& av = value(a);
  const Eigen::MatrixXd& bv = value(b);
  require(av.cols() == bv.cols(), "matmul_bt inner dimension mismatch");
  Node n;
  n.owned.noalias() = av * bv.transpose();
  n.backprop = [a, b, out = static_cast<int>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& g = t.grad_of(out);
    if (auto* ga = t.grad_accumulator(a.index)) {
      ga->noalias() += g * t.value(b);
    }
    if (auto* gb = t.grad_accumulator(b.index)) {
      gb->noalias() += g.transpose() * t.value(a);
    }
  };
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Eigen::MatrixXd& av = value(a);
  const Eigen::MatrixXd& bv = value(b);
  require(av.rows() == bv.rows() && av.cols() == bv.cols(),
          "add shape mismatch");
  Node n;
  n.owned = av + bv;
  n.backprop = [a, b, out = static_cast<int>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& g = t.grad_of(out);
    if (auto* ga = t.grad_accumulator(a.index)) *ga += g;
    if (auto* gb = t.grad_accumulator(b.index)) *gb += g;
  };
  return push(std::move(n));
}

Var Tape::add_rowvec(Var a, Var row) {
  const Eigen::MatrixXd& av = value(a);
  const Eigen::MatrixXd& rv = value(row);
  require(rv.rows() == 1 && rv.cols() == av.cols(),
          "add_rowvec needs a 1xC row matching a's columns");
  Node n;
  n.owned = av.rowwise() + rv.row(0);
  n.backprop = [a, row, out = static_cast<int>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& g = t.grad_of(out);
    if (auto* ga = t.grad_accumulator(a.index)) *ga += g;
    if (auto* gr = t.grad_accumulator(row.index)) {
      gr->row(0) += g.colwise().sum();
    }
  };
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.owned = value(a) * s;
  n.backprop = [a, s, out = static_cast<int>(nodes_.size())](Tape& t) {
    if (auto* ga = t.grad_accumulator(a.index)) {
      *ga += t.grad_of(out) * s;
    }
  };
  return push(std::move(n));
}

Var Tape::mul_elem_const(Var a, Eigen::MatrixXd factor) {
  const Eigen::MatrixXd& av = value(a);
  require(factor.rows() == av.rows() && factor.cols() == av.cols(),
          "mul_elem_const shape mismatch");
  Node n;
  n.owned = av.cwiseProduct(factor);
  n.backprop = [a, f = std::move(factor),
                out = static_cast<int>(nodes_.size())](Tape& t) {
    if (auto* ga = t.grad_accumulator(a.index)) {
      *ga += t.grad_of(out).cwiseProduct(f);
    }
  };
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n;
  n.owned = value(a).cwiseMax(0.0);
  n.backprop = [a, out = static_cast<int>(nodes_.size())](Tape& t) {
    if (auto* ga = t.grad_accumulator(a.index)) {
      const Eigen::MatrixXd& x = t.value(a);
      const Eigen::MatrixXd& g = t.grad_of(out);
      *ga += (x.array() > 0.0).select(g, Eigen::MatrixXd::Zero(g.rows(), g.cols()));
    }
  };
  return push(std::move(n));
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Eigen::MatrixXd& xv = value(x);
  const Eigen::MatrixXd& gv = value(gain);
  const Eigen::MatrixXd& bv = value(bias);
  require(gv.rows() == 1 && gv.cols() == xv.cols(), "layer_norm gain shape");
  require(bv.rows() == 1 && bv.cols() == xv.cols(), "layer_norm bias shape");
  const int rows = static_cast<int>(xv.rows());
  const int cols = static_cast<int>(xv.cols());

  Eigen::MatrixXd normalized(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (int r = 0; r < rows; ++r) {
    double mean = xv.row(r).mean();
    double var = (xv.row(r).array() - mean).square().sum() / cols;
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normalized.row(r) = (xv.row(r).array() - mean) * inv_std(r);
  }
  Node n;
  n.owned = (normalized.array().rowwise() * gv.row(0).array()).rowwise() +
            bv.row(0).array();
  n.backprop = [x, gain, bias, normalized, inv_std,
                out = static_cast<int>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& g = t.grad_of(out);
    const Eigen::MatrixXd& gv_ = t.value(gain);
    const int rows = static_cast<int>(g.rows());
    if (auto* gb = t.grad_accumulator(bias.index)) {
      gb->row(0) += g.colwise().sum();
    }
    if (auto* gg = t.grad_accumulator(gain.index)) {
      gg->row(0) += g.cwiseProduct(normalized).colwise().sum();
    }
    if (auto* gx = t.grad_accumulator(x.index)) {
      for (int r = 0; r < rows; ++r) {
        Eigen::RowVectorXd dy = g.row(r).cwiseProduct(gv_.row(0));
        double mean_dy = dy.mean();
        double mean_dy_xhat = dy.cwiseProduct(normalized.row(r)).mean();
        gx->row(r) += inv_std(r) *
                      (dy.array() - mean_dy -
                       normalized.row(r).array() * mean_dy_xhat)
                          .matrix();
      }
    }
  };
  return push(std::move(n));
}

Var Tape::masked_softmax_rows(Var scores, const AttentionMask* mask) {
  const Eigen::MatrixXd& sv = value(scores);
  Eigen::MatrixXd shifted =
      mask != nullptr ? mask->apply(sv) : sv;
  const int rows = static_cast<int>(shifted.rows());
  Node n;
  n.owned.resize(shifted.rows(), shifted.cols());
  for (int r = 0; r < rows; ++r) {
    Eigen::RowVectorXd e =
        (shifted.row(r).array() - shifted.row(r).maxCoeff()).exp();
    n.owned.row(r) = e / e.sum();
  }
  n.backprop = [scores, mask, out = static_cast<int>(nodes_.size())](Tape& t) {
    auto* gs = t.grad_accumulator(scores.index);
    if (!gs) return;
    const Eigen::MatrixXd& p = t.value(Var{out});
    const Eigen::MatrixXd& g = t.grad_of(out);
    for (int r = 0; r < p.rows(); ++r) {
      double dot = g.row(r).dot(p.row(r));
      Eigen::RowVectorXd ds =
          p.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
      if (mask != nullptr) {
        for (int j = 0; j < p.cols(); ++j) {
          if (mask->is_masked(r, j)) ds(j) = 0.0;
        }
      }
      gs->row(r) += ds;
    }
  };
  return push(std::move(n));
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols needs at least one part");
  const Eigen::Index rows = value(parts.front()).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    require(value(p).rows() == rows, "concat_cols row mismatch");
    cols += value(p).cols();
  }
  Node n;
  n.owned.resize(rows, cols);
  Eigen::Index offset = 0;
  for (Var p : parts) {
    n.owned.middleCols(offset, value(p).cols()) = value(p);
    offset += value(p).cols();
  }
  n.backprop = [parts, out = static_cast<int>(nodes_.size())](Tape& t) {
    const Eigen::MatrixXd& g = t.grad_of(out);
    Eigen::Index offset = 0;
    for (Var p : parts) {
      Eigen::Index w = t.value(p).cols();
      if (auto* gp = t.grad_accumulator(p.index)) {
        *gp += g.middleCols(offset, w);
      }
      offset += w;
    }
  };
  return push(std::move(n));
}

Var Tape::slice_cols(Var a, int start, int len) {
  const Eigen::MatrixXd& av = value(a);
  require(start >= 0 && len >= 1 && start + len <= av.cols(),
          "slice_cols out of range");
  Node n;
  n.owned = av.middleCols(start, len);
  n.backprop = [a, start, len, out = static_cast<int>(nodes_.size())](Tape& t) {
    if (auto* ga = t.grad_accumulator(a.index)) {
      ga->middleCols(start, len) += t.grad_of(out);
    }
  };
  return push(std::move(n));
}

Var Tape::slice_rows(Var a, int start, int len) {
  const Eigen::MatrixXd& av = value(a);
  require(start >= 0 && len >= 1 && start + len <= av.rows(),
          "slice_rows out of range");
  Node n;
  n.owned = av.middleRows(start, len);
  n.backprop = [a, start, len, out = static_cast<int>(nodes_.size())](Tape& t) {
    if (auto* ga = t.grad_accumulator(a.index)) {
      ga->middleRows(start, len) += t.grad_of(out);
    }
  };
  return push(std::move(n));
}

Var Tape::select_row(Var a, int row) {
  return slice_rows(a, row, 1);
}

Var Tape::gather_rows(Var table, std::vector<int> ids) {
  const Eigen::MatrixXd& tv = value(table);
  for (int id : ids) {
    require(id >= 0 && id < tv.rows(), "gather_rows id out of range");
  }
  Node n;
  n.owned.resize(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    n.owned.row(static_cast<Eigen::Index>(k)) = tv.row(ids[k]);
  }
  n.backprop = [table, ids = std::move(ids),
                out = static_cast<int>(nodes_.size())](Tape& t) {
    if (auto* gt = t.grad_accumulator(table.index)) {
      const Eigen::MatrixXd& g = t.grad_of(out);
      for (std::size_t k = 0; k < ids.size(); ++k) {
        gt->row(ids[k]) += g.row(static_cast<Eigen::Index>(k));
      }
    }
  };
  return push(std::move(n));
}

Var Tape::cross_entropy_mean(Var logits, std::vector<int> targets) {
  const Eigen::MatrixXd& lv = value(logits);
  require(static_cast<Eigen::Index>(targets.size()) == lv.rows(),
          "cross_entropy_mean needs one target per row");
  for (int tgt : targets) {
    require(tgt >= 0 && tgt < lv.cols(), "cross_entropy target out of range");
  }
  const int rows = static_cast<int>(lv.rows());
  Eigen::MatrixXd probs(lv.rows(), lv.cols());
  double total = 0.0;
  for (int r = 0; r < rows; ++r) {
    double mx = lv.row(r).maxCoeff();
    Eigen::RowVectorXd e = (lv.row(r).array() - mx).exp();
    double z = e.sum();
    probs.row(r) = e / z;
    total += std::log(z) + mx - lv(r, targets[static_cast<std::size_t>(r)]);
  }
  Node n;
  n.owned = Eigen::MatrixXd::Constant(1, 1, total / rows);
  n.backprop = [logits, targets = std::move(targets), probs, rows,
                out = static_cast<int>(nodes_.size())](Tape& t) {
    if (auto* gl = t.grad_accumulator(logits.index)) {
      double g = t.grad_of(out)(0, 0) / rows;
      for (int r = 0; r < rows; ++r) {
        gl->row(r) += probs.row(r) * g;
        (*gl)(r, targets[static_cast<std::size_t>(r)]) -= g;
      }
    }
  };
  return push(std::move(n));
}

Var Tape::bce_with_logits_mean(Var logits, Eigen::RowVectorXd targets) {
  const Eigen::MatrixXd& lv = value(logits);
  require(lv.rows() == 1 && lv.cols() == targets.cols(),
          "bce_with_logits_mean needs 1xL logits matching targets");
  const int count = static_cast<int>(lv.cols());
  double total = 0.0;
  for (int j = 0; j < count; ++j) {
    double z = lv(0, j);
    double y = targets(j);
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  Node n;
  n.owned = Eigen::MatrixXd::Constant(1, 1, total / count);
  n.backprop = [logits, targets = std::move(targets), count,
                out = static_cast<int>(nodes_.size())](Tape& t) {
    if (auto* gl = t.grad_accumulator(logits.index)) {
      double g = t.grad_of(out)(0, 0) / count;
      const Eigen::MatrixXd& lv_ = t.value(logits);
      for (int j = 0; j < count; ++j) {
        double sig = 1.0 / (1.0 + std::exp(-lv_(0, j)));
        (*gl)(0, j) += (sig - targets(j)) * g;
      }
    }
  };
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  Node& l = at(loss);
  require(l.kind == Kind::kOp, "backward needs an op node");
  require(l.owned.rows() == 1 && l.owned.cols() == 1,
          "backward starts from a 1x1 loss");
  l.grad = Eigen::MatrixXd::Ones(1, 1);
  l.grad_touched = true;
  for (int i = loss.index; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.kind != Kind::kOp || !n.grad_touched) continue;
    if (n.backprop) n.backprop(*this);
  }
}

}  // namespace latnet::ad
