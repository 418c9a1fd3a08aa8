#include "latnet/model.hpp"

#include <cmath>

#include "latnet/lattice.hpp"

namespace latnet {

using ad::Tape;
using ad::Var;

void ModelConfig::check() const {
  if (n_layers < 0) throw Error("n_layers must be >= 0");
  if (n_heads < 1 || d_model < 1 || d_ff < 1) {
    throw Error("n_heads, d_model and d_ff must be >= 1");
  }
  if (d_model % n_heads != 0) {
    throw Error("d_model must be divisible by n_heads");
  }
  if (vocab_size < 1) throw Error("vocab_size must be >= 1");
  if (max_position < 1) throw Error("max_position must be >= 1");
  if (n_labels < 1) throw Error("n_labels must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw Error("dropout_rate must be in [0, 1)");
  }
}

namespace {

void fill_gaussian(Eigen::MatrixXd& m, std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> dist(0.0, sigma);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  }
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  config.check();
  std::mt19937_64 rng(seed);
  const double sigma = 0.02;
  const int d = config.d_model;

  ModelParams p;
  p.embed_token.resize(config.vocab_size, d);
  fill_gaussian(p.embed_token, rng, sigma);
  p.embed_pos.resize(config.max_position, d);
  fill_gaussian(p.embed_pos, rng, sigma);
  p.blocks.resize(config.n_layers);
  for (BlockParams& b : p.blocks) {
    b.wq.resize(d, d); fill_gaussian(b.wq, rng, sigma);
    b.wk.resize(d, d); fill_gaussian(b.wk, rng, sigma);
    b.wv.resize(d, d); fill_gaussian(b.wv, rng, sigma);
    b.wo.resize(d, d); fill_gaussian(b.wo, rng, sigma);
    b.w1.resize(d, config.d_ff); fill_gaussian(b.w1, rng, sigma);
    b.b1 = Eigen::MatrixXd::Zero(1, config.d_ff);
    b.w2.resize(config.d_ff, d); fill_gaussian(b.w2, rng, sigma);
    b.b2 = Eigen::MatrixXd::Zero(1, d);
    b.ln1_g = Eigen::MatrixXd::Ones(1, d);
    b.ln1_b = Eigen::MatrixXd::Zero(1, d);
    b.ln2_g = Eigen::MatrixXd::Ones(1, d);
    b.ln2_b = Eigen::MatrixXd::Zero(1, d);
  }
  p.w_y.resize(config.n_labels, d);
  fill_gaussian(p.w_y, rng, sigma);
  p.b_y = Eigen::MatrixXd::Zero(1, config.n_labels);
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams z = other;
  z.for_each([](const std::string&, Eigen::MatrixXd& m) { m.setZero(); });
  return z;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each([&ok](const std::string&, const Eigen::MatrixXd& m) {
    ok = ok && m.allFinite();
  });
  return ok;
}

void EncodedInput::check(const ModelConfig& config) const {
  const int n = length();
  if (n == 0) throw Error("empty encoded input");
  if (positions.size() != token_ids.size()) {
    throw Error("token/position length mismatch");
  }
  if (mask.size() != n) throw Error("mask size does not match input length");
  if (classify_index < 0 || classify_index >= n) {
    throw Error("classify_index out of range");
  }
  for (int id : token_ids) {
    if (id < 0 || id >= config.vocab_size) throw Error("token id out of range");
  }
  for (int pos : positions) {
    if (pos < 0 || pos >= config.max_position) {
      throw Error("position exceeds max_position");
    }
  }
}

ParamVars ParamVars::bind(Tape& tape, const ModelParams& params,
                          ModelParams* grads) {
  auto bind_one = [&](const Eigen::MatrixXd& value,
                      Eigen::MatrixXd* sink) -> Var {
    return tape.leaf(&value, sink);
  };
  ParamVars pv;
  pv.embed_token = bind_one(params.embed_token,
                            grads ? &grads->embed_token : nullptr);
  pv.embed_pos = bind_one(params.embed_pos,
                          grads ? &grads->embed_pos : nullptr);
  pv.blocks.resize(params.blocks.size());
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    const BlockParams& b = params.blocks[i];
    BlockParams* g = grads ? &grads->blocks[i] : nullptr;
    BlockVars& v = pv.blocks[i];
    v.wq = bind_one(b.wq, g ? &g->wq : nullptr);
    v.wk = bind_one(b.wk, g ? &g->wk : nullptr);
    v.wv = bind_one(b.wv, g ? &g->wv : nullptr);
    v.wo = bind_one(b.wo, g ? &g->wo : nullptr);
    v.w1 = bind_one(b.w1, g ? &g->w1 : nullptr);
    v.b1 = bind_one(b.b1, g ? &g->b1 : nullptr);
    v.w2 = bind_one(b.w2, g ? &g->w2 : nullptr);
    v.b2 = bind_one(b.b2, g ? &g->b2 : nullptr);
    v.ln1_g = bind_one(b.ln1_g, g ? &g->ln1_g : nullptr);
    v.ln1_b = bind_one(b.ln1_b, g ? &g->ln1_b : nullptr);
    v.ln2_g = bind_one(b.ln2_g, g ? &g->ln2_g : nullptr);
    v.ln2_b = bind_one(b.ln2_b, g ? &g->ln2_b : nullptr);
  }
  pv.w_y = bind_one(params.w_y, grads ? &grads->w_y : nullptr);
  pv.b_y = bind_one(params.b_y, grads ? &grads->b_y : nullptr);
  return pv;
}

namespace {

// Inverted dropout: zero with probability rate, scale survivors by
// 1/(1-rate) so the expectation is unchanged.
Var maybe_dropout(Tape& tape, Var x, const ForwardOptions& opts) {
  if (!opts.active()) return x;
  const Eigen::MatrixXd& v = tape.value(x);
  std::bernoulli_distribution keep(1.0 - opts.dropout_rate);
  Eigen::MatrixXd gate(v.rows(), v.cols());
  const double scale = 1.0 / (1.0 - opts.dropout_rate);
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      gate(r, c) = keep(*opts.rng) ? scale : 0.0;
    }
  }
  return tape.mul_elem_const(x, std::move(gate));
}

}  // namespace

Var embed(Tape& tape, const ParamVars& pv, const EncodedInput& input) {
  Var tok = tape.gather_rows(pv.embed_token, input.token_ids);
  Var pos = tape.gather_rows(pv.embed_pos, input.positions);
  return tape.add(tok, pos);
}

Var attention(Tape& tape, Var q, Var k, Var v, const AttentionMask* mask,
              int d_k) {
  Var scores = tape.scale(tape.matmul_bt(q, k), 1.0 / std::sqrt((double)d_k));
  Var weights = tape.masked_softmax_rows(scores, mask);
  return tape.matmul(weights, v);
}

Var multi_head(Tape& tape, Var x, const BlockVars& bv,
               const AttentionMask* mask, const ModelConfig& config) {
  Var q = tape.matmul(x, bv.wq);
  Var k = tape.matmul(x, bv.wk);
  Var v = tape.matmul(x, bv.wv);
  const int dk = config.d_k();
  std::vector<Var> heads;
  heads.reserve(config.n_heads);
  for (int h = 0; h < config.n_heads; ++h) {
    heads.push_back(attention(tape, tape.slice_cols(q, h * dk, dk),
                              tape.slice_cols(k, h * dk, dk),
                              tape.slice_cols(v, h * dk, dk), mask, dk));
  }
  Var cat = config.n_heads == 1 ? heads[0] : tape.concat_cols(heads);
  return tape.matmul(cat, bv.wo);
}

Var ffn(Tape& tape, Var x, const BlockVars& bv) {
  Var hidden = tape.relu(tape.add_rowvec(tape.matmul(x, bv.w1), bv.b1));
  return tape.add_rowvec(tape.matmul(hidden, bv.w2), bv.b2);
}

Var encoder_block(Tape& tape, Var x, const BlockVars& bv,
                  const AttentionMask* mask, const ModelConfig& config,
                  const ForwardOptions& opts) {
  Var att = maybe_dropout(tape, multi_head(tape, x, bv, mask, config), opts);
  Var h = tape.layer_norm(tape.add(att, x), bv.ln1_g, bv.ln1_b, kLayerNormEps);
  Var ff = maybe_dropout(tape, ffn(tape, h, bv), opts);
  return tape.layer_norm(tape.add(ff, h), bv.ln2_g, bv.ln2_b, kLayerNormEps);
}

Var encode(Tape& tape, const ParamVars& pv, const EncodedInput& input,
           const ModelConfig& config, const ForwardOptions& opts) {
  Var x = maybe_dropout(tape, embed(tape, pv, input), opts);
  for (const BlockVars& bv : pv.blocks) {
    x = encoder_block(tape, x, bv, &input.mask, config, opts);
  }
  return x;
}

Var classify_logits(Tape& tape, ad::Var hidden, int classify_index,
                    const ParamVars& pv) {
  Var h = tape.select_row(hidden, classify_index);
  return tape.add_rowvec(tape.matmul_bt(h, pv.w_y), pv.b_y);
}

Var lm_loss(Tape& tape, ad::Var hidden, const std::vector<int>& token_ids,
            const ParamVars& pv) {
  const int n = static_cast<int>(token_ids.size());
  if (n < 2) throw Error("lm loss needs a sequence of length >= 2");
  Var contexts = tape.slice_rows(hidden, 0, n - 1);
  Var logits = tape.matmul_bt(contexts, pv.embed_token);
  std::vector<int> targets(token_ids.begin() + 1, token_ids.end());
  return tape.cross_entropy_mean(logits, std::move(targets));
}

Var classification_loss(Tape& tape, ad::Var logits,
                        const std::vector<int>& positive_labels,
                        int n_labels) {
  if (n_labels < 1) throw Error("classification needs n_labels >= 1");
  Eigen::RowVectorXd targets = Eigen::RowVectorXd::Zero(n_labels);
  for (int label : positive_labels) {
    if (label < 0 || label >= n_labels) throw Error("label id out of range");
    targets(label) = 1.0;
  }
  return tape.bce_with_logits_mean(logits, std::move(targets));
}

Eigen::MatrixXd encode_eval(const ModelParams& params,
                            const ModelConfig& config,
                            const EncodedInput& input) {
  input.check(config);
  Tape tape;
  ParamVars pv = ParamVars::bind(tape, params, nullptr);
  return tape.value(encode(tape, pv, input, config));
}

Eigen::RowVectorXd classify_eval(const ModelParams& params,
                                 const ModelConfig& config,
                                 const EncodedInput& input) {
  input.check(config);
  Tape tape;
  ParamVars pv = ParamVars::bind(tape, params, nullptr);
  Var hidden = encode(tape, pv, input, config);
  return tape.value(classify_logits(tape, hidden, input.classify_index, pv));
}

double lm_loss_eval(const ModelParams& params, const ModelConfig& config,
                    const EncodedInput& input) {
  input.check(config);
  Tape tape;
  ParamVars pv = ParamVars::bind(tape, params, nullptr);
  Var hidden = encode(tape, pv, input, config);
  return tape.value(lm_loss(tape, hidden, input.token_ids, pv))(0, 0);
}

double classification_loss_eval(const ModelParams& params,
                                const ModelConfig& config,
                                const EncodedInput& input,
                                const std::vector<int>& positive_labels) {
  input.check(config);
  Tape tape;
  ParamVars pv = ParamVars::bind(tape, params, nullptr);
  Var hidden = encode(tape, pv, input, config);
  Var logits = classify_logits(tape, hidden, input.classify_index, pv);
  return tape.value(
      classification_loss(tape, logits, positive_labels, config.n_labels))(0,
                                                                           0);
}

}  // namespace latnet
