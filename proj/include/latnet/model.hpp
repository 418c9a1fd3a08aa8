#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "latnet/autodiff.hpp"
#include "latnet/masks.hpp"

namespace latnet {

struct ModelConfig {
  int n_layers = 2;
  int n_heads = 4;
  int d_model = 64;
  int d_ff = 128;
  int vocab_size = 0;
  int max_position = 0;
  int n_labels = 0;
  double dropout_rate = 0.0;

  int d_k() const { return d_model / n_heads; }
  void check() const;  // throws Error on inconsistent dimensions
};

// One encoder block: attention projections, FFN, and the two layer norms.
struct BlockParams {
  Eigen::MatrixXd wq, wk, wv, wo;              // d_model x d_model
  Eigen::MatrixXd w1, b1, w2, b2;              // see ffn shapes
  Eigen::MatrixXd ln1_g, ln1_b, ln2_g, ln2_b;  // 1 x d_model
};

struct ModelParams {
  Eigen::MatrixXd embed_token;  // vocab_size x d_model
  Eigen::MatrixXd embed_pos;    // max_position x d_model
  std::vector<BlockParams> blocks;
  Eigen::MatrixXd w_y;  // n_labels x d_model
  Eigen::MatrixXd b_y;  // 1 x n_labels

  // Gaussian(0, 0.02) weights, zero biases, unit layer-norm gains; the fill
  // order is fixed so a seed pins every entry.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);
  static ModelParams zeros_like(const ModelParams& other);

  // Visits every tensor as (name, matrix), names stable across runs.
  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("embed_token", embed_token);
    fn("embed_pos", embed_pos);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      std::string p = "block" + std::to_string(i) + ".";
      BlockParams& b = blocks[i];
      fn(p + "wq", b.wq); fn(p + "wk", b.wk); fn(p + "wv", b.wv);
      fn(p + "wo", b.wo);
      fn(p + "w1", b.w1); fn(p + "b1", b.b1);
      fn(p + "w2", b.w2); fn(p + "b2", b.b2);
      fn(p + "ln1_g", b.ln1_g); fn(p + "ln1_b", b.ln1_b);
      fn(p + "ln2_g", b.ln2_g); fn(p + "ln2_b", b.ln2_b);
    }
    fn("w_y", w_y);
    fn("b_y", b_y);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    const_cast<ModelParams*>(this)->for_each(
        [&fn](const std::string& name, const Eigen::MatrixXd& m) {
          fn(name, m);
        });
  }

  bool all_finite() const;
};

// One model input: token ids, position indices (longest-path distances for
// lattices, 0..n-1 for plain sequences), the attention mask over the same
// ordering, and the index whose final hidden state feeds the classifier.
struct EncodedInput {
  std::vector<int> token_ids;
  std::vector<int> positions;
  AttentionMask mask;
  int classify_index = 0;

  int length() const { return static_cast<int>(token_ids.size()); }
  void check(const ModelConfig& config) const;  // throws Error
};

// Tape handles for every parameter tensor. Bind once per tape; with a null
// grads pointer the forward pass is evaluation-only.
struct BlockVars {
  ad::Var wq, wk, wv, wo, w1, b1, w2, b2, ln1_g, ln1_b, ln2_g, ln2_b;
};
struct ParamVars {
  ad::Var embed_token, embed_pos;
  std::vector<BlockVars> blocks;
  ad::Var w_y, b_y;

  static ParamVars bind(ad::Tape& tape, const ModelParams& params,
                        ModelParams* grads);
};

// Dropout switch for training-time forward passes: inverted dropout with
// rate from the config, randomness from *rng. Null rng or rate 0 disables.
struct ForwardOptions {
  double dropout_rate = 0.0;
  std::mt19937_64* rng = nullptr;
  bool active() const { return dropout_rate > 0.0 && rng != nullptr; }
};

inline constexpr double kLayerNormEps = 1e-5;

// X^1_i = embed_token[w_i] + embed_pos[position_i].
ad::Var embed(ad::Tape& tape, const ParamVars& pv, const EncodedInput& input);

// softmax(Q K^T / sqrt(d_k) + mask) V. Null mask = unmasked attention.
ad::Var attention(ad::Tape& tape, ad::Var q, ad::Var k, ad::Var v,
                  const AttentionMask* mask, int d_k);

// Concat over heads of attention on per-head slices, then W^O.
ad::Var multi_head(ad::Tape& tape, ad::Var x, const BlockVars& bv,
                   const AttentionMask* mask, const ModelConfig& config);

// max(0, x W_1 + b_1) W_2 + b_2 per row.
ad::Var ffn(ad::Tape& tape, ad::Var x, const BlockVars& bv);

// H = LN(MultiHead(X) + X); X' = LN(FFN(H) + H).
ad::Var encoder_block(ad::Tape& tape, ad::Var x, const BlockVars& bv,
                      const AttentionMask* mask, const ModelConfig& config,
                      const ForwardOptions& opts = {});

// Embedding plus n_layers encoder blocks, the same mask at every block.
// `input` must outlive the tape (the mask is captured by reference).
ad::Var encode(ad::Tape& tape, const ParamVars& pv, const EncodedInput& input,
               const ModelConfig& config, const ForwardOptions& opts = {});

// W_y h + b at one row of the final hidden sequence; 1 x n_labels.
ad::Var classify_logits(ad::Tape& tape, ad::Var hidden, int classify_index,
                        const ParamVars& pv);

// Mean over positions t >= 1 of -log softmax(hidden[t-1] W_LM)[w_t], the LM
// head weight-tied to the token embedding. Needs length >= 2.
ad::Var lm_loss(ad::Tape& tape, ad::Var hidden,
                const std::vector<int>& token_ids, const ParamVars& pv);

// Mean over labels of BCE between sigmoid(logit) and membership.
ad::Var classification_loss(ad::Tape& tape, ad::Var logits,
                            const std::vector<int>& positive_labels,
                            int n_labels);

// Evaluation-only wrappers (no gradients).
Eigen::MatrixXd encode_eval(const ModelParams& params,
                            const ModelConfig& config,
                            const EncodedInput& input);
Eigen::RowVectorXd classify_eval(const ModelParams& params,
                                 const ModelConfig& config,
                                 const EncodedInput& input);
double lm_loss_eval(const ModelParams& params, const ModelConfig& config,
                    const EncodedInput& input);
double classification_loss_eval(const ModelParams& params,
                                const ModelConfig& config,
                                const EncodedInput& input,
                                const std::vector<int>& positive_labels);

}  // namespace latnet
