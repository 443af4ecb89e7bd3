#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "grids/detail/linalg.hpp"
#include "grids/parameter_store.hpp"
#include "grids/rng.hpp"
#include "grids/sampler.hpp"

namespace grids {

namespace names {
inline constexpr std::string_view kQueryToken = "policy.query";    // d
inline constexpr std::string_view kWq = "policy.wq";               // d x d
inline constexpr std::string_view kWk = "policy.wk";               // d x d
inline constexpr std::string_view kWv = "policy.wv";               // d x d
inline constexpr std::string_view kWo = "policy.wo";               // d x d
inline constexpr std::string_view kFfnW1 = "policy.ffn_w1";        // d x e*d
inline constexpr std::string_view kFfnB1 = "policy.ffn_b1";        // e*d
inline constexpr std::string_view kFfnW2 = "policy.ffn_w2";        // e*d x d
inline constexpr std::string_view kFfnB2 = "policy.ffn_b2";        // d
inline constexpr std::string_view kHeadW = "policy.head_w";        // d x out
inline constexpr std::string_view kHeadB = "policy.head_b";        // out
}  // namespace names

struct PolicyConfig {
  std::size_t model_dim = 32;  // must equal the grid's channel count
  std::size_t ffn_expand = 4;
  std::size_t out_dim = 2;

  void validate() const;
};

void init_policy_params(ParameterStore& params, const PolicyConfig& cfg, Rng& rng);

/// Activations of one single-head attention block over [query; tokens].
struct PolicyTape {
  detail::Mat x;       // (K+1) x d input, row 0 is the learned query token
  detail::Mat q, k, v;
  detail::Mat attn;    // (K+1) x (K+1) row-softmax
  detail::Mat o;       // attn * v
  detail::Mat y1;      // x + o Wo
  detail::Mat hidden;  // tanh(y1 W1 + b1)
  detail::Mat y2;      // y1 + hidden W2 + b2, the block output

  std::vector<float> prediction;  // filled by head_and_loss
  std::vector<float> target;
  double loss = 0.0;
};

// tokens: K x d, K may be zero.
PolicyTape attention_forward(std::span<const float> tokens, std::size_t count,
                             const ParameterStore& params, const PolicyConfig& cfg);

struct HeadResult {
  std::vector<float> prediction;
  double loss = 0.0;
};

// sigmoid(Wh^T y2[0] + bh) and its mean squared error against target.
HeadResult head_and_loss(PolicyTape& tape, const ParameterStore& params, const PolicyConfig& cfg,
                         Coord target);

// Accumulates parameter gradients for d_loss * dLoss and returns dLoss/dinput,
// (K+1) x d, row 0 being the query token.
detail::Mat policy_backward(const PolicyTape& tape, float d_loss, ParameterStore& params,
                            const PolicyConfig& cfg);

}  // namespace grids
