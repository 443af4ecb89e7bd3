#include "grids/flops.hpp"

#include "grids/errors.hpp"

namespace grids {

namespace {

std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out;
  if (__builtin_mul_overflow(a, b, &out)) throw NumericError("flops: 64-bit overflow");
  return out;
}

std::uint64_t add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out;
  if (__builtin_add_overflow(a, b, &out)) throw NumericError("flops: 64-bit overflow");
  return out;
}

}  // namespace

std::uint64_t sampler_overhead_flops(const SamplerCost& s) {
  const std::uint64_t pooling = mul(s.grid_tokens, s.channels);
  const std::uint64_t mlp = add(mul(2, mul(s.channels, s.hidden)), mul(2, mul(s.hidden, 2 * s.num_tokens)));
  const std::uint64_t bilinear = mul(s.num_tokens, add(mul(4, s.channels), mul(3, s.channels)));
  const std::uint64_t features = 4 * s.bands;
  const std::uint64_t encoder =
      mul(s.num_tokens, add(mul(features, kTrigFlops), mul(2, mul(features, s.channels))));
  return add(add(pooling, mlp), add(bilinear, encoder));
}

FlopsReport flops_estimate(std::uint64_t tokens, std::uint64_t model_dim, std::uint64_t layers,
                           const std::optional<SamplerCost>& sampler) {
  if (tokens == 0 || model_dim == 0 || layers == 0) {
    throw PreconditionError("flops_estimate: tokens, model_dim and layers must be positive");
  }
  FlopsReport r;
  r.tokens = tokens;
  r.model_dim = model_dim;
  r.layers = layers;
  r.attn_quadratic = mul(4, mul(mul(tokens, tokens), model_dim));
  r.attn_linear = mul(8, mul(tokens, mul(model_dim, model_dim)));
  r.ffn = mul(16, mul(tokens, mul(model_dim, model_dim)));
  r.sampler_overhead = sampler ? sampler_overhead_flops(*sampler) : 0;
  r.total = add(mul(layers, add(add(r.attn_quadratic, r.attn_linear), r.ffn)), r.sampler_overhead);
  return r;
}

std::string flops_csv_header() {
  return "tokens,model_dim,layers,attn_quadratic,attn_linear,ffn,sampler_overhead,total";
}

std::string flops_csv_row(const FlopsReport& r) {
  return std::to_string(r.tokens) + "," + std::to_string(r.model_dim) + "," +
         std::to_string(r.layers) + "," + std::to_string(r.attn_quadratic) + "," +
         std::to_string(r.attn_linear) + "," + std::to_string(r.ffn) + "," +
         std::to_string(r.sampler_overhead) + "," + std::to_string(r.total);
}

}  // namespace grids
