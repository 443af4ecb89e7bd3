#include "grids/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "grids/detail/linalg.hpp"
#include "grids/errors.hpp"

namespace grids {

namespace {

constexpr double kInitStd = 0.02;
constexpr double kLatticeJitter = 0.01;

float sigmoid(float a) { return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(a)))); }

double logit(double p) { return std::log(p / (1.0 - p)); }

void require_shape(const Parameter& p, std::size_t numel) {
  if (p.numel() != numel) {
    throw ConfigError("parameter '" + p.name + "' has " + std::to_string(p.numel()) +
                      " values, expected " + std::to_string(numel));
  }
}

void require_finite(std::span<const float> v, const char* what) {
  for (float x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + ": non-finite activation");
  }
}

struct Predictor {
  std::vector<float> hidden;
  std::vector<float> predicted;
};

Predictor run_predictor(const ContextVector& z, const ParameterStore& params,
                        const SamplerConfig& cfg) {
  const std::size_t c = z.channels();
  const std::size_t hid = cfg.resolved_hidden(c);
  const std::size_t out = 2 * cfg.num_tokens;
  const auto& w1 = params.get(names::kPredictorW1);
  const auto& b1 = params.get(names::kPredictorB1);
  const auto& w2 = params.get(names::kPredictorW2);
  const auto& b2 = params.get(names::kPredictorB2);
  require_shape(w1, c * hid);
  require_shape(b1, hid);
  require_shape(w2, hid * out);
  require_shape(b2, out);

  Predictor r;
  r.hidden.resize(hid);
  detail::affine_t(w1.values, b1.values, z.values, r.hidden);
  for (float& h : r.hidden) h = std::tanh(h);
  r.predicted.resize(out);
  detail::affine_t(w2.values, b2.values, r.hidden, r.predicted);
  require_finite(r.predicted, "predict_coordinates");
  for (float& a : r.predicted) a = sigmoid(a);
  return r;
}

std::size_t encoder_channels(const ParameterStore& params, const SamplerConfig& cfg) {
  const auto& bp = params.get(names::kEncoderB);
  const auto& wp = params.get(names::kEncoderW);
  require_shape(wp, 4 * cfg.fourier_bands * bp.numel());
  return bp.numel();
}

// Fills tokens.pos_embeddings / tokens.tokens and the tape's Fourier cache.
void inject_geometry(SparseTokenSet& tokens, SamplerTape& tape, const ParameterStore& params,
                     const SamplerConfig& cfg) {
  const std::size_t c = tokens.channels;
  if (encoder_channels(params, cfg) != c) {
    throw ShapeError("coordinate encoder width does not match grid channels");
  }
  const std::size_t f = 4 * cfg.fourier_bands;
  const auto& wp = params.get(names::kEncoderW);
  const auto& bp = params.get(names::kEncoderB);
  tape.fourier.assign(tokens.count * f, 0.0f);
  tokens.pos_embeddings.assign(tokens.count * c, 0.0f);
  tokens.tokens.assign(tokens.count * c, 0.0f);
  for (std::size_t k = 0; k < tokens.count; ++k) {
    const auto feat = fourier_features(tape.encoded.points[k], cfg.fourier_bands);
    std::copy(feat.begin(), feat.end(), tape.fourier.begin() + k * f);
    std::span<float> pos(tokens.pos_embeddings.data() + k * c, c);
    detail::affine_t(wp.values, bp.values, feat, pos);
    for (std::size_t ch = 0; ch < c; ++ch) {
      tokens.tokens[k * c + ch] = tokens.features[k * c + ch] + pos[ch];
    }
  }
  tokens.coords = tape.encoded;
}

SamplerOutput from_patches(const FeatureGrid& grid, std::vector<std::size_t> patches,
                           const ParameterStore& params, const SamplerConfig& cfg,
                           SamplingMode mode) {
  SamplerOutput out;
  auto& t = out.tokens;
  auto& tape = out.tape;
  const std::size_t c = grid.channels();
  t.count = patches.size();
  t.channels = c;
  t.features.resize(t.count * c);
  tape.mode = mode;
  tape.grid = &grid;
  tape.num_tokens = t.count;
  tape.fourier_bands = cfg.fourier_bands;
  tape.encoded.points.resize(t.count);
  for (std::size_t k = 0; k < t.count; ++k) {
    const auto patch = grid.patch(patches[k]);
    std::copy(patch.begin(), patch.end(), t.features.begin() + k * c);
    tape.encoded.points[k] = patch_center(patches[k] / grid.width(), patches[k] % grid.width(),
                                          grid.height(), grid.width());
  }
  tape.patches = std::move(patches);
  inject_geometry(t, tape, params, cfg);
  return out;
}

}  // namespace

std::size_t SamplerConfig::resolved_hidden(std::size_t channels) const {
  return hidden_width != 0 ? hidden_width : std::max<std::size_t>(2 * channels, 64);
}

void SamplerConfig::validate() const {
  if (num_tokens < 1) throw ConfigError("sampler: num_tokens must be >= 1");
  if (fourier_bands < 1) throw ConfigError("sampler: fourier_bands must be >= 1");
  if (!(edge_epsilon > 0.0f && edge_epsilon < 0.5f)) {
    throw ConfigError("sampler: edge_epsilon must lie in (0, 0.5)");
  }
}

void SamplerConfig::validate_for(const FeatureGrid& grid) const {
  validate();
  if (grid.height() < 2 || grid.width() < 2) {
    throw ShapeError("sampler: grid must be at least 2x2 for bilinear sampling");
  }
  if (num_tokens > grid.patch_count()) {
    throw ConfigError("sampler: num_tokens " + std::to_string(num_tokens) + " exceeds H*W = " +
                      std::to_string(grid.patch_count()));
  }
}

std::span<const float> SparseTokenSet::feature(std::size_t k) const {
  return std::span<const float>(features).subspan(k * channels, channels);
}

std::span<const float> SparseTokenSet::token(std::size_t k) const {
  return std::span<const float>(tokens).subspan(k * channels, channels);
}

Coord patch_center(std::size_t i, std::size_t j, std::size_t height, std::size_t width) {
  const auto norm = [](std::size_t idx, std::size_t n) {
    return n > 1 ? static_cast<float>(static_cast<double>(idx) / static_cast<double>(n - 1))
                 : 0.5f;
  };
  return Coord{norm(j, width), norm(i, height)};
}

std::vector<Coord> lattice_coordinates(std::size_t num_tokens) {
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(num_tokens))));
  std::vector<Coord> out;
  out.reserve(num_tokens);
  for (std::size_t k = 0; k < num_tokens; ++k) {
    const double col = static_cast<double>(k % side);
    const double row = static_cast<double>(k / side);
    out.push_back(Coord{static_cast<float>((col + 0.5) / static_cast<double>(side)),
                        static_cast<float>((row + 0.5) / static_cast<double>(side))});
  }
  return out;
}

void init_sampler_params(ParameterStore& params, std::size_t channels, const SamplerConfig& cfg,
                         Rng& rng) {
  cfg.validate();
  const std::size_t hid = cfg.resolved_hidden(channels);
  const std::size_t k2 = 2 * cfg.num_tokens;
  auto normal_fill = [&rng](Parameter& p) {
    for (float& v : p.values) v = static_cast<float>(rng.normal(0.0, kInitStd));
  };
  normal_fill(params.add(std::string(names::kPredictorW1), {channels, hid}));
  params.add(std::string(names::kPredictorB1), {hid});
  normal_fill(params.add(std::string(names::kPredictorW2), {hid, k2}));
  auto& b2 = params.add(std::string(names::kPredictorB2), {k2});
  const auto lattice = lattice_coordinates(cfg.num_tokens);
  for (std::size_t k = 0; k < cfg.num_tokens; ++k) {
    const double px = lattice[k].x + rng.uniform(-kLatticeJitter, kLatticeJitter);
    const double py = lattice[k].y + rng.uniform(-kLatticeJitter, kLatticeJitter);
    b2.values[2 * k] = static_cast<float>(logit(px));
    b2.values[2 * k + 1] = static_cast<float>(logit(py));
  }
  normal_fill(params.add(std::string(names::kEncoderW), {4 * cfg.fourier_bands, channels}));
  params.add(std::string(names::kEncoderB), {channels});
}

CoordinateSet predict_coordinates(const ContextVector& context, const ParameterStore& params,
                                  const SamplerConfig& cfg) {
  const auto r = run_predictor(context, params, cfg);
  CoordinateSet out;
  out.points.resize(cfg.num_tokens);
  for (std::size_t k = 0; k < cfg.num_tokens; ++k) {
    out.points[k] = Coord{r.predicted[2 * k], r.predicted[2 * k + 1]};
  }
  return out;
}

GridPoint map_to_grid(Coord p, std::size_t height, std::size_t width, float edge_epsilon) {
  GridPoint g;
  const float x_hi = static_cast<float>(width - 1) - edge_epsilon;
  const float y_hi = static_cast<float>(height - 1) - edge_epsilon;
  const float x = p.x * static_cast<float>(width - 1);
  const float y = p.y * static_cast<float>(height - 1);
  g.x = std::clamp(x, 0.0f, x_hi);
  g.y = std::clamp(y, 0.0f, y_hi);
  g.x_clamped = x < 0.0f || x > x_hi;
  g.y_clamped = y < 0.0f || y > y_hi;
  return g;
}

BilinearStencil bilinear_stencil(float x, float y, std::size_t height, std::size_t width) {
  if (height < 2 || width < 2) throw PreconditionError("bilinear_stencil: grid must be >= 2x2");
  if (!(x >= 0.0f && x <= static_cast<float>(width - 1))) {
    throw PreconditionError("bilinear_stencil: x = " + std::to_string(x) + " outside [0, W-1]");
  }
  if (!(y >= 0.0f && y <= static_cast<float>(height - 1))) {
    throw PreconditionError("bilinear_stencil: y = " + std::to_string(y) + " outside [0, H-1]");
  }
  BilinearStencil s;
  // x == W-1 exactly keeps the last cell with dx = 1.
  s.j0 = std::min(static_cast<std::size_t>(std::floor(x)), width - 2);
  s.i0 = std::min(static_cast<std::size_t>(std::floor(y)), height - 2);
  s.dx = x - static_cast<float>(s.j0);
  s.dy = y - static_cast<float>(s.i0);
  s.weights = {(1.0f - s.dx) * (1.0f - s.dy), s.dx * (1.0f - s.dy), (1.0f - s.dx) * s.dy,
               s.dx * s.dy};
  return s;
}

namespace {

std::array<std::span<const float>, 4> neighbours(const FeatureGrid& grid,
                                                 const BilinearStencil& s) {
  return {grid.at(s.i0, s.j0), grid.at(s.i0, s.j0 + 1), grid.at(s.i0 + 1, s.j0),
          grid.at(s.i0 + 1, s.j0 + 1)};
}

}  // namespace

std::vector<float> bilinear_sample(const FeatureGrid& grid, const BilinearStencil& stencil) {
  const auto nb = neighbours(grid, stencil);
  const auto& w = stencil.weights;
  std::vector<float> out(grid.channels());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = static_cast<float>(static_cast<double>(w[0]) * nb[0][c] +
                                static_cast<double>(w[1]) * nb[1][c] +
                                static_cast<double>(w[2]) * nb[2][c] +
                                static_cast<double>(w[3]) * nb[3][c]);
  }
  return out;
}

BilinearGrad bilinear_backward(const FeatureGrid& grid, const BilinearStencil& stencil,
                               std::span<const float> upstream) {
  if (upstream.size() != grid.channels()) {
    throw ShapeError("bilinear_backward: upstream length does not match channels");
  }
  const auto nb = neighbours(grid, stencil);
  const double dx = stencil.dx;
  const double dy = stencil.dy;
  // d(omega_k)/dx and d(omega_k)/dy for the four neighbours.
  const std::array<double, 4> wx = {-(1.0 - dy), 1.0 - dy, -dy, dy};
  const std::array<double, 4> wy = {-(1.0 - dx), -dx, 1.0 - dx, dx};
  double gx = 0.0;
  double gy = 0.0;
  BilinearGrad g;
  for (auto& fg : g.feature_grads) fg.assign(upstream.size(), 0.0f);
  for (std::size_t c = 0; c < upstream.size(); ++c) {
    const double u = upstream[c];
    double sx = 0.0;
    double sy = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      sx += wx[k] * nb[k][c];
      sy += wy[k] * nb[k][c];
      g.feature_grads[k][c] = stencil.weights[k] * upstream[c];
    }
    gx += u * sx;
    gy += u * sy;
  }
  g.d_x = static_cast<float>(gx);
  g.d_y = static_cast<float>(gy);
  return g;
}

std::vector<float> fourier_features(Coord p, std::size_t bands) {
  std::vector<float> f(4 * bands);
  double freq = std::numbers::pi;
  for (std::size_t l = 0; l < bands; ++l, freq *= 2.0) {
    f[4 * l + 0] = static_cast<float>(std::sin(freq * p.x));
    f[4 * l + 1] = static_cast<float>(std::cos(freq * p.x));
    f[4 * l + 2] = static_cast<float>(std::sin(freq * p.y));
    f[4 * l + 3] = static_cast<float>(std::cos(freq * p.y));
  }
  return f;
}

std::vector<float> encode_coordinates(const CoordinateSet& coords, const ParameterStore& params,
                                      const SamplerConfig& cfg) {
  const std::size_t c = encoder_channels(params, cfg);
  const auto& wp = params.get(names::kEncoderW);
  const auto& bp = params.get(names::kEncoderB);
  std::vector<float> out(coords.size() * c);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const auto feat = fourier_features(coords.points[k], cfg.fourier_bands);
    detail::affine_t(wp.values, bp.values, feat, std::span<float>(out.data() + k * c, c));
  }
  return out;
}

SamplerOutput grids_forward(const FeatureGrid& grid, const ParameterStore& params,
                            const SamplerConfig& cfg) {
  cfg.validate_for(grid);
  SamplerOutput out;
  auto& t = out.tokens;
  auto& tape = out.tape;
  const std::size_t k_count = cfg.num_tokens;
  const std::size_t c = grid.channels();
  tape.mode = SamplingMode::bilinear;
  tape.grid = &grid;
  tape.num_tokens = k_count;
  tape.fourier_bands = cfg.fourier_bands;
  tape.context = global_average_pool(grid);
  auto pred = run_predictor(tape.context, params, cfg);
  tape.hidden = std::move(pred.hidden);
  tape.predicted = std::move(pred.predicted);

  t.count = k_count;
  t.channels = c;
  t.features.resize(k_count * c);
  tape.encoded.points.resize(k_count);
  tape.grid_points.resize(k_count);
  tape.stencils.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const Coord p{tape.predicted[2 * k], tape.predicted[2 * k + 1]};
    tape.encoded.points[k] = p;
    tape.grid_points[k] = map_to_grid(p, grid.height(), grid.width(), cfg.edge_epsilon);
    tape.stencils[k] =
        bilinear_stencil(tape.grid_points[k].x, tape.grid_points[k].y, grid.height(), grid.width());
    const auto f = bilinear_sample(grid, tape.stencils[k]);
    std::copy(f.begin(), f.end(), t.features.begin() + k * c);
  }
  inject_geometry(t, tape, params, cfg);
  return out;
}

SamplerOutput sample_nearest(const FeatureGrid& grid, const ParameterStore& params,
                             const SamplerConfig& cfg) {
  cfg.validate_for(grid);
  const auto context = global_average_pool(grid);
  auto pred = run_predictor(context, params, cfg);
  std::vector<std::size_t> patches(cfg.num_tokens);
  std::vector<GridPoint> points(cfg.num_tokens);
  for (std::size_t k = 0; k < cfg.num_tokens; ++k) {
    const Coord p{pred.predicted[2 * k], pred.predicted[2 * k + 1]};
    points[k] = map_to_grid(p, grid.height(), grid.width(), cfg.edge_epsilon);
    const auto j = static_cast<std::size_t>(std::lround(points[k].x));
    const auto i = static_cast<std::size_t>(std::lround(points[k].y));
    patches[k] = i * grid.width() + j;
  }
  auto out = from_patches(grid, std::move(patches), params, cfg, SamplingMode::nearest);
  out.tape.context = context;
  out.tape.hidden = std::move(pred.hidden);
  out.tape.predicted = std::move(pred.predicted);
  out.tape.grid_points = std::move(points);
  return out;
}

SamplerOutput sample_random(const FeatureGrid& grid, std::size_t num_tokens, Rng& rng,
                            const ParameterStore& params, const SamplerConfig& cfg) {
  const std::size_t n = grid.patch_count();
  if (num_tokens > n) {
    throw ShapeError("sample_random: K = " + std::to_string(num_tokens) + " exceeds H*W = " +
                     std::to_string(n));
  }
  // Partial Fisher-Yates: the first K slots are a uniform K-subset in random order.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < num_tokens; ++k) {
    const std::size_t r = k + static_cast<std::size_t>(rng.below(n - k));
    std::swap(idx[k], idx[r]);
  }
  idx.resize(num_tokens);
  return from_patches(grid, std::move(idx), params, cfg, SamplingMode::fixed);
}

SamplerOutput sample_topk(const FeatureGrid& grid, std::size_t num_tokens,
                          const ParameterStore& params, const SamplerConfig& cfg) {
  const std::size_t n = grid.patch_count();
  if (num_tokens > n) {
    throw ShapeError("sample_topk: K = " + std::to_string(num_tokens) + " exceeds H*W = " +
                     std::to_string(n));
  }
  std::vector<double> norm2(n);
  for (std::size_t p = 0; p < n; ++p) {
    const auto v = grid.patch(p);
    norm2[p] = detail::dot(v, v);
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return norm2[a] > norm2[b]; });
  idx.resize(num_tokens);
  return from_patches(grid, std::move(idx), params, cfg, SamplingMode::fixed);
}

SamplerOutput sample_dense(const FeatureGrid& grid, const ParameterStore& params,
                           const SamplerConfig& cfg) {
  std::vector<std::size_t> idx(grid.patch_count());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return from_patches(grid, std::move(idx), params, cfg, SamplingMode::fixed);
}

SamplerOutput sample_patches(const FeatureGrid& grid, std::span<const std::size_t> patches,
                             const ParameterStore& params, const SamplerConfig& cfg) {
  for (std::size_t p : patches) {
    if (p >= grid.patch_count()) throw IndexError("sample_patches: patch index out of range");
  }
  return from_patches(grid, std::vector<std::size_t>(patches.begin(), patches.end()), params,
                      cfg, SamplingMode::fixed);
}

SamplerGradients grids_backward(const SamplerTape& tape, std::span<const float> upstream,
                                ParameterStore& params) {
  if (tape.grid == nullptr) throw PreconditionError("grids_backward: tape has no grid");
  const FeatureGrid& grid = *tape.grid;
  const std::size_t k_count = tape.num_tokens;
  const std::size_t c = grid.channels();
  const std::size_t f = 4 * tape.fourier_bands;
  if (upstream.size() != k_count * c) {
    throw ShapeError("grids_backward: upstream has " + std::to_string(upstream.size()) +
                     " values, expected " + std::to_string(k_count * c));
  }
  auto& wp = params.get(names::kEncoderW);
  auto& bp = params.get(names::kEncoderB);
  if (wp.numel() != f * c || bp.numel() != c) {
    throw PreconditionError("grids_backward: encoder parameters do not match the tape");
  }

  SamplerGradients out;
  out.coord_grads.assign(k_count, Coord{});
  out.grid_grad.assign(grid.values().size(), 0.0f);

  // Encoder path: tokens = features + Wp^T fourier(p) + bp.
  std::vector<float> d_fourier(f);
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto up = upstream.subspan(k * c, c);
    const std::span<const float> feat(tape.fourier.data() + k * f, f);
    detail::add_outer(wp.grads, feat, up);
    detail::add_into(bp.grads, up);
    if (tape.mode != SamplingMode::bilinear) continue;
    detail::matvec(wp.values, up, d_fourier);
    double gx = 0.0;
    double gy = 0.0;
    double freq = std::numbers::pi;
    for (std::size_t l = 0; l < tape.fourier_bands; ++l, freq *= 2.0) {
      // d sin(wx)/dx = w cos(wx), d cos(wx)/dx = -w sin(wx)
      gx += freq * (d_fourier[4 * l + 0] * static_cast<double>(feat[4 * l + 1]) -
                    d_fourier[4 * l + 1] * static_cast<double>(feat[4 * l + 0]));
      gy += freq * (d_fourier[4 * l + 2] * static_cast<double>(feat[4 * l + 3]) -
                    d_fourier[4 * l + 3] * static_cast<double>(feat[4 * l + 2]));
    }
    out.coord_grads[k].x += static_cast<float>(gx);
    out.coord_grads[k].y += static_cast<float>(gy);
  }

  if (tape.mode != SamplingMode::bilinear) {
    // Discrete lookups: features flow to the chosen patch, coordinates get nothing.
    for (std::size_t k = 0; k < k_count; ++k) {
      float* dst = out.grid_grad.data() + tape.patches[k] * c;
      for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += upstream[k * c + ch];
    }
    return out;
  }

  // Feature path through the bilinear weights, then through the align-corners map.
  const float scale_x = static_cast<float>(grid.width() - 1);
  const float scale_y = static_cast<float>(grid.height() - 1);
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto& s = tape.stencils[k];
    const auto bg = bilinear_backward(grid, s, upstream.subspan(k * c, c));
    const std::array<std::size_t, 4> flat = {s.i0 * grid.width() + s.j0,
                                             s.i0 * grid.width() + s.j0 + 1,
                                             (s.i0 + 1) * grid.width() + s.j0,
                                             (s.i0 + 1) * grid.width() + s.j0 + 1};
    for (std::size_t n = 0; n < 4; ++n) {
      float* dst = out.grid_grad.data() + flat[n] * c;
      for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += bg.feature_grads[n][ch];
    }
    const auto& gp = tape.grid_points[k];
    if (!gp.x_clamped) out.coord_grads[k].x += bg.d_x * scale_x;
    if (!gp.y_clamped) out.coord_grads[k].y += bg.d_y * scale_y;
  }

  // Sigmoid, output layer, tanh, input layer.
  const std::size_t hid = tape.hidden.size();
  std::vector<float> d_pre(2 * k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const float px = tape.predicted[2 * k];
    const float py = tape.predicted[2 * k + 1];
    d_pre[2 * k] = out.coord_grads[k].x * px * (1.0f - px);
    d_pre[2 * k + 1] = out.coord_grads[k].y * py * (1.0f - py);
  }
  auto& w1 = params.get(names::kPredictorW1);
  auto& b1 = params.get(names::kPredictorB1);
  auto& w2 = params.get(names::kPredictorW2);
  auto& b2 = params.get(names::kPredictorB2);
  detail::add_outer(w2.grads, tape.hidden, d_pre);
  detail::add_into(b2.grads, d_pre);
  std::vector<float> d_hidden(hid);
  detail::matvec(w2.values, d_pre, d_hidden);
  for (std::size_t j = 0; j < hid; ++j) {
    d_hidden[j] *= 1.0f - tape.hidden[j] * tape.hidden[j];
  }
  detail::add_outer(w1.grads, tape.context.values, d_hidden);
  detail::add_into(b1.grads, d_hidden);
  std::vector<float> d_context(c);
  detail::matvec(w1.values, d_hidden, d_context);
  const auto g_pool = gap_backward(d_context, grid.height(), grid.width(), c);
  detail::add_into(out.grid_grad, g_pool.values());
  return out;
}

}  // namespace grids
