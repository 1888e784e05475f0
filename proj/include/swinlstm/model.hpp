#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "swinlstm/cell.hpp"
#include "swinlstm/config.hpp"
#include "swinlstm/errors.hpp"
#include "swinlstm/layers.hpp"
#include "swinlstm/swin.hpp"
#include "swinlstm/tensor.hpp"

namespace swinlstm {

enum class Variant { base, deep };
enum class Reconstruction { transposed, bilinear, linear };
enum class LossMode { l2, l1_l2 };

const char* to_string(Variant v);
const char* to_string(Reconstruction r);
const char* to_string(LossMode m);

// Architecture description. The base variant runs one recurrent cell on the
// token grid; the deep variant runs four cells around a merge/expand pair so
// the middle two work on a half-resolution grid with doubled channels.
struct ModelConfig {
  Variant variant = Variant::base;
  std::int64_t input_channels = 1;
  std::int64_t height = 64;
  std::int64_t width = 64;
  std::int64_t patch = 2;
  std::int64_t embed_dim = 128;
  std::int64_t window = 4;
  std::int64_t heads = 4;
  std::vector<int> depths{12};
  Reconstruction reconstruction = Reconstruction::transposed;
  LossMode loss = LossMode::l2;
  bool rel_bias = true;

  std::int64_t grid_h() const { return height / patch; }
  std::int64_t grid_w() const { return width / patch; }

  // Throws a ConfigError listing every violated constraint.
  void validate() const;
  std::string to_text() const;
  // Parses key=value text; reports unknown keys, bad values, and constraint
  // violations together. Missing keys keep their defaults, except depths,
  // which tracks the variant when absent.
  static ModelConfig from_text(const std::string& text);
  // Getter-only half of from_text: consumes this struct's keys from a shared
  // reader without finishing it, so callers can combine several key sets in
  // one file and still report every problem at once.
  static ModelConfig read(KvReader& r);

  bool operator==(const ModelConfig&) const = default;
};

// Bilinear upsampling of (batch, channels, h, w) by an integer factor with
// half-pixel sampling: output pixel o reads source (o + 0.5)/factor - 0.5,
// clamped to the frame, blending the two nearest rows and columns. The
// backward pass scatters each cotangent through the same four taps.
template <typename T>
Tensor<T> bilinear_upsample(Tape<T>& tape, const Tensor<T>& x, std::int64_t factor) {
  if (x.rank() != 4)
    throw Error("bilinear_upsample: expected (batch, channels, height, width), got rank " +
                std::to_string(x.rank()));
  if (factor < 1) throw Error("bilinear_upsample: factor must be at least 1");
  const std::int64_t b = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t oh = h * factor, ow = w * factor;

  struct Tap {
    std::int64_t lo, hi;
    T w_lo, w_hi;
  };
  auto taps_for = [factor](std::int64_t n, std::int64_t on) {
    std::vector<Tap> taps(static_cast<std::size_t>(on));
    for (std::int64_t o = 0; o < on; ++o) {
      double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
      if (src < 0.0) src = 0.0;
      if (src > static_cast<double>(n - 1)) src = static_cast<double>(n - 1);
      std::int64_t lo = static_cast<std::int64_t>(std::floor(src));
      std::int64_t hi = lo + 1 < n ? lo + 1 : n - 1;
      T frac = static_cast<T>(src - static_cast<double>(lo));
      taps[static_cast<std::size_t>(o)] = Tap{lo, hi, T(1) - frac, frac};
    }
    return taps;
  };
  const std::vector<Tap> rows = taps_for(h, oh);
  const std::vector<Tap> cols = taps_for(w, ow);

  Tensor<T> y = Tensor<T>::zeros({b, ch, oh, ow});
  {
    const auto xv = x.data();
    auto yv = y.data();
    for (std::int64_t img = 0; img < b * ch; ++img) {
      const T* src = xv.data() + img * h * w;
      T* dst = yv.data() + img * oh * ow;
      for (std::int64_t i = 0; i < oh; ++i) {
        const Tap& r = rows[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < ow; ++j) {
          const Tap& c = cols[static_cast<std::size_t>(j)];
          dst[i * ow + j] = r.w_lo * (c.w_lo * src[r.lo * w + c.lo] + c.w_hi * src[r.lo * w + c.hi]) +
                            r.w_hi * (c.w_lo * src[r.hi * w + c.lo] + c.w_hi * src[r.hi * w + c.hi]);
        }
      }
    }
  }
  detail::maybe_check_finite(tape, y, "bilinear_upsample");
  tape.record("bilinear_upsample", {x}, {y},
              [x = x, y, rows, cols, b, ch, h, w, oh, ow]() mutable {
                if (!x.requires_grad()) return;
                auto gy = y.grad();
                auto gx = x.grad_accum();
                for (std::int64_t img = 0; img < b * ch; ++img) {
                  const T* gsrc = gy.data() + img * oh * ow;
                  T* gdst = gx.data() + img * h * w;
                  for (std::int64_t i = 0; i < oh; ++i) {
                    const Tap& r = rows[static_cast<std::size_t>(i)];
                    for (std::int64_t j = 0; j < ow; ++j) {
                      const Tap& c = cols[static_cast<std::size_t>(j)];
                      const T g = gsrc[i * ow + j];
                      gdst[r.lo * w + c.lo] += r.w_lo * c.w_lo * g;
                      gdst[r.lo * w + c.hi] += r.w_lo * c.w_hi * g;
                      gdst[r.hi * w + c.lo] += r.w_hi * c.w_lo * g;
                      gdst[r.hi * w + c.hi] += r.w_hi * c.w_hi * g;
                    }
                  }
                }
              });
  return y;
}

// Recurrent state for the whole network: one (hidden, cell) pair per cell,
// in forward order.
template <typename T>
using NetworkState = std::vector<CellState<T>>;

// Video predictor: patch embedding, one or four recurrent cells, and a
// reconstruction head whose sigmoid keeps every output pixel in (0, 1).
template <typename T>
struct Predictor {
  ModelConfig cfg;
  PatchEmbed<T> embed;
  std::vector<SwinLSTMCell<T>> cells;
  PatchMerging<T> merge;    // deep variant only
  PatchExpanding<T> expand;  // deep variant only
  LinearLayer<T> head;

  static Predictor make(const ModelConfig& cfg, Rng* rng) {
    cfg.validate();
    Predictor net;
    net.cfg = cfg;
    const std::int64_t cin = cfg.input_channels, p = cfg.patch, d = cfg.embed_dim;
    const std::int64_t gh = cfg.grid_h(), gw = cfg.grid_w();
    net.embed = PatchEmbed<T>::make(cin, static_cast<int>(p), d, rng);
    auto cell = [&](int depth, std::int64_t dim, std::int64_t grid_h, std::int64_t grid_w) {
      return SwinLSTMCell<T>::make(depth, static_cast<int>(dim), static_cast<int>(cfg.heads),
                                   static_cast<int>(cfg.window), grid_h, grid_w,
                                   cfg.rel_bias, rng);
    };
    if (cfg.variant == Variant::base) {
      net.cells.push_back(cell(cfg.depths[0], d, gh, gw));
    } else {
      net.cells.push_back(cell(cfg.depths[0], d, gh, gw));
      net.merge = PatchMerging<T>::make(d, rng);
      net.cells.push_back(cell(cfg.depths[1], 2 * d, gh / 2, gw / 2));
      net.cells.push_back(cell(cfg.depths[2], 2 * d, gh / 2, gw / 2));
      net.expand = PatchExpanding<T>::make(2 * d, rng);
      net.cells.push_back(cell(cfg.depths[3], d, gh, gw));
    }
    switch (cfg.reconstruction) {
      case Reconstruction::transposed:
        net.head = LinearLayer<T>::make(d, cin * p * p, rng, true);
        break;
      case Reconstruction::bilinear:
        net.head = LinearLayer<T>::make(d, cin, rng, true);
        break;
      case Reconstruction::linear:
        net.head = LinearLayer<T>::make(gh * gw * d, cin * cfg.height * cfg.width, rng, true);
        break;
    }
    return net;
  }
  static Predictor init(const ModelConfig& cfg, Rng& rng) { return make(cfg, &rng); }
  static Predictor zeros(const ModelConfig& cfg) { return make(cfg, nullptr); }

  // Maps a token grid (batch, gh, gw, embed_dim) back to frame layout
  // (batch, channels, height, width). No sigmoid here; forward_step owns it.
  Tensor<T> reconstruct(Tape<T>& tape, const Tensor<T>& tokens) const {
    const std::int64_t cin = cfg.input_channels, p = cfg.patch;
    switch (cfg.reconstruction) {
      case Reconstruction::transposed:
        return assemble_patches(tape, head(tape, tokens), static_cast<int>(p), cin);
      case Reconstruction::bilinear: {
        std::array<int, 4> to_frame{0, 3, 1, 2};
        Tensor<T> coarse = permute(tape, head(tape, tokens), to_frame);
        return bilinear_upsample(tape, coarse, p);
      }
      case Reconstruction::linear: {
        Shape flat{tokens.dim(0), cfg.grid_h() * cfg.grid_w() * cfg.embed_dim};
        Shape frame{tokens.dim(0), cin, cfg.height, cfg.width};
        return reshape(tape, head(tape, reshape(tape, tokens, flat)), frame);
      }
    }
    throw Error("reconstruct: unreachable");
  }

  // Advances every cell by one step and predicts the next frame. Passing a
  // null state starts each cell from zeros. A non-null stb_outs receives one
  // entry per cell: that cell's block-stack output grid, for feature-map
  // inspection.
  std::pair<Tensor<T>, NetworkState<T>> forward_step(
      Tape<T>& tape, const Tensor<T>& frame, const NetworkState<T>* state, double drop_p = 0.0,
      Rng* drop_rng = nullptr, std::vector<Tensor<T>>* stb_outs = nullptr) const {
    if (state != nullptr && state->size() != cells.size())
      throw Error("forward_step: state holds " + std::to_string(state->size()) +
                  " cell entries, network has " + std::to_string(cells.size()));
    auto prev = [&](std::size_t i) { return state == nullptr ? nullptr : &(*state)[i]; };
    if (stb_outs != nullptr) stb_outs->assign(cells.size(), Tensor<T>());
    auto slot = [&](std::size_t i) { return stb_outs == nullptr ? nullptr : &(*stb_outs)[i]; };
    NetworkState<T> next(cells.size());
    Tensor<T> t = embed.forward(tape, frame);
    if (cfg.variant == Variant::base) {
      std::tie(t, next[0]) = cells[0].step(tape, t, prev(0), drop_p, drop_rng, slot(0));
    } else {
      std::tie(t, next[0]) = cells[0].step(tape, t, prev(0), drop_p, drop_rng, slot(0));
      t = merge.forward(tape, t);
      std::tie(t, next[1]) = cells[1].step(tape, t, prev(1), drop_p, drop_rng, slot(1));
      std::tie(t, next[2]) = cells[2].step(tape, t, prev(2), drop_p, drop_rng, slot(2));
      t = expand.forward(tape, t);
      std::tie(t, next[3]) = cells[3].step(tape, t, prev(3), drop_p, drop_rng, slot(3));
    }
    return {sigmoid(tape, reconstruct(tape, t)), std::move(next)};
  }

  // Consumes the observed frames (warm-up predictions are discarded), then
  // feeds each prediction back as the next input, `horizon` times.
  std::vector<Tensor<T>> rollout(Tape<T>& tape, const std::vector<Tensor<T>>& inputs,
                                 int horizon, double drop_p = 0.0,
                                 Rng* drop_rng = nullptr) const {
    if (inputs.empty()) throw Error("rollout: need at least one input frame");
    if (horizon < 1) throw Error("rollout: horizon must be at least 1");
    NetworkState<T> state;
    auto step = [&](const Tensor<T>& frame) {
      auto [out, next] = forward_step(tape, frame, state.empty() ? nullptr : &state,
                                      drop_p, drop_rng);
      state = std::move(next);
      return out;
    };
    for (std::size_t t = 0; t + 1 < inputs.size(); ++t) step(inputs[t]);
    std::vector<Tensor<T>> outputs;
    outputs.reserve(static_cast<std::size_t>(horizon));
    Tensor<T> frame = inputs.back();
    for (int k = 0; k < horizon; ++k) {
      frame = step(frame);
      outputs.push_back(frame);
    }
    return outputs;
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    embed.collect(prefix + "embed", out);
    for (std::size_t i = 0; i < cells.size(); ++i)
      cells[i].collect(prefix + "cell" + std::to_string(i), out);
    if (cfg.variant == Variant::deep) {
      merge.collect(prefix + "merge", out);
      expand.collect(prefix + "expand", out);
    }
    head.collect(prefix + "head", out);
  }
  NamedParams<T> parameters() const {
    NamedParams<T> out;
    collect("", out);
    return out;
  }
  std::int64_t param_count() const {
    std::int64_t total = 0;
    for (const auto& nt : parameters()) total += nt.second.numel();
    return total;
  }
};

}  // namespace swinlstm
