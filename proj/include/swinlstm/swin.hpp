#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "swinlstm/layers.hpp"
#include "swinlstm/tensor.hpp"

// Windowed multi-head self-attention over token grids, the alternating
// plain/shifted block stacks built from it, and the patch-level resamplers
// (embed, merge, expand) that move between frames and token grids.
//
// Layout conventions, used everywhere below:
//   frame       (batch, channels, height, width)
//   token grid  (batch, rows, cols, dim)          row-major tokens
//   window set  (batch * windows, window^2, dim)  windows row-major, tokens
//                                                 row-major within a window
// All structs are parameter owners in the layers.hpp style; forward passes
// are const and may run concurrently on independent tapes.

namespace swinlstm {

// (B, C, H, W) -> (B, H/P, W/P, C*P*P). Patch vectors are laid out channel-
// major: entry (c*P + pi)*P + pj holds pixel (c, i*P+pi, j*P+pj).
template <typename T>
Tensor<T> extract_patches(Tape<T>& tape, const Tensor<T>& frames, int p) {
  if (frames.rank() != 4)
    throw Error("patch_embed: expected (batch, channels, height, width), got " +
                shape_str(frames.shape()));
  const std::int64_t b = frames.dim(0), c = frames.dim(1), h = frames.dim(2), w = frames.dim(3);
  if (p < 1 || h % p != 0 || w % p != 0)
    throw Error("patch_embed: frame " + std::to_string(h) + "x" + std::to_string(w) +
                " not divisible by patch size " + std::to_string(p));
  Tensor<T> y = reshape(tape, frames, {b, c, h / p, p, w / p, p});
  const std::array<int, 6> ax{0, 2, 4, 1, 3, 5};
  y = permute(tape, y, ax);
  return reshape(tape, y, {b, h / p, w / p, c * p * p});
}

// Inverse of extract_patches: (B, Gh, Gw, C*P*P) -> (B, C, Gh*P, Gw*P).
template <typename T>
Tensor<T> assemble_patches(Tape<T>& tape, const Tensor<T>& tokens, int p, std::int64_t channels) {
  if (tokens.rank() != 4 || p < 1 || tokens.dim(3) != channels * p * p)
    throw Error("assemble_patches: tokens " + shape_str(tokens.shape()) +
                " do not hold " + std::to_string(channels) + " channels of " +
                std::to_string(p) + "x" + std::to_string(p) + " patches");
  const std::int64_t b = tokens.dim(0), gh = tokens.dim(1), gw = tokens.dim(2);
  Tensor<T> y = reshape(tape, tokens, {b, gh, gw, channels, p, p});
  const std::array<int, 6> ax{0, 3, 1, 4, 2, 5};
  y = permute(tape, y, ax);
  return reshape(tape, y, {b, channels, gh * p, gw * p});
}

// Tiles the grid into non-overlapping w x w windows: (B, Gh, Gw, D) ->
// (B * (Gh/w) * (Gw/w), w*w, D).
template <typename T>
Tensor<T> window_partition(Tape<T>& tape, const Tensor<T>& g, int w) {
  if (g.rank() != 4)
    throw Error("window_partition: expected (batch, rows, cols, dim), got " +
                shape_str(g.shape()));
  const std::int64_t b = g.dim(0), gh = g.dim(1), gw = g.dim(2), d = g.dim(3);
  if (w < 1 || gh % w != 0 || gw % w != 0)
    throw Error("window_partition: grid " + std::to_string(gh) + "x" + std::to_string(gw) +
                " not divisible by window " + std::to_string(w));
  Tensor<T> y = reshape(tape, g, {b, gh / w, w, gw / w, w, d});
  const std::array<int, 6> ax{0, 1, 3, 2, 4, 5};
  y = permute(tape, y, ax);
  return reshape(tape, y, {b * (gh / w) * (gw / w), std::int64_t(w) * w, d});
}

// Inverse of window_partition for a grid of known extent.
template <typename T>
Tensor<T> window_reverse(Tape<T>& tape, const Tensor<T>& ws, int w, std::int64_t gh,
                         std::int64_t gw) {
  const bool tiles = ws.rank() == 3 && w >= 1 && gh >= w && gw >= w && gh % w == 0 &&
                     gw % w == 0 && ws.dim(1) == std::int64_t(w) * w &&
                     ws.dim(0) % ((gh / w) * (gw / w)) == 0;
  if (!tiles)
    throw Error("window_reverse: windows " + shape_str(ws.shape()) + " do not tile a " +
                std::to_string(gh) + "x" + std::to_string(gw) + " grid with window " +
                std::to_string(w));
  const std::int64_t nw = (gh / w) * (gw / w);
  const std::int64_t b = ws.dim(0) / nw, d = ws.dim(2);
  Tensor<T> y = reshape(tape, ws, {b, gh / w, gw / w, w, w, d});
  const std::array<int, 6> ax{0, 1, 3, 2, 4, 5};
  y = permute(tape, y, ax);
  return reshape(tape, y, {b, gh, gw, d});
}

// Rolls both spatial axes: out[i][j] = in[(i+s) mod Gh][(j+s) mod Gw].
// Negative s undoes the positive shift. s == 0 returns the input handle.
template <typename T>
Tensor<T> cyclic_shift(Tape<T>& tape, const Tensor<T>& g, int s) {
  if (g.rank() != 4)
    throw Error("cyclic_shift: expected (batch, rows, cols, dim), got " + shape_str(g.shape()));
  if (s == 0) return g;
  const std::int64_t b = g.dim(0), gh = g.dim(1), gw = g.dim(2), d = g.dim(3);
  auto wrap = [](std::int64_t i, std::int64_t n) { return ((i % n) + n) % n; };
  auto map = std::make_shared<std::vector<std::int64_t>>();
  map->reserve(static_cast<std::size_t>(g.numel()));
  for (std::int64_t bi = 0; bi < b; ++bi)
    for (std::int64_t i = 0; i < gh; ++i) {
      const std::int64_t si = wrap(i + s, gh);
      for (std::int64_t j = 0; j < gw; ++j) {
        const std::int64_t base = ((bi * gh + si) * gw + wrap(j + s, gw)) * d;
        for (std::int64_t c = 0; c < d; ++c) map->push_back(base + c);
      }
    }
  return index_map(tape, g, std::move(map), g.shape(), "cyclic_shift");
}

// Additive attention masks for shifted windows, one (w*w, w*w) matrix per
// window of the grid, shape (windows, w*w, w*w). Tokens are labeled by the
// axis slices [0, G-w), [G-w, G-s), [G-s, G) in shifted coordinates; pairs
// in different regions get -1e4 (finite, so gradients stay defined), pairs
// in the same region get 0. s == 0 yields all-zero masks.
template <typename T>
Tensor<T> build_shift_mask(std::int64_t gh, std::int64_t gw, int w, int s) {
  if (w < 1 || gh % w != 0 || gw % w != 0 || s < 0 || s >= w)
    throw Error("shift_mask: invalid grid " + std::to_string(gh) + "x" + std::to_string(gw) +
                " for window " + std::to_string(w) + " shift " + std::to_string(s));
  const std::int64_t n = std::int64_t(w) * w, nw = (gh / w) * (gw / w);
  Tensor<T> mask = Tensor<T>::zeros({nw, n, n});
  if (s == 0) return mask;
  auto slice_of = [&](std::int64_t t, std::int64_t g) {
    return t < g - w ? 0 : (t < g - s ? 1 : 2);
  };
  std::vector<int> region(static_cast<std::size_t>(gh * gw));
  for (std::int64_t i = 0; i < gh; ++i)
    for (std::int64_t j = 0; j < gw; ++j)
      region[static_cast<std::size_t>(i * gw + j)] = slice_of(i, gh) * 3 + slice_of(j, gw);
  auto vals = mask.data();
  for (std::int64_t wi = 0; wi < gh / w; ++wi)
    for (std::int64_t wj = 0; wj < gw / w; ++wj) {
      const std::int64_t win = wi * (gw / w) + wj;
      for (std::int64_t p = 0; p < n; ++p)
        for (std::int64_t q = 0; q < n; ++q) {
          const int rp = region[static_cast<std::size_t>((wi * w + p / w) * gw + wj * w + p % w)];
          const int rq = region[static_cast<std::size_t>((wi * w + q / w) * gw + wj * w + q % w)];
          if (rp != rq) vals[(win * n + p) * n + q] = T(-1e4);
        }
    }
  return mask;
}

// Gather rows into a ((2w-1)^2, heads) bias table: entry p*n+q holds the
// table row for the relative offset between tokens p and q of a window.
inline std::shared_ptr<const std::vector<std::int64_t>> relative_position_rows(int w) {
  const std::int64_t n = std::int64_t(w) * w, span = 2 * w - 1;
  auto rows = std::make_shared<std::vector<std::int64_t>>();
  rows->reserve(static_cast<std::size_t>(n * n));
  for (std::int64_t p = 0; p < n; ++p)
    for (std::int64_t q = 0; q < n; ++q)
      rows->push_back((p / w - q / w + w - 1) * span + (p % w - q % w + w - 1));
  return rows;
}

// Multi-head self-attention within each window: softmax(q k^T / sqrt(dh)
// [+ relative-position bias] [+ mask]) v, heads concatenated, then an output
// projection. Queries, keys, and values come from one fused dim -> 3*dim
// projection (features [0,D) = q, [D,2D) = k, [2D,3D) = v).
template <typename T>
struct WindowAttention {
  int dim = 0, heads = 0, window = 0;
  bool use_rel_bias = true;
  LinearLayer<T> qkv;          // dim -> 3*dim
  LinearLayer<T> proj;         // dim -> dim
  Tensor<T> rel_bias_table;    // ((2w-1)^2, heads); defined only when use_rel_bias
  std::shared_ptr<const std::vector<std::int64_t>> rel_rows;
  // Test hook: when set, receives the post-softmax attention weights
  // (batch * windows, heads, w*w, w*w) of every forward call.
  mutable std::vector<Tensor<T>>* capture_attention = nullptr;

  static WindowAttention make(int dim, int heads, int window, bool rel_bias, Rng* rng) {
    if (dim < 1 || heads < 1 || dim % heads != 0)
      throw ConfigError("attention: embed dim " + std::to_string(dim) +
                        " not divisible by head count " + std::to_string(heads));
    if (window < 1) throw ConfigError("attention: window size must be positive");
    WindowAttention a;
    a.dim = dim;
    a.heads = heads;
    a.window = window;
    a.use_rel_bias = rel_bias;
    a.qkv = LinearLayer<T>::make(dim, 3 * std::int64_t(dim), rng, true);
    a.proj = LinearLayer<T>::make(dim, dim, rng, true);
    if (rel_bias) {
      const std::int64_t entries = std::int64_t(2 * window - 1) * (2 * window - 1);
      a.rel_bias_table = Tensor<T>::zeros({entries, std::int64_t(heads)});
      a.rel_bias_table.set_requires_grad();
      if (rng != nullptr) fill_trunc_normal(a.rel_bias_table, *rng);
      a.rel_rows = relative_position_rows(window);
    }
    return a;
  }
  static WindowAttention init(int dim, int heads, int window, bool rel_bias, Rng& rng) {
    return make(dim, heads, window, rel_bias, &rng);
  }
  static WindowAttention zeros(int dim, int heads, int window, bool rel_bias) {
    return make(dim, heads, window, rel_bias, nullptr);
  }

  // windows: (batch * windows, w*w, dim). mask: null or (windows, w*w, w*w)
  // broadcast over the batch (dim 0 of `windows` cycles through grid windows
  // fastest, exactly as window_partition emits them).
  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& windows, const Tensor<T>* mask) const {
    const std::int64_t n = std::int64_t(window) * window;
    if (windows.rank() != 3 || windows.dim(1) != n || windows.dim(2) != dim)
      throw Error("window_msa: expected (windows, " + std::to_string(n) + ", " +
                  std::to_string(dim) + "), got " + shape_str(windows.shape()));
    const std::int64_t m = windows.dim(0), dh = dim / heads;
    Tensor<T> packed = qkv(tape, windows);  // (m, n, 3*dim)
    packed = reshape(tape, packed, {m, n, 3, heads, dh});
    const std::array<int, 5> split_first{2, 0, 3, 1, 4};
    packed = permute(tape, packed, split_first);  // (3, m, heads, n, dh)
    std::vector<Tensor<T>> qkv_parts = split(tape, packed, 0, 3);
    Tensor<T> q = reshape(tape, qkv_parts[0], {m, heads, n, dh});
    Tensor<T> k = reshape(tape, qkv_parts[1], {m, heads, n, dh});
    Tensor<T> v = reshape(tape, qkv_parts[2], {m, heads, n, dh});
    q = scale(tape, q, T(1) / std::sqrt(T(dh)));
    const std::array<int, 4> transpose_last{0, 1, 3, 2};
    Tensor<T> scores = matmul(tape, q, permute(tape, k, transpose_last));  // (m, heads, n, n)
    if (use_rel_bias) {
      Tensor<T> bias = gather_rows(tape, rel_bias_table, rel_rows);  // (n*n, heads)
      bias = reshape(tape, bias, {n, n, heads});
      const std::array<int, 3> heads_first{2, 0, 1};
      bias = permute(tape, bias, heads_first);  // (heads, n, n) broadcast over m
      scores = add(tape, scores, bias);
    }
    if (mask != nullptr) {
      const std::int64_t nw = mask->defined() ? mask->dim(0) : 0;
      if (nw < 1 || mask->rank() != 3 || mask->dim(1) != n || mask->dim(2) != n || m % nw != 0)
        throw Error("window_msa: mask " + shape_str(mask->shape()) +
                    " does not cover windows " + shape_str(windows.shape()));
      scores = reshape(tape, scores, {m / nw, nw, heads, n, n});
      scores = add(tape, scores, reshape(tape, *mask, {nw, 1, n, n}));
      scores = reshape(tape, scores, {m, heads, n, n});
    }
    Tensor<T> attn = softmax(tape, scores, 3);
    if (capture_attention != nullptr) capture_attention->push_back(attn);
    Tensor<T> ctx = matmul(tape, attn, v);  // (m, heads, n, dh)
    const std::array<int, 4> heads_back{0, 2, 1, 3};
    ctx = permute(tape, ctx, heads_back);
    ctx = reshape(tape, ctx, {m, n, dim});
    return proj(tape, ctx);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    qkv.collect(prefix + ".qkv", out);
    proj.collect(prefix + ".proj", out);
    if (use_rel_bias) out.emplace_back(prefix + ".rel_bias", rel_bias_table);
  }
};

// One attention block: pre-norm windowed attention with a residual, then a
// pre-norm 4x GELU MLP with a residual. shift > 0 rolls the grid before
// attention, applies the seam mask, and rolls back after.
template <typename T>
struct SwinBlock {
  int dim = 0, window = 0, shift = 0;
  std::int64_t grid_h = 0, grid_w = 0;
  LayerNormLayer<T> norm1, norm2;
  WindowAttention<T> attn;
  LinearLayer<T> fc1, fc2;
  Tensor<T> shift_mask;  // (windows, w*w, w*w); defined only when shift > 0

  static SwinBlock make(int dim, int heads, int window, int shift, std::int64_t grid_h,
                        std::int64_t grid_w, bool rel_bias, Rng* rng) {
    SwinBlock blk;
    blk.dim = dim;
    blk.window = window;
    blk.shift = shift;
    blk.grid_h = grid_h;
    blk.grid_w = grid_w;
    blk.norm1 = LayerNormLayer<T>::init(dim);
    blk.norm2 = LayerNormLayer<T>::init(dim);
    blk.attn = WindowAttention<T>::make(dim, heads, window, rel_bias, rng);
    blk.fc1 = LinearLayer<T>::make(dim, 4 * std::int64_t(dim), rng, true);
    blk.fc2 = LinearLayer<T>::make(4 * std::int64_t(dim), dim, rng, true);
    if (shift > 0) blk.shift_mask = build_shift_mask<T>(grid_h, grid_w, window, shift);
    return blk;
  }

  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& g, double drop_p = 0.0,
                    Rng* drop_rng = nullptr) const {
    if (g.rank() != 4 || g.dim(1) != grid_h || g.dim(2) != grid_w || g.dim(3) != dim)
      throw Error("swin_block: expected (batch, " + std::to_string(grid_h) + ", " +
                  std::to_string(grid_w) + ", " + std::to_string(dim) + "), got " +
                  shape_str(g.shape()));
    auto maybe_drop = [&](Tensor<T> t) {
      return drop_rng != nullptr && drop_p > 0.0 ? dropout(tape, t, drop_p, true, *drop_rng) : t;
    };
    Tensor<T> y = norm1(tape, g);
    if (shift > 0) y = cyclic_shift(tape, y, shift);
    y = window_partition(tape, y, window);
    y = attn.forward(tape, y, shift > 0 ? &shift_mask : nullptr);
    y = window_reverse(tape, y, window, grid_h, grid_w);
    if (shift > 0) y = cyclic_shift(tape, y, -shift);
    Tensor<T> x1 = add(tape, g, maybe_drop(y));
    y = norm2(tape, x1);
    y = maybe_drop(gelu(tape, fc1(tape, y)));
    y = maybe_drop(fc2(tape, y));
    return add(tape, x1, y);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    norm1.collect(prefix + ".norm1", out);
    attn.collect(prefix + ".attn", out);
    norm2.collect(prefix + ".norm2", out);
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
  }
};

// An even-depth stack of blocks alternating shift 0 and window/2; the block
// at each odd index sees the grid rolled so windows straddle the previous
// block's window borders.
template <typename T>
struct SwinBlockStack {
  int dim = 0, heads = 0, window = 0;
  std::int64_t grid_h = 0, grid_w = 0;
  std::vector<SwinBlock<T>> blocks;
  // Counts forward passes through the whole stack (test instrumentation;
  // not synchronized across threads).
  mutable std::size_t pass_count = 0;
  // Test hook: when set, receives each block's output grid in order.
  mutable std::vector<Tensor<T>>* capture_block_outputs = nullptr;

  static SwinBlockStack make(int depth, int dim, int heads, int window, std::int64_t grid_h,
                             std::int64_t grid_w, bool rel_bias, Rng* rng) {
    std::vector<std::string> issues;
    if (depth < 2 || depth % 2 != 0)
      issues.push_back("block stack depth " + std::to_string(depth) +
                       " must be a positive even number");
    if (dim < 1 || heads < 1 || dim % heads != 0)
      issues.push_back("embed dim " + std::to_string(dim) + " not divisible by head count " +
                       std::to_string(heads));
    if (window < 1 || grid_h < 1 || grid_w < 1 || grid_h % window != 0 || grid_w % window != 0)
      issues.push_back("window size " + std::to_string(window) + " must divide the token grid " +
                       std::to_string(grid_h) + "x" + std::to_string(grid_w));
    if (!issues.empty()) throw ConfigError(std::move(issues));
    SwinBlockStack st;
    st.dim = dim;
    st.heads = heads;
    st.window = window;
    st.grid_h = grid_h;
    st.grid_w = grid_w;
    st.blocks.reserve(static_cast<std::size_t>(depth));
    for (int i = 0; i < depth; ++i) {
      const int shift = i % 2 == 1 ? window / 2 : 0;
      st.blocks.push_back(SwinBlock<T>::make(dim, heads, window, shift, grid_h, grid_w,
                                             rel_bias, rng));
    }
    return st;
  }
  static SwinBlockStack init(int depth, int dim, int heads, int window, std::int64_t grid_h,
                             std::int64_t grid_w, bool rel_bias, Rng& rng) {
    return make(depth, dim, heads, window, grid_h, grid_w, rel_bias, &rng);
  }
  static SwinBlockStack zeros(int depth, int dim, int heads, int window, std::int64_t grid_h,
                              std::int64_t grid_w, bool rel_bias) {
    return make(depth, dim, heads, window, grid_h, grid_w, rel_bias, nullptr);
  }

  int depth() const { return static_cast<int>(blocks.size()); }

  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& g, double drop_p = 0.0,
                    Rng* drop_rng = nullptr) const {
    ++pass_count;
    Tensor<T> y = g;
    for (const SwinBlock<T>& blk : blocks) {
      y = blk.forward(tape, y, drop_p, drop_rng);
      if (capture_block_outputs != nullptr) capture_block_outputs->push_back(y);
    }
    return y;
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].collect(prefix + ".block" + std::to_string(i), out);
  }
};

// Frame -> token grid: cut into P x P patches and project each to dim.
template <typename T>
struct PatchEmbed {
  int patch = 1;
  std::int64_t in_channels = 0, dim = 0;
  LinearLayer<T> proj;

  static PatchEmbed make(std::int64_t in_channels, int patch, std::int64_t dim, Rng* rng) {
    if (in_channels < 1 || patch < 1 || dim < 1)
      throw ConfigError("patch_embed: channels, patch size, and dim must be positive");
    PatchEmbed pe;
    pe.patch = patch;
    pe.in_channels = in_channels;
    pe.dim = dim;
    pe.proj = LinearLayer<T>::make(in_channels * patch * patch, dim, rng, true);
    return pe;
  }
  static PatchEmbed init(std::int64_t in_channels, int patch, std::int64_t dim, Rng& rng) {
    return make(in_channels, patch, dim, &rng);
  }
  static PatchEmbed zeros(std::int64_t in_channels, int patch, std::int64_t dim) {
    return make(in_channels, patch, dim, nullptr);
  }

  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& frames) const {
    if (frames.rank() != 4 || frames.dim(1) != in_channels)
      throw Error("patch_embed: expected " + std::to_string(in_channels) +
                  "-channel frames, got " + shape_str(frames.shape()));
    return proj(tape, extract_patches(tape, frames, patch));
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    proj.collect(prefix + ".proj", out);
  }
};

// Stacks each 2x2 token neighborhood on the channel axis: (B, Gh, Gw, D) ->
// (B, Gh/2, Gw/2, 4D), neighbor order (0,0), (1,0), (0,1), (1,1) in (row
// offset, col offset).
template <typename T>
Tensor<T> merge_2x2(Tape<T>& tape, const Tensor<T>& g) {
  if (g.rank() != 4 || g.dim(1) % 2 != 0 || g.dim(2) % 2 != 0)
    throw Error("patch_merging: grid " + shape_str(g.shape()) + " must have even extents");
  const std::int64_t b = g.dim(0), gh = g.dim(1), gw = g.dim(2), d = g.dim(3);
  Tensor<T> y = reshape(tape, g, {b, gh / 2, 2, gw / 2, 2, d});
  const std::array<int, 6> ax{0, 1, 3, 4, 2, 5};
  y = permute(tape, y, ax);
  return reshape(tape, y, {b, gh / 2, gw / 2, 4 * d});
}

// Inverse resampling: (B, Gh, Gw, 4C) -> (B, 2Gh, 2Gw, C), where channel
// block (di*2 + dj) of a token becomes its (row offset di, col offset dj)
// output neighbor.
template <typename T>
Tensor<T> expand_2x2(Tape<T>& tape, const Tensor<T>& g) {
  if (g.rank() != 4 || g.dim(3) % 4 != 0)
    throw Error("patch_expanding: channels of " + shape_str(g.shape()) +
                " must be divisible by 4");
  const std::int64_t b = g.dim(0), gh = g.dim(1), gw = g.dim(2), c = g.dim(3) / 4;
  Tensor<T> y = reshape(tape, g, {b, gh, gw, 2, 2, c});
  const std::array<int, 6> ax{0, 1, 3, 2, 4, 5};
  y = permute(tape, y, ax);
  return reshape(tape, y, {b, gh * 2, gw * 2, c});
}

// Downsampling stage: 2x2 neighbor concat -> layer norm -> bias-free linear
// 4D -> 2D. Halves both grid extents, doubles the channel dim.
template <typename T>
struct PatchMerging {
  std::int64_t dim = 0;
  LayerNormLayer<T> norm;   // over 4*dim
  LinearLayer<T> reduce;    // 4*dim -> 2*dim

  static PatchMerging make(std::int64_t dim, Rng* rng) {
    if (dim < 1) throw ConfigError("patch_merging: dim must be positive");
    PatchMerging pm;
    pm.dim = dim;
    pm.norm = LayerNormLayer<T>::init(4 * dim);
    pm.reduce = LinearLayer<T>::make(4 * dim, 2 * dim, rng, false);
    return pm;
  }
  static PatchMerging init(std::int64_t dim, Rng& rng) { return make(dim, &rng); }
  static PatchMerging zeros(std::int64_t dim) { return make(dim, nullptr); }

  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& g) const {
    if (g.rank() != 4 || g.dim(3) != dim)
      throw Error("patch_merging: expected dim " + std::to_string(dim) + ", got " +
                  shape_str(g.shape()));
    return reduce(tape, norm(tape, merge_2x2(tape, g)));
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    norm.collect(prefix + ".norm", out);
    reduce.collect(prefix + ".reduce", out);
  }
};

// Upsampling stage: bias-free linear D -> 2D -> spread each token over a 2x2
// block of D/2-channel tokens -> layer norm. Doubles both grid extents,
// halves the channel dim.
template <typename T>
struct PatchExpanding {
  std::int64_t dim = 0;
  LinearLayer<T> expand;    // dim -> 2*dim
  LayerNormLayer<T> norm;   // over dim/2

  static PatchExpanding make(std::int64_t dim, Rng* rng) {
    if (dim < 2 || dim % 2 != 0)
      throw ConfigError("patch_expanding: dim " + std::to_string(dim) + " must be even");
    PatchExpanding pe;
    pe.dim = dim;
    pe.expand = LinearLayer<T>::make(dim, 2 * dim, rng, false);
    pe.norm = LayerNormLayer<T>::init(dim / 2);
    return pe;
  }
  static PatchExpanding init(std::int64_t dim, Rng& rng) { return make(dim, &rng); }
  static PatchExpanding zeros(std::int64_t dim) { return make(dim, nullptr); }

  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& g) const {
    if (g.rank() != 4 || g.dim(3) != dim)
      throw Error("patch_expanding: expected dim " + std::to_string(dim) + ", got " +
                  shape_str(g.shape()));
    return norm(tape, expand_2x2(tape, expand(tape, g)));
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    expand.collect(prefix + ".expand", out);
    norm.collect(prefix + ".norm", out);
  }
};

}  // namespace swinlstm
