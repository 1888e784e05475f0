#include "swinlstm/model.hpp"

#include <sstream>

namespace swinlstm {
namespace {

std::string join(const std::vector<int>& v) {
  std::string out;
  for (int x : v) {
    if (!out.empty()) out += ",";
    out += std::to_string(x);
  }
  return out;
}

}  // namespace

const char* to_string(Variant v) { return v == Variant::base ? "B" : "D"; }

const char* to_string(Reconstruction r) {
  switch (r) {
    case Reconstruction::transposed: return "transposed";
    case Reconstruction::bilinear: return "bilinear";
    case Reconstruction::linear: return "linear";
  }
  return "?";
}

const char* to_string(LossMode m) { return m == LossMode::l2 ? "L2" : "L1+L2"; }

void ModelConfig::validate() const {
  std::vector<std::string> issues;
  auto bad = [&](std::string s) { issues.push_back(std::move(s)); };

  if (input_channels < 1) bad("input_channels must be positive, got " + std::to_string(input_channels));
  if (patch < 1) bad("patch must be positive, got " + std::to_string(patch));
  if (embed_dim < 1) bad("embed_dim must be positive, got " + std::to_string(embed_dim));
  if (window < 1) bad("window must be positive, got " + std::to_string(window));
  if (heads < 1) bad("heads must be positive, got " + std::to_string(heads));
  if (height < 1 || width < 1)
    bad("frame size must be positive, got " + std::to_string(height) + "x" + std::to_string(width));

  if (patch >= 1 && height >= 1 && width >= 1 && (height % patch != 0 || width % patch != 0))
    bad("frame " + std::to_string(height) + "x" + std::to_string(width) +
        " is not divisible by patch " + std::to_string(patch));
  if (heads >= 1 && embed_dim >= 1 && embed_dim % heads != 0)
    bad("embed_dim " + std::to_string(embed_dim) + " is not divisible by heads " +
        std::to_string(heads));

  const std::size_t want_depths = variant == Variant::base ? 1 : 4;
  if (depths.size() != want_depths)
    bad(std::string("variant ") + to_string(variant) + " needs " + std::to_string(want_depths) +
        " depth entries, got " + std::to_string(depths.size()));
  for (std::size_t i = 0; i < depths.size(); ++i)
    if (depths[i] < 2 || depths[i] % 2 != 0)
      bad("depths[" + std::to_string(i) + "] must be a positive even number, got " +
          std::to_string(depths[i]));

  if (patch >= 1 && window >= 1 && height % patch == 0 && width % patch == 0) {
    const std::int64_t gh = grid_h(), gw = grid_w();
    if (gh % window != 0 || gw % window != 0)
      bad("token grid " + std::to_string(gh) + "x" + std::to_string(gw) +
          " is not divisible by window " + std::to_string(window));
    if (variant == Variant::deep) {
      if (gh % 2 != 0 || gw % 2 != 0)
        bad("variant D needs an even token grid, got " + std::to_string(gh) + "x" +
            std::to_string(gw));
      else if ((gh / 2) % window != 0 || (gw / 2) % window != 0)
        bad("merged grid " + std::to_string(gh / 2) + "x" + std::to_string(gw / 2) +
            " is not divisible by window " + std::to_string(window));
    }
  }

  if (!issues.empty()) throw ConfigError(issues);
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out << "variant = " << to_string(variant) << "\n"
      << "input_channels = " << input_channels << "\n"
      << "height = " << height << "\n"
      << "width = " << width << "\n"
      << "patch = " << patch << "\n"
      << "embed_dim = " << embed_dim << "\n"
      << "window = " << window << "\n"
      << "heads = " << heads << "\n"
      << "depths = " << join(depths) << "\n"
      << "reconstruction = " << to_string(reconstruction) << "\n"
      << "loss = " << to_string(loss) << "\n"
      << "rel_bias = " << (rel_bias ? "true" : "false") << "\n";
  return out.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  KvReader r(text);
  ModelConfig cfg = read(r);
  r.finish();
  cfg.validate();
  return cfg;
}

ModelConfig ModelConfig::read(KvReader& r) {
  ModelConfig cfg;
  cfg.variant = r.get_choice("variant", "B", {"B", "D"}) == "B" ? Variant::base : Variant::deep;
  cfg.input_channels = r.get_int("input_channels", cfg.input_channels);
  cfg.height = r.get_int("height", cfg.height);
  cfg.width = r.get_int("width", cfg.width);
  cfg.patch = r.get_int("patch", cfg.patch);
  cfg.embed_dim = r.get_int("embed_dim", cfg.embed_dim);
  cfg.window = r.get_int("window", cfg.window);
  cfg.heads = r.get_int("heads", cfg.heads);
  cfg.depths = r.get_int_list("depths", cfg.variant == Variant::base
                                            ? std::vector<int>{12}
                                            : std::vector<int>{2, 6, 6, 2});
  const std::string rec = r.get_choice("reconstruction", "transposed",
                                       {"transposed", "bilinear", "linear"});
  cfg.reconstruction = rec == "transposed" ? Reconstruction::transposed
                       : rec == "bilinear" ? Reconstruction::bilinear
                                           : Reconstruction::linear;
  cfg.loss = r.get_choice("loss", "L2", {"L2", "L1+L2"}) == "L2" ? LossMode::l2 : LossMode::l1_l2;
  cfg.rel_bias = r.get_bool("rel_bias", cfg.rel_bias);
  return cfg;
}

}  // namespace swinlstm
