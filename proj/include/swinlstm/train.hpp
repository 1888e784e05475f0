#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "swinlstm/checkpoint.hpp"
#include "swinlstm/config.hpp"
#include "swinlstm/errors.hpp"
#include "swinlstm/model.hpp"
#include "swinlstm/rng.hpp"
#include "swinlstm/tensor.hpp"

namespace swinlstm {

// Optimization settings for the two-phase pipeline. frames_per_phase is S:
// every training sample carries S observed frames followed by S targets.
struct TrainConfig {
  double learning_rate = 1e-4;
  std::int64_t batch_size = 4;
  std::int64_t epochs = 1;
  std::int64_t frames_per_phase = 10;
  LossMode loss = LossMode::l2;
  std::uint64_t seed = 0;
  // Save a checkpoint every this many epochs; 0 disables periodic saves.
  std::int64_t checkpoint_interval = 0;

  void validate() const;
  std::string to_text() const;
  static TrainConfig from_text(const std::string& text);
  // Getter-only half of from_text; see ModelConfig::read.
  static TrainConfig read(KvReader& r);

  bool operator==(const TrainConfig&) const = default;
};

// Mean loss over a sequence of prediction/target frame pairs, reduced in a
// fixed order per sample: pixels within a frame first, then frames, then the
// batch. Shuffling samples inside the batch only reorders the final short
// sum, so the result is stable to within a few ulps.
template <typename T>
Tensor<T> sequence_loss(Tape<T>& tape, const std::vector<Tensor<T>>& pred,
                        const std::vector<Tensor<T>>& target, LossMode mode) {
  if (pred.empty() || pred.size() != target.size())
    throw Error("sequence_loss: got " + std::to_string(pred.size()) + " predictions for " +
                std::to_string(target.size()) + " targets");
  Tensor<T> sq_per_sample, ab_per_sample;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    Tensor<T> d = sub(tape, pred[i], target[i]);
    d = reshape(tape, d, Shape{d.dim(0), -1});
    Tensor<T> sq = row_mean(tape, mul(tape, d, d));
    sq_per_sample = i == 0 ? sq : add(tape, sq_per_sample, sq);
    if (mode == LossMode::l1_l2) {
      Tensor<T> ab = row_mean(tape, abs(tape, d));
      ab_per_sample = i == 0 ? ab : add(tape, ab_per_sample, ab);
    }
  }
  const T inv_frames = T(1) / static_cast<T>(pred.size());
  Tensor<T> l2 = mean(tape, scale(tape, sq_per_sample, inv_frames));
  if (mode == LossMode::l2) return l2;
  Tensor<T> l1 = mean(tape, scale(tape, ab_per_sample, inv_frames));
  return add(tape, l1, l2);
}

// Bias-corrected Adam over a fixed, ordered parameter list. step() validates
// every gradient before touching any state, so a non-finite gradient aborts
// the whole update with the offending parameter named.
template <typename T>
class Adam {
 public:
  struct Moments {
    Tensor<T> m, v;
  };

  explicit Adam(NamedParams<T> params, double lr = 1e-4, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    moments_.reserve(params_.size());
    for (auto& [name, p] : params_)
      moments_.push_back({Tensor<T>::zeros(p.shape()), Tensor<T>::zeros(p.shape())});
  }

  void step() {
    for (auto& [name, p] : params_) {
      if (!p.has_grad()) continue;
      for (T g : p.grad())
        if (!std::isfinite(static_cast<double>(g)))
          throw NonFiniteError("adam update: gradient of " + name);
    }
    ++step_count_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor<T>& p = params_[i].second;
      auto pv = p.data();
      auto mv = moments_[i].m.data();
      auto vv = moments_[i].v.data();
      const std::span<const T> gv = p.grad();  // empty means zero gradient
      for (std::size_t k = 0; k < pv.size(); ++k) {
        const double g = gv.empty() ? 0.0 : static_cast<double>(gv[k]);
        const double m = beta1_ * static_cast<double>(mv[k]) + (1.0 - beta1_) * g;
        const double v = beta2_ * static_cast<double>(vv[k]) + (1.0 - beta2_) * g * g;
        mv[k] = static_cast<T>(m);
        vv[k] = static_cast<T>(v);
        pv[k] = static_cast<T>(static_cast<double>(pv[k]) -
                               lr_ * (m / c1) / (std::sqrt(v / c2) + eps_));
      }
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

  const NamedParams<T>& params() const { return params_; }
  std::vector<Moments>& moments() { return moments_; }
  const std::vector<Moments>& moments() const { return moments_; }
  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t t) { step_count_ = t; }
  double learning_rate() const { return lr_; }

 private:
  NamedParams<T> params_;
  std::vector<Moments> moments_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t step_count_ = 0;
};

// One optimization step over a batch laid out as 2S frames of shape
// (batch, channels, height, width): the S observed frames, then the S
// targets. Phase one teacher-forces through the observations; phase two
// re-feeds each prediction, starting from the last observation with the
// carried state. The returned loss covers all 2S-1 prediction/target pairs.
template <typename T>
T train_step(Predictor<T>& net, Adam<T>& opt, const std::vector<Tensor<T>>& frames,
             std::int64_t frames_per_phase, LossMode mode) {
  const std::int64_t s = frames_per_phase;
  if (s < 2) throw Error("train_step: need at least two frames per phase");
  if (static_cast<std::int64_t>(frames.size()) != 2 * s)
    throw Error("train_step: expected " + std::to_string(2 * s) +
                " frames per sample (inputs then targets), got " +
                std::to_string(frames.size()));

  Tape<T> tape;
  NetworkState<T> state;
  bool has_state = false;
  auto advance = [&](const Tensor<T>& f) {
    auto [out, next] = net.forward_step(tape, f, has_state ? &state : nullptr);
    state = std::move(next);
    has_state = true;
    return out;
  };

  std::vector<Tensor<T>> preds, targets;
  preds.reserve(static_cast<std::size_t>(2 * s - 1));
  targets.reserve(preds.capacity());
  for (std::int64_t t = 0; t + 1 < s; ++t) {
    preds.push_back(advance(frames[static_cast<std::size_t>(t)]));
    targets.push_back(frames[static_cast<std::size_t>(t + 1)]);
  }
  Tensor<T> fed = frames[static_cast<std::size_t>(s - 1)];
  for (std::int64_t t = 0; t < s; ++t) {
    fed = advance(fed);
    preds.push_back(fed);
    targets.push_back(frames[static_cast<std::size_t>(s + t)]);
  }

  Tensor<T> loss = sequence_loss(tape, preds, targets, mode);
  opt.zero_grad();
  tape.backward(loss);
  opt.step();
  return loss.item();
}

// Stacks per-sample frames (channels, height, width) into per-time-step
// batch tensors (batch, channels, height, width). Every selected sequence
// must hold the same number of identically shaped frames.
template <typename T>
std::vector<Tensor<T>> stack_batch(const std::vector<std::vector<Tensor<T>>>& dataset,
                                   std::span<const std::size_t> picks) {
  if (picks.empty()) throw Error("stack_batch: empty batch");
  const std::vector<Tensor<T>>& first = dataset.at(picks[0]);
  const std::size_t frames = first.size();
  std::vector<Tensor<T>> out;
  out.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const Tensor<T>& proto = first[t];
    if (proto.rank() != 3)
      throw Error("stack_batch: frames must be (channels, height, width)");
    Tensor<T> stacked =
        Tensor<T>::zeros({static_cast<std::int64_t>(picks.size()), proto.dim(0), proto.dim(1),
                          proto.dim(2)});
    auto sv = stacked.data();
    const std::size_t per = static_cast<std::size_t>(proto.numel());
    for (std::size_t b = 0; b < picks.size(); ++b) {
      const std::vector<Tensor<T>>& seq = dataset.at(picks[b]);
      if (seq.size() != frames || seq[t].shape() != proto.shape())
        throw Error("stack_batch: sequence " + std::to_string(picks[b]) +
                    " does not match the batch layout");
      auto fv = seq[t].data();
      std::copy(fv.begin(), fv.end(), sv.begin() + static_cast<std::ptrdiff_t>(b * per));
    }
    out.push_back(std::move(stacked));
  }
  return out;
}

// Epoch loop: shuffles the sequence order per epoch (derived from the seed
// and epoch index alone, so a resumed run shuffles identically), stacks
// batches, steps the optimizer, appends one CSV row per epoch, and saves
// periodic checkpoints. run() starts from the epoch implied by the
// optimizer's step counter, which is what makes resume seamless.
template <typename T>
class Trainer {
 public:
  Trainer(Predictor<T>& net, const TrainConfig& cfg)
      : net_(&net), cfg_(cfg), opt_(net.parameters(), cfg.learning_rate),
        rng_(Rng::from_seed(cfg.seed, "train")) {
    cfg.validate();
  }

  // Optional validation hook; when set, each CSV row gains val_mse,val_ssim.
  void set_validator(std::function<std::pair<double, double>()> fn) {
    validator_ = std::move(fn);
  }

  // Runs the remaining epochs over sequences of 2S frames each and returns
  // the per-step losses of this call.
  std::vector<T> run(const std::vector<std::vector<Tensor<T>>>& dataset,
                     const std::string& csv_path = "",
                     const std::string& checkpoint_path = "") {
    if (dataset.empty()) throw Error("train: empty dataset");
    const std::int64_t n = static_cast<std::int64_t>(dataset.size());
    const std::int64_t m = std::min<std::int64_t>(cfg_.batch_size, n);
    const std::int64_t steps_per_epoch = (n + m - 1) / m;
    std::vector<T> losses;
    for (std::int64_t epoch = opt_.step_count() / steps_per_epoch; epoch < cfg_.epochs;
         ++epoch) {
      std::vector<std::size_t> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle = Rng::from_seed(cfg_.seed, "train.shuffle").substream(
          static_cast<std::uint64_t>(epoch));
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_index(i))]);

      double epoch_sum = 0.0;
      std::int64_t epoch_steps = 0;
      for (std::int64_t at = 0; at < n; at += m) {
        const std::size_t take = static_cast<std::size_t>(std::min(m, n - at));
        std::span<const std::size_t> picks(order.data() + at, take);
        auto batch = stack_batch(dataset, picks);
        const T loss = train_step(*net_, opt_, batch, cfg_.frames_per_phase, cfg_.loss);
        losses.push_back(loss);
        epoch_sum += static_cast<double>(loss);
        ++epoch_steps;
      }
      if (!csv_path.empty())
        append_csv(csv_path, opt_.step_count(), epoch, epoch_sum / double(epoch_steps));
      if (!checkpoint_path.empty() && cfg_.checkpoint_interval > 0 &&
          (epoch + 1) % cfg_.checkpoint_interval == 0)
        save_checkpoint(checkpoint_path, *net_, opt_, rng_);
    }
    return losses;
  }

  Adam<T>& optimizer() { return opt_; }
  Rng& rng() { return rng_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  void append_csv(const std::string& path, std::int64_t step, std::int64_t epoch,
                  double train_loss) {
    std::ifstream probe(path);
    const bool fresh = !probe.good() || probe.peek() == std::ifstream::traits_type::eof();
    probe.close();
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError(path, "cannot open metrics log for append");
    out << std::setprecision(17);
    if (fresh)
      out << (validator_ ? "step,epoch,train_loss,val_mse,val_ssim"
                         : "step,epoch,train_loss")
          << "\n";
    out << step << "," << epoch << "," << train_loss;
    if (validator_) {
      auto [mse, ssim] = validator_();
      out << "," << mse << "," << ssim;
    }
    out << "\n";
  }

  Predictor<T>* net_;
  TrainConfig cfg_;
  Adam<T> opt_;
  Rng rng_;
  std::function<std::pair<double, double>()> validator_;
};

}  // namespace swinlstm
