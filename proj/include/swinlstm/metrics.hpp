#pragma once

// Image-quality metrics for predicted frame sequences: MSE and MAE under two
// explicitly named normalizations, PSNR, and Gaussian-windowed SSIM. All
// metrics are reported per predicted frame and averaged over the horizon;
// every report names the conventions it used so numbers from different
// normalizations cannot be compared silently.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swinlstm/errors.hpp"
#include "swinlstm/tensor.hpp"

namespace swinlstm {

// MSE/MAE normalization. pixel_mean averages the per-pixel error over every
// pixel of every leading-axis entry. frame_sum sums the error over the pixels
// of each leading-axis entry ("frame") and averages those sums; benchmark
// scores in the tens for 64x64 video use this convention.
enum class MseConvention { pixel_mean, frame_sum };

std::string to_string(MseConvention c);

// 11x11 Gaussian window with sigma 1.5, row-major, normalized to sum 1.
// Exposed so its normalization and symmetry are directly testable.
std::vector<double> gaussian_window(int size, double sigma);

namespace detail_metrics {

// Shared reduction: per-frame error sums accumulated in index order, then
// both conventions derived from the same total. frame_sum = total / frames;
// pixel_mean = frame_sum / pixels, so frame_sum == pixel_mean * pixels is
// exact whenever the per-frame pixel count is a power of two.
template <typename T, typename ErrFn>
double reduce_error(const Tensor<T>& pred, const Tensor<T>& target, MseConvention conv,
                    const char* op, ErrFn&& err) {
  if (pred.shape() != target.shape())
    throw ShapeError(op, shape_str(pred.shape()), shape_str(target.shape()));
  if (pred.rank() < 1 || pred.numel() == 0)
    throw Error(std::string(op) + ": inputs must be non-empty with a leading frame axis");
  const std::int64_t frames = pred.shape()[0];
  const std::int64_t pixels = pred.numel() / frames;
  const T* p = pred.data().data();
  const T* t = target.data().data();
  double total = 0.0;
  for (std::int64_t f = 0; f < frames; ++f) {
    double frame_sum = 0.0;
    for (std::int64_t i = 0; i < pixels; ++i) {
      const std::int64_t k = f * pixels + i;
      frame_sum += err(static_cast<double>(p[k]), static_cast<double>(t[k]));
    }
    total += frame_sum;
  }
  const double per_frame = total / static_cast<double>(frames);
  return conv == MseConvention::frame_sum ? per_frame
                                          : per_frame / static_cast<double>(pixels);
}

}  // namespace detail_metrics

// Mean squared error; the first axis is the frame/batch axis.
template <typename T>
double mse(const Tensor<T>& pred, const Tensor<T>& target,
           MseConvention conv = MseConvention::pixel_mean) {
  return detail_metrics::reduce_error(pred, target, conv, "mse", [](double a, double b) {
    const double d = a - b;
    return d * d;
  });
}

// Mean absolute error; same axis conventions as mse().
template <typename T>
double mae(const Tensor<T>& pred, const Tensor<T>& target,
           MseConvention conv = MseConvention::pixel_mean) {
  return detail_metrics::reduce_error(pred, target, conv, "mae",
                                      [](double a, double b) { return std::abs(a - b); });
}

// Peak signal-to-noise ratio in decibels over pixel-mean MSE. A pixel-mean
// MSE below 1e-12 (including exact equality) is reported as a capped 120 dB
// sentinel rather than +inf.
template <typename T>
double psnr(const Tensor<T>& pred, const Tensor<T>& target, double max_val = 1.0) {
  const double m = mse(pred, target, MseConvention::pixel_mean);
  if (m < 1e-12) return 120.0;
  return 10.0 * std::log10(max_val * max_val / m);
}

// Structural similarity with an 11x11 Gaussian window (sigma 1.5),
// C1 = (0.01*L)^2, C2 = (0.03*L)^2, evaluated at valid window positions only
// (no padding). The last two axes are the image; every leading-axis slice
// (channel, frame, batch entry) is scored single-channel and the scores are
// averaged, so multi-channel input means per-channel SSIM meaned.
template <typename T>
double ssim(const Tensor<T>& pred, const Tensor<T>& target, double L = 1.0) {
  if (pred.shape() != target.shape())
    throw ShapeError("ssim", shape_str(pred.shape()), shape_str(target.shape()));
  if (pred.rank() < 2) throw Error("ssim: inputs must have at least two axes");
  constexpr int kWin = 11;
  const std::int64_t h = pred.shape()[pred.rank() - 2];
  const std::int64_t w = pred.shape()[pred.rank() - 1];
  if (h < kWin || w < kWin)
    throw Error("ssim: frame " + std::to_string(h) + "x" + std::to_string(w) +
                " is smaller than the " + std::to_string(kWin) + "x" + std::to_string(kWin) +
                " window");
  const std::vector<double> win = gaussian_window(kWin, 1.5);
  const double c1 = (0.01 * L) * (0.01 * L);
  const double c2 = (0.03 * L) * (0.03 * L);
  const std::int64_t slices = pred.numel() / (h * w);
  const T* pd = pred.data().data();
  const T* td = target.data().data();
  double slice_acc = 0.0;
  for (std::int64_t s = 0; s < slices; ++s) {
    const T* x = pd + s * h * w;
    const T* y = td + s * h * w;
    double pos_acc = 0.0;
    for (std::int64_t i = 0; i + kWin <= h; ++i)
      for (std::int64_t j = 0; j + kWin <= w; ++j) {
        double mx = 0.0, my = 0.0, xx = 0.0, yy = 0.0, xy = 0.0;
        for (int a = 0; a < kWin; ++a)
          for (int b = 0; b < kWin; ++b) {
            const double g = win[static_cast<std::size_t>(a * kWin + b)];
            const double xv = static_cast<double>(x[(i + a) * w + (j + b)]);
            const double yv = static_cast<double>(y[(i + a) * w + (j + b)]);
            mx += g * xv;
            my += g * yv;
            xx += g * xv * xv;
            yy += g * yv * yv;
            xy += g * xv * yv;
          }
        const double vx = xx - mx * mx;
        const double vy = yy - my * my;
        const double cov = xy - mx * my;
        pos_acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    const std::int64_t positions = (h - kWin + 1) * (w - kWin + 1);
    slice_acc += pos_acc / static_cast<double>(positions);
  }
  return slice_acc / static_cast<double>(slices);
}

// Per-frame metric values over a prediction horizon plus their averages.
// Averages equal the mean of the per-frame entries; `conventions` records the
// normalization of every column.
struct MetricReport {
  std::vector<double> mse_pixel;      // pixel-mean MSE per predicted frame
  std::vector<double> mse_frame_sum;  // frame-sum MSE per predicted frame
  std::vector<double> mae_pixel;      // pixel-mean MAE per predicted frame
  std::vector<double> psnr_db;        // PSNR per predicted frame
  std::vector<double> ssim_val;       // SSIM per predicted frame
  double avg_mse_pixel = 0.0;
  double avg_mse_frame_sum = 0.0;
  double avg_mae_pixel = 0.0;
  double avg_psnr_db = 0.0;
  double avg_ssim = 0.0;
  std::string conventions;

  // CSV with one row per frame plus a final "avg" row, full double precision.
  std::string to_csv() const;
  // Human-readable multi-line summary including the conventions record.
  std::string summary() const;
};

// Scores a rollout against ground truth frame by frame. Each entry of `pred`
// and `truth` is one time step (batch and channels in the tensor axes).
template <typename T>
MetricReport evaluate_rollout(const std::vector<Tensor<T>>& pred,
                              const std::vector<Tensor<T>>& truth, double max_val = 1.0) {
  if (pred.empty() || pred.size() != truth.size())
    throw Error("evaluate_rollout: need equal non-zero frame counts, got " +
                std::to_string(pred.size()) + " predictions and " + std::to_string(truth.size()) +
                " targets");
  MetricReport r;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    r.mse_pixel.push_back(mse(pred[t], truth[t], MseConvention::pixel_mean));
    r.mse_frame_sum.push_back(mse(pred[t], truth[t], MseConvention::frame_sum));
    r.mae_pixel.push_back(mae(pred[t], truth[t], MseConvention::pixel_mean));
    r.psnr_db.push_back(psnr(pred[t], truth[t], max_val));
    r.ssim_val.push_back(ssim(pred[t], truth[t], max_val));
  }
  const auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  r.avg_mse_pixel = mean_of(r.mse_pixel);
  r.avg_mse_frame_sum = mean_of(r.mse_frame_sum);
  r.avg_mae_pixel = mean_of(r.mae_pixel);
  r.avg_psnr_db = mean_of(r.psnr_db);
  r.avg_ssim = mean_of(r.ssim_val);
  r.conventions =
      "mse_pixel/mae_pixel: mean over all pixels; mse_frame_sum: per-frame pixel sum averaged "
      "over frames and batch; psnr: pixel-mean MSE, max value " +
      std::to_string(max_val) + ", capped at 120 dB; ssim: 11x11 Gaussian window, sigma 1.5";
  return r;
}

}  // namespace swinlstm
