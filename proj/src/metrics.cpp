#include "swinlstm/metrics.hpp"

#include <cstdio>

namespace swinlstm {

std::string to_string(MseConvention c) {
  return c == MseConvention::pixel_mean ? "pixel-mean" : "frame-sum";
}

std::vector<double> gaussian_window(int size, double sigma) {
  if (size < 1 || !(sigma > 0.0)) throw Error("gaussian_window: need size >= 1 and sigma > 0");
  std::vector<double> w(static_cast<std::size_t>(size) * static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double d2 = (i - c) * (i - c) + (j - c) * (j - c);
      const double v = std::exp(-d2 / (2.0 * sigma * sigma));
      w[static_cast<std::size_t>(i * size + j)] = v;
      sum += v;
    }
  for (double& v : w) v /= sum;
  return w;
}

namespace {

std::string format_row(const std::string& label, const double* vals, std::size_t n) {
  std::string row = label;
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), ",%.17g", vals[i]);
    row += buf;
  }
  row += '\n';
  return row;
}

}  // namespace

std::string MetricReport::to_csv() const {
  std::string out = "frame,mse_pixel,mse_frame_sum,mae_pixel,psnr_db,ssim\n";
  for (std::size_t t = 0; t < mse_pixel.size(); ++t) {
    const double vals[5] = {mse_pixel[t], mse_frame_sum[t], mae_pixel[t], psnr_db[t],
                            ssim_val[t]};
    out += format_row(std::to_string(t), vals, 5);
  }
  const double avgs[5] = {avg_mse_pixel, avg_mse_frame_sum, avg_mae_pixel, avg_psnr_db, avg_ssim};
  out += format_row("avg", avgs, 5);
  return out;
}

std::string MetricReport::summary() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "frames: %zu\nmse (pixel-mean): %.6g\nmse (frame-sum): %.6g\n"
                "mae (pixel-mean): %.6g\npsnr: %.4f dB\nssim: %.6f\n",
                mse_pixel.size(), avg_mse_pixel, avg_mse_frame_sum, avg_mae_pixel, avg_psnr_db,
                avg_ssim);
  return std::string(buf) + "conventions: " + conventions + "\n";
}

}  // namespace swinlstm
