#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dukd/error.hpp"
#include "dukd/image.hpp"

namespace dukd {

enum class ResampleDirection { down, up };

struct ResampleSpec {
  int scale = 2;
  ResampleDirection direction = ResampleDirection::down;
  bool antialias = true;  // only meaningful for down

  static ResampleSpec down(int scale) { return {scale, ResampleDirection::down, true}; }
  static ResampleSpec up(int scale) { return {scale, ResampleDirection::up, false}; }
};

namespace detail {

/// Keys cubic convolution kernel, a = -0.5.
inline double cubic_kernel(double x) {
  const double ax = std::abs(x);
  const double ax2 = ax * ax;
  const double ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax <= 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

/// Symmetric edge extension with the edge sample repeated (..., 1, 0 | 0, 1, ...).
inline int mirror_index(long idx, int n) {
  const long period = 2L * n;
  long m = idx % period;
  if (m < 0) m += period;
  return static_cast<int>(m < n ? m : period - 1 - m);
}

/// Per-output-sample taps along one axis.
struct AxisWeights {
  int taps = 0;
  std::vector<int> index;      // out_len * taps, already mirrored
  std::vector<double> weight;  // out_len * taps, rows sum to 1
};

/// Tap layout of the MATLAB-compatible resizer; `factor` is out/in.
inline AxisWeights axis_weights(int in_len, int out_len, double factor, bool antialias) {
  const bool widen = factor < 1.0 && antialias;
  const double kernel_width = widen ? 4.0 / factor : 4.0;
  AxisWeights w;
  w.taps = static_cast<int>(std::ceil(kernel_width)) + 2;
  w.index.resize(static_cast<std::size_t>(out_len) * w.taps);
  w.weight.resize(w.index.size());
  for (int i = 0; i < out_len; ++i) {
    // 1-based coordinates throughout, matching the reference definition
    const double u = (i + 1) / factor + 0.5 * (1.0 - 1.0 / factor);
    const long left = static_cast<long>(std::floor(u - kernel_width / 2.0));
    double sum = 0.0;
    for (int p = 0; p < w.taps; ++p) {
      const long j = left + p;
      const double d = u - static_cast<double>(j);
      const double k = widen ? factor * cubic_kernel(factor * d) : cubic_kernel(d);
      w.weight[i * w.taps + p] = k;
      w.index[i * w.taps + p] = mirror_index(j - 1, in_len);
      sum += k;
    }
    for (int p = 0; p < w.taps; ++p) w.weight[i * w.taps + p] /= sum;
  }
  return w;
}

}  // namespace detail

/// Bicubic resampling by an integer factor, compatible with the benchmark
/// resizer used to produce SR test sets (a = -0.5, kernel widened by the
/// factor on downscale, symmetric borders). Output clamped to [0,1].
template <class T>
Image<T> bicubic_resize(const Image<T>& img, const ResampleSpec& spec) {
  if (spec.scale < 1) throw ConfigError("resample scale must be positive, got " + std::to_string(spec.scale));
  const bool down = spec.direction == ResampleDirection::down;
  int out_h = 0, out_w = 0;
  double factor = 0.0;
  if (down) {
    if (img.height() % spec.scale != 0 || img.width() % spec.scale != 0)
      throw DivisibilityError("image " + img.shape() + " not divisible by scale " + std::to_string(spec.scale) +
                              "; crop before down-resizing");
    out_h = img.height() / spec.scale;
    out_w = img.width() / spec.scale;
    factor = 1.0 / spec.scale;
  } else {
    out_h = img.height() * spec.scale;
    out_w = img.width() * spec.scale;
    factor = static_cast<double>(spec.scale);
  }

  const auto wy = detail::axis_weights(img.height(), out_h, factor, spec.antialias);
  const auto wx = detail::axis_weights(img.width(), out_w, factor, spec.antialias);

  Image<T> out(img.channels(), out_h, out_w);
  std::vector<double> tmp(static_cast<std::size_t>(out_h) * img.width());
  for (int c = 0; c < img.channels(); ++c) {
    // rows first
    for (int i = 0; i < out_h; ++i)
      for (int x = 0; x < img.width(); ++x) {
        double acc = 0.0;
        for (int p = 0; p < wy.taps; ++p)
          acc += wy.weight[i * wy.taps + p] * static_cast<double>(img.at(c, wy.index[i * wy.taps + p], x));
        tmp[static_cast<std::size_t>(i) * img.width() + x] = acc;
      }
    for (int i = 0; i < out_h; ++i)
      for (int j = 0; j < out_w; ++j) {
        double acc = 0.0;
        for (int p = 0; p < wx.taps; ++p)
          acc += wx.weight[j * wx.taps + p] * tmp[static_cast<std::size_t>(i) * img.width() + wx.index[j * wx.taps + p]];
        out.at(c, i, j) = static_cast<T>(std::clamp(acc, 0.0, 1.0));
      }
  }
  return out;
}

}  // namespace dukd
