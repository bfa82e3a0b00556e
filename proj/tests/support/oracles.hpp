#pragma once

// Reference implementations used only by tests. They are written as plain
// loops straight from the formulas and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "dukd/augment.hpp"
#include "dukd/image.hpp"
#include "dukd/model.hpp"
#include "dukd/trainer.hpp"

namespace oracle {

using dukd::AugKind;
using dukd::Image;

/// Cubic convolution kernel, a = -0.5.
inline double keys(double x) {
  const double a = -0.5;
  x = std::fabs(x);
  if (x <= 1) return (a + 2) * x * x * x - (a + 3) * x * x + 1;
  if (x < 2) return a * x * x * x - 5 * a * x * x + 8 * a * x - 4 * a;
  return 0.0;
}

/// Half-sample symmetric extension: -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2.
inline int reflect(long p, int n) {
  while (p < 0 || p >= n) {
    if (p < 0) p = -p - 1;
    if (p >= n) p = 2L * n - 1 - p;
  }
  return static_cast<int>(p);
}

/// Weights of every input sample for one output coordinate, by brute force
/// over a generous neighbourhood. `ratio` = output/input length.
inline std::vector<std::pair<long, double>> taps(int out_idx, double ratio, bool antialias) {
  const double center = (out_idx + 0.5) / ratio - 0.5;  // input coordinate, 0-based
  const double stretch = (antialias && ratio < 1) ? ratio : 1.0;
  std::vector<std::pair<long, double>> t;
  double sum = 0.0;
  for (long p = static_cast<long>(std::floor(center)) - 64; p <= static_cast<long>(std::ceil(center)) + 64; ++p) {
    const double w = stretch * keys(stretch * (center - p));
    if (w != 0.0) {
      t.emplace_back(p, w);
      sum += w;
    }
  }
  for (auto& [_, w] : t) w /= sum;
  return t;
}

/// Direct (non-separable) 2-D resampling: every output pixel is the full
/// double sum over its support, then clamped to [0,1].
inline Image<double> bicubic(const Image<double>& in, int out_h, int out_w, bool antialias) {
  Image<double> out(in.channels(), out_h, out_w);
  const double ry = static_cast<double>(out_h) / in.height(), rx = static_cast<double>(out_w) / in.width();
  for (int y = 0; y < out_h; ++y) {
    const auto ty = taps(y, ry, antialias);
    for (int x = 0; x < out_w; ++x) {
      const auto tx = taps(x, rx, antialias);
      for (int c = 0; c < in.channels(); ++c) {
        double acc = 0.0;
        for (const auto& [py, wy] : ty)
          for (const auto& [px, wx] : tx) acc += wy * wx * in.at(c, reflect(py, in.height()), reflect(px, in.width()));
        out.at(c, y, x) = std::clamp(acc, 0.0, 1.0);
      }
    }
  }
  return out;
}

/// Augmentations by explicit index maps. Rotations are counter-clockwise.
template <class T>
Image<T> augment(AugKind k, const Image<T>& in) {
  const int h = in.height(), w = in.width(), ch = in.channels();
  const bool swap = k == AugKind::rot90 || k == AugKind::rot270;
  Image<T> out(ch, swap ? w : h, swap ? h : w);
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x) {
        T v{};
        switch (k) {
          case AugKind::identity: v = in.at(c, y, x); break;
          case AugKind::hflip: v = in.at(c, y, w - 1 - x); break;
          case AugKind::vflip: v = in.at(c, h - 1 - y, x); break;
          case AugKind::rot90: v = in.at(c, x, w - 1 - y); break;
          case AugKind::rot180: v = in.at(c, h - 1 - y, w - 1 - x); break;
          case AugKind::rot270: v = in.at(c, h - 1 - x, y); break;
          case AugKind::color_inversion: v = T(1) - in.at(c, y, x); break;
        }
        out.at(c, y, x) = v;
      }
  return out;
}

inline AugKind inverse(AugKind k) {
  if (k == AugKind::rot90) return AugKind::rot270;
  if (k == AugKind::rot270) return AugKind::rot90;
  return k;
}

template <class T>
long double mean_abs(const Image<T>& a, const Image<T>& b) {
  long double s = 0.0L;
  long n = 0;
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x, ++n) s += std::fabs((long double)a.at(c, y, x) - (long double)b.at(c, y, x));
  return s / static_cast<long double>(n);
}

struct Losses {
  long double rec = 0, zo_rec = 0, kd = 0, dukd_zi = 0, dukd_zo = 0, lc = 0;
  long double total(long double lkd, long double ldukd, long double llc) const {
    return rec + zo_rec + lkd * kd + ldukd * (dukd_zi + dukd_zo) + llc * lc;
  }
};

/// Every loss term of one step, recomputed from the raw pairs. The zoom-in
/// input is re-cropped from the recorded offset, the zoom-out input comes
/// from the direct-convolution resampler and augmentations from index maps.
template <class T>
Losses step_losses(const dukd::SRNetwork<T>& student, const dukd::SRNetwork<T>& teacher,
                   const dukd::StepInputs<T>& in, bool zoom_out) {
  Losses L;
  const long double n = static_cast<long double>(in.pairs.size());
  for (std::size_t i = 0; i < in.pairs.size(); ++i) {
    const auto& p = in.pairs[i];
    const auto sr = student.infer(p.lr);
    L.rec += mean_abs(sr, p.hr) / n;
    L.kd += mean_abs(sr, teacher.infer(p.lr)) / n;

    const auto off = in.upcycled[i].zoom_in_offset;
    Image<T> zi(3, p.lr.height(), p.lr.width());
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < zi.height(); ++y)
        for (int x = 0; x < zi.width(); ++x) zi.at(c, y, x) = p.hr.at(c, off.top + y, off.left + x);
    const auto t_zi = teacher.infer(zi);
    L.dukd_zi += mean_abs(student.infer(zi), t_zi) / n;

    if (zoom_out) {
      const auto zo = bicubic(p.lr.template cast<double>(), p.lr.height() / p.scale, p.lr.width() / p.scale, true)
                          .template cast<T>();
      const auto s_zo = student.infer(zo);
      L.dukd_zo += mean_abs(s_zo, teacher.infer(zo)) / n;
      L.zo_rec += mean_abs(s_zo, p.lr) / n;
    }

    const AugKind k = in.augs[i];
    const auto restored = augment(inverse(k), student.infer(augment(k, zi)));
    L.lc += mean_abs(restored, t_zi) / n;
  }
  return L;
}

/// Random image on the 8-bit lattice.
template <class T>
Image<T> random_u8_image(int c, int h, int w, std::mt19937_64& gen) {
  std::uniform_int_distribution<int> d(0, 255);
  Image<T> img(c, h, w);
  for (T& v : img.values()) v = static_cast<T>(d(gen)) / static_cast<T>(255);
  return img;
}

template <class T>
Image<T> random_image(int c, int h, int w, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  Image<T> img(c, h, w);
  for (T& v : img.values()) v = static_cast<T>(d(gen));
  return img;
}

}  // namespace oracle
