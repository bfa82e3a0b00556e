#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "dukd/error.hpp"
#include "dukd/image.hpp"
#include "dukd/model.hpp"
#include "dukd/upcycle.hpp"

namespace dukd {

/// Reports cap PSNR of identical images at this value.
inline constexpr double kPsnrCap = 100.0;

inline double cap_psnr(double db) { return std::min(db, kPsnrCap); }

namespace detail {

template <class T>
Image<T> luma(const Image<T>& img) {
  if (img.channels() == 1) return img;
  return to_y_channel(img);
}

}  // namespace detail

/// PSNR on the Y channel after shaving `shave` border pixels, peak value 1.
/// Single-channel inputs are taken as Y already. Identical inputs give +inf.
template <class T>
double psnr_y(const Image<T>& a, const Image<T>& b, int shave) {
  if (!a.same_shape(b)) throw ShapeError("psnr_y: shape mismatch " + a.shape() + " vs " + b.shape());
  const Image<T> ya = shave_border(detail::luma(a), shave);
  const Image<T> yb = shave_border(detail::luma(b), shave);
  const auto av = ya.values(), bv = yb.values();
  double sse = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(av.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace detail {

inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size) * size);
  const int r = size / 2;
  double sum = 0.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double dy = y - r, dx = x - r;
      w[y * size + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      sum += w[y * size + x];
    }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace detail

/// Single-scale SSIM on Y: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, averaged over the valid-window map.
template <class T>
double ssim_y(const Image<T>& a, const Image<T>& b, int shave) {
  if (!a.same_shape(b)) throw ShapeError("ssim_y: shape mismatch " + a.shape() + " vs " + b.shape());
  constexpr int kWin = 11;
  const Image<T> ya = shave_border(detail::luma(a), shave);
  const Image<T> yb = shave_border(detail::luma(b), shave);
  if (ya.height() < kWin || ya.width() < kWin)
    throw SizeError("ssim_y: image " + ya.shape() + " smaller than the 11x11 window after shaving");
  static const std::vector<double> w = detail::gaussian_window(kWin, 1.5);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int oh = ya.height() - kWin + 1, ow = ya.width() - kWin + 1;
  double total = 0.0;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const double k = w[i * kWin + j];
          const double va = ya.at(0, y + i, x + j), vb = yb.at(0, y + i, x + j);
          ma += k * va;
          mb += k * vb;
          saa += k * va * va;
          sbb += k * vb * vb;
          sab += k * va * vb;
        }
      const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
      const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
      const double den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
      total += num / den;
    }
  return total / (static_cast<double>(oh) * ow);
}

struct EvalOptions {
  int shave = 0;
  bool quantize = true;
};

/// Clamp to [0,1] and optionally snap to 8-bit levels, as done before scoring.
template <class T>
Image<T> prepare_for_metrics(const Image<T>& img, bool quantize) {
  return quantize ? quantize_u8(img) : clamp01(img);
}

struct DatasetMetrics {
  std::string dataset;
  int scale = 0;
  std::string method;
  double psnr = 0.0;
  double ssim = 0.0;
  int n_images = 0;
  int shave = 0;
  bool quantized = true;
};

inline nlohmann::json to_json(const DatasetMetrics& m) {
  return {{"dataset", m.dataset}, {"scale", m.scale},       {"method", m.method},
          {"psnr", cap_psnr(m.psnr)}, {"ssim", m.ssim},     {"n_images", m.n_images},
          {"shave", m.shave},     {"quantized", m.quantized}, {"identical", std::isinf(m.psnr)}};
}

struct MetricReport {
  std::vector<DatasetMetrics> datasets;
};

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : r.datasets) arr.push_back(to_json(d));
  return arr;
}

template <class T>
DatasetMetrics evaluate(const SRNetwork<T>& model, std::span<const TrainingPair<T>> pairs, const std::string& dataset,
                        const std::string& method, const EvalOptions& opt) {
  if (pairs.empty()) throw DataError("dataset '" + dataset + "' is empty");
  DatasetMetrics m{dataset, model.scale(), method, 0.0, 0.0, 0, opt.shave, opt.quantize};
  for (const auto& p : pairs) {
    const Image<T> sr = prepare_for_metrics(model.infer(p.lr), opt.quantize);
    m.psnr += psnr_y(sr, p.hr, opt.shave);
    m.ssim += ssim_y(sr, p.hr, opt.shave);
    ++m.n_images;
  }
  m.psnr /= m.n_images;
  m.ssim /= m.n_images;
  return m;
}

enum class Split { train, test };

inline std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ConfigError("split must be 'train' or 'test', got '" + s + "'");
}

/// Student/teacher output agreement vs student/ground-truth fidelity.
struct SimilarityReport {
  double psnr_s_t = 0.0;
  double psnr_s_gt = 0.0;
  Split split = Split::test;
  int n_images = 0;
};

inline nlohmann::json to_json(const SimilarityReport& r) {
  return {{"split", to_string(r.split)},
          {"psnr_s_t", cap_psnr(r.psnr_s_t)},
          {"psnr_s_gt", cap_psnr(r.psnr_s_gt)},
          {"identical", std::isinf(r.psnr_s_t)},
          {"n_images", r.n_images}};
}

template <class T>
SimilarityReport similarity_report(const SRNetwork<T>& student, const SRNetwork<T>& teacher,
                                   std::span<const TrainingPair<T>> pairs, Split split, const EvalOptions& opt) {
  if (pairs.empty()) throw DataError("similarity_report: empty dataset");
  if (student.scale() != teacher.scale()) throw ConfigError("student and teacher scales differ");
  SimilarityReport r;
  r.split = split;
  for (const auto& p : pairs) {
    if (p.scale != student.scale()) throw ConfigError("dataset scale does not match the models");
    const Image<T> s = prepare_for_metrics(student.infer(p.lr), opt.quantize);
    const Image<T> t = prepare_for_metrics(teacher.infer(p.lr), opt.quantize);
    r.psnr_s_t += psnr_y(s, t, opt.shave);
    r.psnr_s_gt += psnr_y(s, p.hr, opt.shave);
    ++r.n_images;
  }
  r.psnr_s_t /= r.n_images;
  r.psnr_s_gt /= r.n_images;
  return r;
}

}  // namespace dukd
