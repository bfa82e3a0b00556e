#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "dukd/error.hpp"
#include "dukd/image.hpp"
#include "dukd/metrics.hpp"

namespace dukd {

struct ResultsRow {
  std::string method;
  int scale = 0;
  std::string dataset;
  double psnr = 0.0;
  double ssim = 0.0;
  bool best = false;
};

/// PSNR/SSIM comparison table, one row per (method, scale, dataset).
class ResultsTable {
 public:
  void add(const ResultsRow& row) {
    for (const auto& r : rows_)
      if (r.method == row.method && r.scale == row.scale && r.dataset == row.dataset)
        throw ConfigError("duplicate results row for " + row.method + "/x" + std::to_string(row.scale) + "/" +
                          row.dataset);
    rows_.push_back(row);
  }

  void add_metrics(const DatasetMetrics& m) { add(ResultsRow{m.method, m.scale, m.dataset, cap_psnr(m.psnr), m.ssim, false}); }

  /// Flags the highest-PSNR method within each (scale, dataset) group.
  void mark_best() {
    std::map<std::pair<int, std::string>, std::size_t> best;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      rows_[i].best = false;
      const auto key = std::make_pair(rows_[i].scale, rows_[i].dataset);
      const auto it = best.find(key);
      if (it == best.end() || rows_[i].psnr > rows_[it->second].psnr) best[key] = i;
    }
    for (const auto& [_, i] : best) rows_[i].best = true;
  }

  const std::vector<ResultsRow>& rows() const { return rows_; }

  std::string to_csv() const {
    std::ostringstream os;
    os << "method,scale,dataset,psnr,ssim,best\n" << std::fixed;
    for (const auto& r : rows_)
      os << r.method << ',' << r.scale << ',' << r.dataset << ',' << std::setprecision(4) << r.psnr << ','
         << std::setprecision(4) << r.ssim << ',' << (r.best ? 1 : 0) << '\n';
    return os.str();
  }

  /// Method rows by dataset columns, cells "PSNR/SSIM", best marked with '*'.
  std::string to_text() const {
    std::vector<std::string> datasets, methods;
    for (const auto& r : rows_) {
      if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
      const std::string m = r.method + " x" + std::to_string(r.scale);
      if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
    }
    std::size_t mw = 6;
    for (const auto& m : methods) mw = std::max(mw, m.size());
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(mw)) << "Method";
    for (const auto& d : datasets) os << "  " << std::setw(17) << d;
    os << '\n';
    for (const auto& m : methods) {
      os << std::setw(static_cast<int>(mw)) << m;
      for (const auto& d : datasets) {
        std::string cell = "-";
        for (const auto& r : rows_)
          if (r.method + " x" + std::to_string(r.scale) == m && r.dataset == d) {
            std::ostringstream c;
            c << std::fixed << std::setprecision(2) << r.psnr << '/' << std::setprecision(4) << r.ssim
              << (r.best ? "*" : "");
            cell = c.str();
          }
        os << "  " << std::setw(17) << cell;
      }
      os << '\n';
    }
    return os.str();
  }

 private:
  std::vector<ResultsRow> rows_;
};

struct CropBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

inline CropBox parse_box(const std::string& s) {
  CropBox b;
  char c1 = 0, c2 = 0, c3 = 0;
  std::istringstream is(s);
  if (!(is >> b.x >> c1 >> b.y >> c2 >> b.w >> c3 >> b.h) || c1 != ',' || c2 != ',' || c3 != ',')
    throw ConfigError("box must be x,y,w,h, got '" + s + "'");
  return b;
}

inline void check_box(const CropBox& b, int height, int width) {
  if (b.w < 1 || b.h < 1 || b.x < 0 || b.y < 0 || b.x + b.w > width || b.y + b.h > height)
    throw SizeError("box " + std::to_string(b.x) + "," + std::to_string(b.y) + "," + std::to_string(b.w) + "," +
                    std::to_string(b.h) + " outside image " + std::to_string(width) + "x" + std::to_string(height));
}

/// Equal-sized crops laid out left to right with a `gap`-pixel white separator.
template <class T>
Image<T> side_by_side(const std::vector<Image<T>>& crops, int gap = 2) {
  if (crops.empty()) throw ConfigError("no crops to lay out");
  const int h = crops[0].height(), w = crops[0].width(), c = crops[0].channels();
  for (const auto& im : crops)
    if (!im.same_shape(crops[0])) throw ShapeError("panel crops must share a shape");
  const int n = static_cast<int>(crops.size());
  Image<T> panel(c, h, n * w + (n - 1) * gap, T(1));
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) panel.at(ch, y, i * (w + gap) + x) = crops[i].at(ch, y, x);
  return panel;
}

}  // namespace dukd
