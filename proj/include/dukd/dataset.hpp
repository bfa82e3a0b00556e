#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dukd/error.hpp"
#include "dukd/image.hpp"
#include "dukd/model.hpp"
#include "dukd/png_io.hpp"
#include "dukd/resize.hpp"
#include "dukd/rng.hpp"
#include "dukd/upcycle.hpp"

namespace dukd {

namespace fs = std::filesystem;

struct ManifestEntry {
  std::string hr;
  std::string lr;  // generated when the source has no LR counterpart
};

struct DatasetManifest {
  std::string name;
  std::string root;
  std::vector<ManifestEntry> entries;
  int scale = 2;
  std::string degradation = "bicubic";
};

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries) entries.push_back({{"hr", e.hr}, {"lr", e.lr}});
  return {{"name", m.name}, {"root", m.root}, {"scale", m.scale}, {"degradation", m.degradation}, {"entries", entries}};
}

struct IngestOptions {
  std::string degradation = "bicubic";
  bool continue_on_error = false;
};

struct IngestResult {
  DatasetManifest manifest;
  int generated = 0;
  int cached = 0;
  std::vector<std::string> failures;
};

inline std::string cache_dir_name(int scale, const std::string& tag) {
  return "lr_x" + std::to_string(scale) + "_" + tag;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a(buf.data(), buf.size()));
}

inline std::vector<fs::path> list_pngs(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) throw DataError("'" + dir.string() + "' is not a directory");
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

/// The LR images a degradation tag produces from a (scale-divisible) HR image.
template <class T>
Image<T> degrade(const Image<T>& hr, int scale, const std::string& degradation) {
  if (degradation != "bicubic") throw ConfigError("unsupported degradation '" + degradation + "'");
  return bicubic_resize(hr, ResampleSpec::down(scale));
}

/// Builds the manifest for a directory of HR PNGs, generating LR images into
/// `{dir}/lr_x{scale}_{tag}/`. HR images are center-cropped to multiples of
/// the scale first. A cached LR is reused while the HR file hash is unchanged.
inline IngestResult ingest(const std::string& dir, int scale, const IngestOptions& opt = {}) {
  if (scale < 1) throw ConfigError("scale must be positive");
  const auto files = list_pngs(dir);
  if (files.empty()) throw DataError("no PNG images in '" + dir + "'");

  IngestResult res;
  res.manifest.name = fs::path(dir).filename().string();
  if (res.manifest.name.empty()) res.manifest.name = fs::path(dir).parent_path().filename().string();
  res.manifest.root = dir;
  res.manifest.scale = scale;
  res.manifest.degradation = opt.degradation;

  const fs::path cache = fs::path(dir) / cache_dir_name(scale, opt.degradation);
  const fs::path index_path = cache / "index.json";
  nlohmann::json index = nlohmann::json::object();
  if (fs::exists(index_path)) {
    std::ifstream in(index_path);
    try {
      index = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception&) {
      index = nlohmann::json::object();
    }
  }
  bool index_dirty = false;

  for (const auto& f : files) {
    const std::string stem = f.stem().string();
    const fs::path lr_path = cache / (stem + ".png");
    try {
      const std::string hash = file_hash(f.string());
      const bool hit = index.contains(stem) && index[stem].value("hr_hash", "") == hash && fs::exists(lr_path);
      if (hit) {
        ++res.cached;
      } else {
        const auto hr = center_crop_divisible(load_image<double>(f.string()), scale);
        fs::create_directories(cache);
        save_image(lr_path.string(), degrade(hr, scale, opt.degradation));
        index[stem] = {{"hr_hash", hash}, {"lr", lr_path.filename().string()}};
        index_dirty = true;
        ++res.generated;
      }
      res.manifest.entries.push_back({f.string(), lr_path.string()});
    } catch (const Error& e) {
      if (!opt.continue_on_error) throw;
      res.failures.push_back(f.string() + ": " + e.what());
    }
  }
  if (index_dirty) {
    std::ofstream out(index_path, std::ios::trunc);
    out << index.dump(2) << '\n';
  }
  if (res.manifest.entries.empty()) throw DataError("no readable images in '" + dir + "'");
  return res;
}

template <class T>
struct PairDataset {
  std::string name;
  int scale = 2;
  std::vector<TrainingPair<T>> pairs;
};

template <class T>
PairDataset<T> load_dataset(const DatasetManifest& m) {
  PairDataset<T> ds{m.name, m.scale, {}};
  for (const auto& e : m.entries) {
    TrainingPair<T> p{load_image<T>(e.lr), center_crop_divisible(load_image<T>(e.hr), m.scale), m.scale};
    p.validate();
    ds.pairs.push_back(std::move(p));
  }
  return ds;
}

// ---- procedural toy corpus -------------------------------------------------

/// One procedural RGB texture in [0,1], quantized to 8 bits. Kinds cycle
/// through smooth gradients with shapes, checkerboards, Gabor-like wave
/// packets and a blend of all three.
inline Image<double> synthetic_texture(int size, int kind, Rng& rng) {
  Image<double> img(3, size, size);
  const double pi = std::numbers::pi;
  auto rand = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform01(); };

  std::array<double, 3> base{}, tint{};
  for (int c = 0; c < 3; ++c) {
    base[c] = rand(0.2, 0.8);
    tint[c] = rand(-0.35, 0.35);
  }

  // gradient with a few hard-edged discs
  const double gdir = rand(0, 2 * pi);
  struct Disc {
    double cy, cx, r;
    std::array<double, 3> col;
  };
  std::vector<Disc> discs;
  for (int i = 0; i < 3; ++i) discs.push_back({rand(0, size), rand(0, size), rand(size * 0.08, size * 0.25),
                                               {rand(0, 1), rand(0, 1), rand(0, 1)}});
  // checkerboard, possibly rotated
  const double cell = rand(2.5, 7.0);
  const double cang = rand(0, pi / 2);
  // wave packets
  struct Wave {
    double fy, fx, phase, amp, cy, cx, sigma;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 3; ++i) {
    const double f = rand(0.06, 0.3), th = rand(0, pi);
    waves.push_back({f * std::sin(th), f * std::cos(th), rand(0, 2 * pi), rand(0.15, 0.35), rand(0, size),
                     rand(0, size), rand(size * 0.2, size * 0.6)});
  }

  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double u = (x * std::cos(gdir) + y * std::sin(gdir)) / size;
      double grad_v = u;
      std::array<double, 3> shape_col{};
      bool in_disc = false;
      for (const auto& d : discs)
        if ((y - d.cy) * (y - d.cy) + (x - d.cx) * (x - d.cx) < d.r * d.r) {
          shape_col = d.col;
          in_disc = true;
        }
      const double ry = y * std::cos(cang) - x * std::sin(cang);
      const double rx = y * std::sin(cang) + x * std::cos(cang);
      const double checker = (static_cast<long>(std::floor(ry / cell) + std::floor(rx / cell)) & 1) ? 1.0 : -1.0;
      double wave = 0.0;
      for (const auto& w : waves) {
        const double env = std::exp(-((y - w.cy) * (y - w.cy) + (x - w.cx) * (x - w.cx)) / (2 * w.sigma * w.sigma));
        wave += w.amp * env * std::cos(2 * pi * (w.fy * y + w.fx * x) + w.phase);
      }
      for (int c = 0; c < 3; ++c) {
        double v = 0.0;
        switch (kind % 4) {
          case 0: v = in_disc ? shape_col[c] : base[c] + tint[c] * (grad_v - 0.5) * 2; break;
          case 1: v = base[c] + 0.3 * checker * (0.5 + tint[c]); break;
          case 2: v = base[c] + wave * (1.0 + tint[c]); break;
          default:
            v = 0.5 * (base[c] + tint[c] * (grad_v - 0.5)) + 0.12 * checker + 0.8 * wave * (1.0 + tint[c]) +
                (in_disc ? 0.25 * (shape_col[c] - 0.5) : 0.0) + 0.2;
            break;
        }
        img.at(c, y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  return quantize_u8(img);
}

/// `count` HR textures with their bicubic LR counterparts (LR quantized to 8 bits).
template <class T>
std::vector<TrainingPair<T>> synthetic_pairs(int count, int size, int scale, std::uint64_t seed) {
  if (size % scale != 0) throw DivisibilityError("synthetic image size must be divisible by the scale");
  Rng rng(seed);
  std::vector<TrainingPair<T>> pairs;
  for (int i = 0; i < count; ++i) {
    const Image<double> hr = synthetic_texture(size, i, rng);
    const Image<double> lr = quantize_u8(bicubic_resize(hr, ResampleSpec::down(scale)));
    pairs.push_back({lr.cast<T>(), hr.cast<T>(), scale});
  }
  return pairs;
}

/// Writes `count` HR textures as PNGs named img_000.png, ...
inline void write_synthetic_corpus(const std::string& dir, int count, int size, std::uint64_t seed) {
  fs::create_directories(dir);
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    std::ostringstream name;
    name << "img_" << std::setw(3) << std::setfill('0') << i << ".png";
    save_image((fs::path(dir) / name.str()).string(), synthetic_texture(size, i, rng));
  }
}

}  // namespace dukd
