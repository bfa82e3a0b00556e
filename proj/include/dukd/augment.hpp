#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dukd/error.hpp"
#include "dukd/image.hpp"
#include "dukd/rng.hpp"

namespace dukd {

/// Closed set of pixel-grid transforms with exact inverses. Rotations are
/// counter-clockwise.
enum class AugKind { identity, hflip, vflip, rot90, rot180, rot270, color_inversion };

inline constexpr std::array<AugKind, 7> kAllAugKinds{AugKind::identity, AugKind::hflip,  AugKind::vflip,
                                                     AugKind::rot90,    AugKind::rot180, AugKind::rot270,
                                                     AugKind::color_inversion};

inline constexpr std::array<AugKind, 6> kNonIdentityAugKinds{AugKind::hflip,  AugKind::vflip,  AugKind::rot90,
                                                             AugKind::rot180, AugKind::rot270, AugKind::color_inversion};

inline std::string_view to_string(AugKind k) {
  switch (k) {
    case AugKind::identity: return "identity";
    case AugKind::hflip: return "hflip";
    case AugKind::vflip: return "vflip";
    case AugKind::rot90: return "rot90";
    case AugKind::rot180: return "rot180";
    case AugKind::rot270: return "rot270";
    case AugKind::color_inversion: return "color_inversion";
  }
  return "?";
}

inline AugKind aug_from_string(std::string_view s) {
  for (AugKind k : kAllAugKinds)
    if (to_string(k) == s) return k;
  throw ConfigError("unknown augmentation '" + std::string(s) + "'");
}

inline bool is_geometric(AugKind k) { return k != AugKind::color_inversion && k != AugKind::identity; }

inline AugKind inverse_kind(AugKind k) {
  switch (k) {
    case AugKind::rot90: return AugKind::rot270;
    case AugKind::rot270: return AugKind::rot90;
    default: return k;
  }
}

namespace detail {

template <class T>
Image<T> permute(const Image<T>& img, AugKind kind) {
  const int h = img.height(), w = img.width();
  const bool swap = kind == AugKind::rot90 || kind == AugKind::rot270;
  Image<T> out(img.channels(), swap ? w : h, swap ? h : w);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x) {
        int sy = y, sx = x;
        switch (kind) {
          case AugKind::hflip: sx = w - 1 - x; break;
          case AugKind::vflip: sy = h - 1 - y; break;
          case AugKind::rot90: sy = x; sx = w - 1 - y; break;
          case AugKind::rot180: sy = h - 1 - y; sx = w - 1 - x; break;
          case AugKind::rot270: sy = h - 1 - x; sx = y; break;
          default: break;
        }
        out.at(c, y, x) = img.at(c, sy, sx);
      }
  return out;
}

/// 1 - v evaluated as (255 - 255 v) / 255. Identical to 1 - v up to one
/// rounding, but an exact involution on every 8-bit level k/255 in both
/// float and double, which plain 1 - v is not.
template <class T>
T invert_intensity(T v) {
  constexpr T kMax = T(255);
  return (kMax - kMax * v) / kMax;
}

}  // namespace detail

template <class T>
Image<T> apply(AugKind kind, const Image<T>& img) {
  if (kind == AugKind::identity) return img;
  if (kind == AugKind::color_inversion) {
    Image<T> out = img;
    for (T& v : out.values()) v = detail::invert_intensity(v);
    return out;
  }
  return detail::permute(img, kind);
}

template <class T>
Image<T> invert(AugKind kind, const Image<T>& img) {
  return apply(inverse_kind(kind), img);
}

/// Adjoint of the linear part of invert(kind, .), used to push a gradient
/// with respect to F^-1(y) back onto y.
template <class T>
Image<T> invert_adjoint(AugKind kind, const Image<T>& grad) {
  if (kind == AugKind::color_inversion) {
    Image<T> out = grad;
    for (T& v : out.values()) v = -v;
    return out;
  }
  // the inverse of a permutation is its transpose
  return apply(kind, grad);
}

/// Uniform draw from a non-empty pool.
inline AugKind sample_aug(Rng& rng, const std::vector<AugKind>& pool) {
  if (pool.empty()) throw ConfigError("augmentation pool is empty");
  return pool[rng.uniform_index(pool.size())];
}

}  // namespace dukd
