#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dukd/error.hpp"
#include "dukd/rng.hpp"

namespace dukd {

/// Planar pixel grid (channel-major, then row, then column). Images built
/// from 8-bit data or clamped hold values in [0,1]; network outputs use the
/// same type unclamped.
template <class T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int channels, int height, int width, T fill = T(0))
      : channels_(channels), height_(height), width_(width) {
    if (channels < 1 || height < 1 || width < 1)
      throw ShapeError("image dimensions must be positive, got " + shape_string(channels, height, width));
    data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }
  Image(int channels, int height, int width, std::vector<T> data)
      : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (channels < 1 || height < 1 || width < 1)
      throw ShapeError("image dimensions must be positive, got " + shape_string(channels, height, width));
    if (data_.size() != static_cast<std::size_t>(channels) * height * width)
      throw ShapeError("image data size does not match " + shape_string(channels, height, width));
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const { return data_.empty(); }

  T& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  const T& at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::span<T> plane(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const T> plane(int c) const { return {data_.data() + c * plane_size(), plane_size()}; }

  bool same_shape(const Image& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }
  std::string shape() const { return shape_string(channels_, height_, width_); }

  template <class U>
  Image<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Image<U>(channels_, height_, width_, std::move(out));
  }

  friend bool operator==(const Image& a, const Image& b) { return a.same_shape(b) && a.data_ == b.data_; }

  static std::string shape_string(int c, int h, int w) {
    return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

template <class T>
using ImageBatch = std::vector<Image<T>>;

/// Interleaved 8-bit pixels (row-major HWC), the on-disk representation.
struct ImageU8 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
};

template <class T>
Image<T> from_u8(const ImageU8& src) {
  Image<T> img(src.channels, src.height, src.width);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      for (int c = 0; c < src.channels; ++c)
        img.at(c, y, x) = static_cast<T>(src.pixels[(static_cast<std::size_t>(y) * src.width + x) * src.channels + c]) /
                          static_cast<T>(255);
  return img;
}

/// Clamp to [0,1] and round to the nearest 8-bit level.
template <class T>
ImageU8 to_u8(const Image<T>& img) {
  ImageU8 out{img.channels(), img.height(), img.width(), {}};
  out.pixels.resize(img.size());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) {
        const double v = std::clamp(static_cast<double>(img.at(c, y, x)), 0.0, 1.0);
        out.pixels[(static_cast<std::size_t>(y) * img.width() + x) * img.channels() + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  return out;
}

template <class T>
Image<T> clamp01(Image<T> img) {
  for (T& v : img.values()) v = std::clamp(v, T(0), T(1));
  return img;
}

/// Clamp, then snap every value to the 8-bit lattice k/255.
template <class T>
Image<T> quantize_u8(const Image<T>& img) {
  return from_u8<T>(to_u8(img));
}

/// BT.601 luma in the studio range used by SR benchmarks:
/// Y = (65.738 R + 129.057 G + 25.064 B) / 256 + 16/256.
template <class T>
Image<T> to_y_channel(const Image<T>& img) {
  if (img.channels() != 3)
    throw ChannelError("to_y_channel expects 3 channels, got " + std::to_string(img.channels()));
  Image<T> y(1, img.height(), img.width());
  const auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  auto out = y.plane(0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = (65.738 * r[i] + 129.057 * g[i] + 25.064 * b[i]) / 256.0 + 16.0 / 256.0;
    out[i] = static_cast<T>(v);
  }
  return y;
}

template <class T>
Image<T> crop(const Image<T>& img, int top, int left, int h, int w) {
  if (h < 1 || w < 1 || top < 0 || left < 0 || top + h > img.height() || left + w > img.width())
    throw SizeError("crop " + std::to_string(h) + "x" + std::to_string(w) + " at (" + std::to_string(top) + "," +
                    std::to_string(left) + ") does not fit image " + img.shape());
  Image<T> out(img.channels(), h, w);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < h; ++y) {
      const T* src = &img.at(c, top + y, left);
      std::copy(src, src + w, &out.at(c, y, 0));
    }
  return out;
}

struct CropOffset {
  int top = 0;
  int left = 0;
  friend bool operator==(const CropOffset&, const CropOffset&) = default;
};

template <class T>
struct CropResult {
  Image<T> image;
  CropOffset offset;
};

/// h x w crop at an offset drawn uniformly over all valid positions.
template <class T>
CropResult<T> random_crop(const Image<T>& img, int h, int w, Rng& rng) {
  if (h < 1 || w < 1 || h > img.height() || w > img.width())
    throw SizeError("random_crop " + std::to_string(h) + "x" + std::to_string(w) + " larger than image " +
                    img.shape());
  CropOffset off;
  off.top = rng.uniform_int(0, img.height() - h);
  off.left = rng.uniform_int(0, img.width() - w);
  return {crop(img, off.top, off.left, h, w), off};
}

template <class T>
Image<T> shave_border(const Image<T>& img, int pixels) {
  if (pixels < 0 || 2 * pixels >= std::min(img.height(), img.width()))
    throw SizeError("cannot shave " + std::to_string(pixels) + " pixels from image " + img.shape());
  if (pixels == 0) return img;
  return crop(img, pixels, pixels, img.height() - 2 * pixels, img.width() - 2 * pixels);
}

/// Centered crop whose sides are multiples of `scale`.
template <class T>
Image<T> center_crop_divisible(const Image<T>& img, int scale) {
  const int h = img.height() - img.height() % scale;
  const int w = img.width() - img.width() % scale;
  if (h < 1 || w < 1) throw SizeError("image " + img.shape() + " smaller than scale " + std::to_string(scale));
  if (h == img.height() && w == img.width()) return img;
  return crop(img, (img.height() - h) / 2, (img.width() - w) / 2, h, w);
}

}  // namespace dukd
