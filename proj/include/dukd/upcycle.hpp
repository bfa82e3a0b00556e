#pragma once

#include <optional>
#include <string>

#include "dukd/error.hpp"
#include "dukd/image.hpp"
#include "dukd/resize.hpp"
#include "dukd/rng.hpp"

namespace dukd {

/// LR/HR pair with hr exactly `scale` times larger than lr on both axes.
template <class T>
struct TrainingPair {
  Image<T> lr;
  Image<T> hr;
  int scale = 2;

  void validate() const {
    if (scale < 1) throw ConfigError("scale must be positive");
    if (lr.channels() != 3 || hr.channels() != 3)
      throw ChannelError("training pairs must be 3-channel, got lr " + lr.shape() + " hr " + hr.shape());
    if (hr.height() != scale * lr.height() || hr.width() != scale * lr.width())
      throw ShapeError("hr " + hr.shape() + " is not x" + std::to_string(scale) + " of lr " + lr.shape());
  }
};

/// Teacher-only inputs derived from one pair. zoom_in is an HR crop at LR
/// size; zoom_out is the LR image degraded once more.
template <class T>
struct UpcycledBatch {
  Image<T> zoom_in;
  std::optional<Image<T>> zoom_out;
  Image<T> lr_ref;
  CropOffset zoom_in_offset;
};

template <class T>
CropResult<T> zoom_in_with_offset(const TrainingPair<T>& pair, Rng& rng) {
  pair.validate();
  return random_crop(pair.hr, pair.lr.height(), pair.lr.width(), rng);
}

template <class T>
Image<T> zoom_in(const TrainingPair<T>& pair, Rng& rng) {
  return zoom_in_with_offset(pair, rng).image;
}

/// Same bicubic degradation that produced lr from hr, applied to lr.
template <class T>
Image<T> zoom_out(const TrainingPair<T>& pair) {
  pair.validate();
  return bicubic_resize(pair.lr, ResampleSpec::down(pair.scale));
}

template <class T>
UpcycledBatch<T> build_upcycled_batch(const TrainingPair<T>& pair, bool enable_zoom_out, Rng& rng) {
  auto zi = zoom_in_with_offset(pair, rng);
  UpcycledBatch<T> batch{std::move(zi.image), std::nullopt, pair.lr, zi.offset};
  if (enable_zoom_out) batch.zoom_out = zoom_out(pair);
  return batch;
}

}  // namespace dukd
