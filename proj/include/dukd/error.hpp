#pragma once

#include <stdexcept>
#include <string>

namespace dukd {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or image shapes disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A requested region does not fit the image (crop, shave, SSIM window).
class SizeError : public Error {
 public:
  using Error::Error;
};

class ChannelError : public Error {
 public:
  using Error::Error;
};

/// Down-resize of a dimension not divisible by the scale factor.
class DivisibilityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed or corrupted checkpoint/config file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Optimizer refused a step because a gradient was NaN or infinite.
class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

}  // namespace dukd
