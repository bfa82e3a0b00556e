#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "dukd/error.hpp"
#include "dukd/image.hpp"
#include "dukd/rng.hpp"

namespace dukd {

/// EDSR-style network shape: head conv, `blocks` residual blocks, body tail
/// conv with a global skip, pixel-shuffle upsampler, output conv.
struct SRModelConfig {
  int channels = 64;
  int blocks = 16;
  int scale = 2;
  double residual_scaling = 1.0;

  void validate() const {
    if (channels < 1) throw ConfigError("channels must be >= 1");
    if (blocks < 1) throw ConfigError("blocks must be >= 1");
    if (scale < 2 || scale > 4) throw ConfigError("scale must be 2, 3 or 4, got " + std::to_string(scale));
    if (!std::isfinite(residual_scaling)) throw ConfigError("residual_scaling must be finite");
  }

  friend bool operator==(const SRModelConfig&, const SRModelConfig&) = default;
};

/// Registered configurations. EDSR sizes follow the x4 teacher/student table;
/// the toy ones are for desk-scale runs.
inline SRModelConfig model_preset(const std::string& name, int scale) {
  SRModelConfig c;
  c.scale = scale;
  if (name == "edsr-teacher") {
    c.channels = 256, c.blocks = 32, c.residual_scaling = 0.1;
  } else if (name == "edsr-student") {
    c.channels = 64, c.blocks = 32, c.residual_scaling = 1.0;
  } else if (name == "edsr-baseline") {
    c.channels = 64, c.blocks = 16, c.residual_scaling = 1.0;
  } else if (name == "toy-teacher") {
    c.channels = 32, c.blocks = 8, c.residual_scaling = 1.0;
  } else if (name == "toy-student") {
    c.channels = 8, c.blocks = 2, c.residual_scaling = 1.0;
  } else {
    throw ConfigError("unknown model preset '" + name + "'");
  }
  c.validate();
  return c;
}

/// Pixel-shuffle factors of the upsampler: x2 and x3 in one stage, x4 as two x2 stages.
inline std::vector<int> upsampler_stages(int scale) {
  if (scale == 4) return {2, 2};
  return {scale};
}

/// Closed-form trainable parameter count.
///   3x3 conv in->out: 9*in*out + out
///   head 3->C, 2*blocks convs C->C, body tail C->C, per stage C->C*r^2, output C->3
inline std::int64_t parameter_count(const SRModelConfig& c) {
  auto conv = [](std::int64_t in, std::int64_t out) { return 9 * in * out + out; };
  const std::int64_t ch = c.channels;
  std::int64_t n = conv(3, ch) + 2 * c.blocks * conv(ch, ch) + conv(ch, ch) + conv(ch, 3);
  for (int r : upsampler_stages(c.scale)) n += conv(ch, ch * r * r);
  return n;
}

template <class T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
};

/// One gradient buffer per parameter, same order as SRModel::params().
template <class T>
using Gradients = std::vector<std::vector<T>>;

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

/// Inference-only view of a super-resolution network. Distillation needs
/// nothing more from a teacher, so any architecture can sit behind it.
template <class T>
class SRNetwork {
 public:
  virtual ~SRNetwork() = default;
  virtual Image<T> infer(const Image<T>& input) const = 0;
  virtual int scale() const = 0;
  virtual std::uint64_t parameter_hash() const = 0;
};

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

/// 3x3, stride 1, zero padding 1. Rows of `col` are (channel, ky, kx).
template <class T>
void im2col3x3(const Image<T>& in, std::vector<T>& col) {
  const int c_in = in.channels(), h = in.height(), w = in.width();
  const std::size_t hw = in.plane_size();
  col.assign(static_cast<std::size_t>(c_in) * 9 * hw, T(0));
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        T* row = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const T* src = &in.at(c, sy, 0);
          T* dst = row + static_cast<std::size_t>(y) * w;
          for (int x = x0; x < x1; ++x) dst[x] = src[x + kx - 1];
        }
      }
}

template <class T>
void col2im3x3(const std::vector<T>& col, Image<T>& out) {
  const int c_in = out.channels(), h = out.height(), w = out.width();
  const std::size_t hw = out.plane_size();
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const T* row = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          T* dst = &out.at(c, sy, 0);
          const T* src = row + static_cast<std::size_t>(y) * w;
          for (int x = x0; x < x1; ++x) dst[x + kx - 1] += src[x];
        }
      }
}

/// PyTorch semantics: channel c*r*r + i*r + j lands at (y*r + i, x*r + j) of channel c.
template <class T>
Image<T> pixel_shuffle(const Image<T>& in, int r) {
  const int c_out = in.channels() / (r * r);
  Image<T> out(c_out, in.height() * r, in.width() * r);
  for (int c = 0; c < c_out; ++c)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        const int src_c = c * r * r + i * r + j;
        for (int y = 0; y < in.height(); ++y)
          for (int x = 0; x < in.width(); ++x) out.at(c, y * r + i, x * r + j) = in.at(src_c, y, x);
      }
  return out;
}

template <class T>
Image<T> pixel_unshuffle(const Image<T>& in, int r) {
  Image<T> out(in.channels() * r * r, in.height() / r, in.width() / r);
  for (int c = 0; c < in.channels(); ++c)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        const int dst_c = c * r * r + i * r + j;
        for (int y = 0; y < out.height(); ++y)
          for (int x = 0; x < out.width(); ++x) out.at(dst_c, y, x) = in.at(c, y * r + i, x * r + j);
      }
  return out;
}

}  // namespace detail

/// Activations kept by a training forward pass for the backward pass.
template <class T>
struct ForwardCache {
  Image<T> input;
  Image<T> head_out;
  std::vector<Image<T>> block_in;
  std::vector<Image<T>> block_mid;  // post-ReLU
  Image<T> body_out;
  std::vector<Image<T>> up_in;
  Image<T> output_in;
};

template <class T>
class SRModel final : public SRNetwork<T> {
 public:
  SRModel() = default;

  /// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in = 9 * in_channels,
  /// drawn in parameter order from `init_rng`.
  SRModel(const SRModelConfig& config, Rng& init_rng) : config_(config) {
    config_.validate();
    const int ch = config_.channels;
    head_ = add_conv("head", 3, ch);
    for (int b = 0; b < config_.blocks; ++b) {
      const std::string p = "body." + std::to_string(b);
      blocks_.push_back({add_conv(p + ".conv1", ch, ch), add_conv(p + ".conv2", ch, ch)});
    }
    body_tail_ = add_conv("body_tail", ch, ch);
    const auto stages = upsampler_stages(config_.scale);
    for (std::size_t s = 0; s < stages.size(); ++s)
      up_.push_back(add_conv("upsampler." + std::to_string(s), ch, ch * stages[s] * stages[s]));
    output_ = add_conv("output", ch, 3);
    for (const Conv& c : all_convs()) init_conv(c, init_rng);
  }

  const SRModelConfig& config() const { return config_; }
  int scale() const override { return config_.scale; }

  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }

  std::int64_t num_parameters() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += static_cast<std::int64_t>(p.value.size());
    return n;
  }

  Param<T>* find(const std::string& name) {
    for (auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }

  Gradients<T> zero_gradients() const {
    Gradients<T> g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.emplace_back(p.value.size(), T(0));
    return g;
  }

  std::uint64_t parameter_hash() const override {
    std::uint64_t h = fnv1a(nullptr, 0);
    for (const auto& p : params_) {
      h = fnv1a(p.name.data(), p.name.size(), h);
      h = fnv1a(p.value.data(), p.value.size() * sizeof(T), h);
    }
    return h;
  }

  /// Fresh weights for every upsampler tensor (cross-scale initialization).
  void reinit_upsampler(Rng& rng) {
    for (const Conv& c : up_) init_conv(c, rng);
  }

  Image<T> infer(const Image<T>& input) const override { return run(input, nullptr); }
  Image<T> forward(const Image<T>& input) const { return run(input, nullptr); }
  Image<T> forward(const Image<T>& input, ForwardCache<T>& cache) const { return run(input, &cache); }

  /// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(output).
  void backward(const ForwardCache<T>& cache, const Image<T>& grad_out, Gradients<T>& grads) const {
    if (grads.size() != params_.size()) throw ShapeError("gradient buffer does not match model");
    Image<T> g = conv_backward(output_, cache.output_in, grad_out, grads, true);
    const auto stages = upsampler_stages(config_.scale);
    for (std::size_t s = stages.size(); s-- > 0;) {
      g = detail::pixel_unshuffle(g, stages[s]);
      g = conv_backward(up_[s], cache.up_in[s], g, grads, true);
    }
    Image<T> g_head = g;  // global skip
    Image<T> g_x = conv_backward(body_tail_, cache.body_out, g, grads, true);
    const T rs = static_cast<T>(config_.residual_scaling);
    for (std::size_t b = blocks_.size(); b-- > 0;) {
      Image<T> g_branch = g_x;
      for (T& v : g_branch.values()) v *= rs;
      Image<T> g_mid = conv_backward(blocks_[b].conv2, cache.block_mid[b], g_branch, grads, true);
      auto mid = cache.block_mid[b].values();
      auto gm = g_mid.values();
      for (std::size_t i = 0; i < gm.size(); ++i)
        if (!(mid[i] > T(0))) gm[i] = T(0);
      Image<T> g_in = conv_backward(blocks_[b].conv1, cache.block_in[b], g_mid, grads, true);
      add_into(g_x, g_in);
    }
    add_into(g_head, g_x);
    conv_backward(head_, cache.input, g_head, grads, false);
  }

 private:
  struct Conv {
    std::size_t weight = 0;
    std::size_t bias = 0;
    int in = 0;
    int out = 0;
  };
  struct Block {
    Conv conv1;
    Conv conv2;
  };

  Conv add_conv(const std::string& name, int in, int out) {
    Conv c{params_.size(), params_.size() + 1, in, out};
    params_.push_back({name + ".weight", {out, in, 3, 3}, std::vector<T>(static_cast<std::size_t>(out) * in * 9)});
    params_.push_back({name + ".bias", {out}, std::vector<T>(out)});
    return c;
  }

  std::vector<Conv> all_convs() const {
    std::vector<Conv> v{head_};
    for (const Block& b : blocks_) v.insert(v.end(), {b.conv1, b.conv2});
    v.push_back(body_tail_);
    v.insert(v.end(), up_.begin(), up_.end());
    v.push_back(output_);
    return v;
  }

  void init_conv(const Conv& c, Rng& rng) {
    const double bound = 1.0 / std::sqrt(9.0 * c.in);
    for (T& v : params_[c.weight].value) v = static_cast<T>((2.0 * rng.uniform01() - 1.0) * bound);
    for (T& v : params_[c.bias].value) v = static_cast<T>((2.0 * rng.uniform01() - 1.0) * bound);
  }

  Image<T> conv_forward(const Conv& c, const Image<T>& in) const {
    if (in.channels() != c.in)
      throw ShapeError("conv expects " + std::to_string(c.in) + " channels, got " + std::to_string(in.channels()));
    thread_local std::vector<T> col;
    detail::im2col3x3(in, col);
    const auto hw = static_cast<Eigen::Index>(in.plane_size());
    Image<T> out(c.out, in.height(), in.width());
    detail::ConstMapMat<T> w(params_[c.weight].value.data(), c.out, c.in * 9);
    detail::ConstMapMat<T> x(col.data(), c.in * 9, hw);
    detail::MapMat<T> y(out.data(), c.out, hw);
    y.noalias() = w * x;
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(params_[c.bias].value.data(), c.out);
    y.colwise() += b;
    return out;
  }

  Image<T> conv_backward(const Conv& c, const Image<T>& in, const Image<T>& grad_out, Gradients<T>& grads,
                         bool need_input_grad) const {
    thread_local std::vector<T> col;
    detail::im2col3x3(in, col);
    const auto hw = static_cast<Eigen::Index>(in.plane_size());
    detail::ConstMapMat<T> x(col.data(), c.in * 9, hw);
    detail::ConstMapMat<T> g(grad_out.data(), c.out, hw);
    detail::MapMat<T> dw(grads[c.weight].data(), c.out, c.in * 9);
    dw.noalias() += g * x.transpose();
    for (int o = 0; o < c.out; ++o) {
      const T* row = grad_out.data() + static_cast<std::size_t>(o) * hw;
      T acc = T(0);
      for (Eigen::Index i = 0; i < hw; ++i) acc += row[i];
      grads[c.bias][o] += acc;
    }
    if (!need_input_grad) return {};
    std::vector<T> dcol(static_cast<std::size_t>(c.in) * 9 * hw);
    detail::ConstMapMat<T> w(params_[c.weight].value.data(), c.out, c.in * 9);
    detail::MapMat<T>(dcol.data(), c.in * 9, hw).noalias() = w.transpose() * g;
    Image<T> din(c.in, in.height(), in.width());
    detail::col2im3x3(dcol, din);
    return din;
  }

  static void add_into(Image<T>& a, const Image<T>& b) {
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) av[i] += bv[i];
  }

  Image<T> run(const Image<T>& input, ForwardCache<T>* cache) const {
    if (input.channels() != 3)
      throw ShapeError("model input must have 3 channels, got " + std::to_string(input.channels()));
    if (cache) {
      cache->input = input;
      cache->block_in.clear();
      cache->block_mid.clear();
      cache->up_in.clear();
    }
    Image<T> head = conv_forward(head_, input);
    Image<T> x = head;
    const T rs = static_cast<T>(config_.residual_scaling);
    for (const Block& b : blocks_) {
      Image<T> mid = conv_forward(b.conv1, x);
      for (T& v : mid.values()) v = v > T(0) ? v : T(0);
      Image<T> branch = conv_forward(b.conv2, mid);
      if (cache) {
        cache->block_in.push_back(x);
        cache->block_mid.push_back(std::move(mid));
      }
      auto xv = x.values();
      auto bv = branch.values();
      for (std::size_t i = 0; i < xv.size(); ++i) xv[i] += rs * bv[i];
    }
    Image<T> feat = conv_forward(body_tail_, x);
    add_into(feat, head);
    if (cache) {
      cache->head_out = std::move(head);
      cache->body_out = std::move(x);
    }
    const auto stages = upsampler_stages(config_.scale);
    for (std::size_t s = 0; s < stages.size(); ++s) {
      Image<T> y = conv_forward(up_[s], feat);
      if (cache) cache->up_in.push_back(std::move(feat));
      feat = detail::pixel_shuffle(y, stages[s]);
    }
    Image<T> out = conv_forward(output_, feat);
    if (cache) cache->output_in = std::move(feat);
    return out;
  }

  SRModelConfig config_;
  std::vector<Param<T>> params_;
  Conv head_;
  std::vector<Block> blocks_;
  Conv body_tail_;
  std::vector<Conv> up_;
  Conv output_;
};

}  // namespace dukd
