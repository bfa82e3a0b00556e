#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dukd/error.hpp"
#include "dukd/model.hpp"

namespace dukd {

/// Adam with step decay. Defaults are the full-scale recipe: lr 1e-4 divided
/// by 10 every 1e5 of 2.5e5 updates, batch 16, 48x48 LR patches.
struct OptimizerConfig {
  double lr0 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  double decay_factor = 10.0;
  std::int64_t decay_every = 100000;
  std::int64_t total_iters = 250000;
  int batch_size = 16;
  int lr_patch = 48;

  void validate() const {
    if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
      throw ConfigError("beta1 and beta2 must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(decay_factor >= 1.0)) throw ConfigError("decay_factor must be >= 1");
    if (total_iters < 1) throw ConfigError("total_iters must be positive");
    if (decay_every < 1 || decay_every > total_iters) throw ConfigError("decay_every must lie in [1, total_iters]");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (lr_patch < 1) throw ConfigError("lr_patch must be positive");
  }
};

/// lr0 / decay_factor^floor(iter / decay_every)
inline double lr_at(std::int64_t iter, const OptimizerConfig& cfg) {
  const auto drops = static_cast<double>(iter / cfg.decay_every);
  return cfg.lr0 / std::pow(cfg.decay_factor, drops);
}

/// First/second moment estimates, one buffer per parameter.
template <class T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t step = 0;

  static AdamState zeros_like(const std::vector<Param<T>>& params) {
    AdamState s;
    for (const auto& p : params) {
      s.m.emplace_back(p.value.size(), T(0));
      s.v.emplace_back(p.value.size(), T(0));
    }
    return s;
  }
};

/// One bias-corrected Adam update. A NaN or infinite gradient aborts the
/// step before anything is modified.
template <class T>
void adam_step(std::vector<Param<T>>& params, AdamState<T>& state, const Gradients<T>& grads, double lr,
               const OptimizerConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size())
    throw ShapeError("adam_step: gradients/state do not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].value.size()) throw ShapeError("adam_step: gradient size mismatch for " + params[i].name);
    for (T g : grads[i])
      if (!std::isfinite(g)) throw NonFiniteGradient("non-finite gradient in '" + params[i].name + "'");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.beta1, t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.beta2, t)));
  const T step = static_cast<T>(lr), eps = static_cast<T>(cfg.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].value;
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * g[k];
      v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
      const T m_hat = m[k] * c1;
      const T v_hat = v[k] * c2;
      w[k] -= step * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

}  // namespace dukd
