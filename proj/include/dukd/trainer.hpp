#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dukd/augment.hpp"
#include "dukd/checkpoint.hpp"
#include "dukd/error.hpp"
#include "dukd/losses.hpp"
#include "dukd/model.hpp"
#include "dukd/optim.hpp"
#include "dukd/rng.hpp"
#include "dukd/upcycle.hpp"

namespace dukd {

/// Which distillation terms are active. All off is plain training from scratch.
struct DistillFlags {
  bool kd = false;
  bool zoom_in = false;
  bool zoom_out = false;
  bool consistency = false;

  bool needs_teacher() const { return kd || zoom_in || zoom_out || consistency; }
  bool needs_upcycling() const { return zoom_in || zoom_out || consistency; }

  static DistillFlags scratch() { return {}; }
  static DistillFlags vanilla_kd() { return {true, false, false, false}; }
  static DistillFlags full() { return {true, true, true, true}; }
};

struct DistillSettings {
  LossWeights weights;
  DistillFlags flags;
  std::vector<AugKind> aug_pool{kNonIdentityAugKinds.begin(), kNonIdentityAugKinds.end()};
};

/// Everything one step consumes besides the networks. Fixing it makes a step
/// a pure function of the parameters (used by gradient checks).
template <class T>
struct StepInputs {
  std::vector<TrainingPair<T>> pairs;
  std::vector<UpcycledBatch<T>> upcycled;  // empty unless upcycling is on
  std::vector<AugKind> augs;               // one per pair when consistency is on
};

/// Patch sampling with replacement plus the standard joint flip/rotation
/// augmentation of LR and HR.
template <class T>
std::vector<TrainingPair<T>> sample_batch(std::span<const TrainingPair<T>> data, int batch_size, int lr_patch,
                                          Rng& rng) {
  if (data.empty()) throw DataError("cannot sample a batch from an empty dataset");
  std::vector<TrainingPair<T>> batch;
  batch.reserve(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    const auto& src = data[rng.uniform_index(data.size())];
    if (src.lr.height() < lr_patch || src.lr.width() < lr_patch)
      throw SizeError("LR image " + src.lr.shape() + " smaller than patch " + std::to_string(lr_patch));
    const int s = src.scale;
    const int top = rng.uniform_int(0, src.lr.height() - lr_patch);
    const int left = rng.uniform_int(0, src.lr.width() - lr_patch);
    TrainingPair<T> p{crop(src.lr, top, left, lr_patch, lr_patch),
                      crop(src.hr, s * top, s * left, s * lr_patch, s * lr_patch), s};
    for (AugKind k : {AugKind::hflip, AugKind::vflip, AugKind::rot90})
      if (rng.coin()) {
        p.lr = apply(k, p.lr);
        p.hr = apply(k, p.hr);
      }
    batch.push_back(std::move(p));
  }
  return batch;
}

template <class T>
StepInputs<T> make_step_inputs(std::vector<TrainingPair<T>> pairs, const DistillSettings& settings, Rng& upcycle_rng,
                               Rng& aug_rng) {
  StepInputs<T> in;
  in.pairs = std::move(pairs);
  if (settings.flags.needs_upcycling())
    for (const auto& p : in.pairs) in.upcycled.push_back(build_upcycled_batch(p, settings.flags.zoom_out, upcycle_rng));
  if (settings.flags.consistency)
    for (std::size_t i = 0; i < in.pairs.size(); ++i) in.augs.push_back(sample_aug(aug_rng, settings.aug_pool));
  return in;
}

namespace detail {

template <class T>
double abs_sum(const Image<T>& a, const Image<T>& b) {
  return l1(a, b) * static_cast<double>(a.size());
}

}  // namespace detail

/// Loss of one step; when `grads` is given, accumulates d(total)/d(student).
///   rec  = |S(lr) - hr| (+ |S(zo) - lr| with zoom-out)
///   kd   = |S(lr) - T(lr)|
///   dukd = |S(zi) - T(zi)| + |S(zo) - T(zo)|
///   lc   = |F^-1(S(F(x))) - T(x)|, x = zoom-in input (LR patch without zoom-in)
/// Every term is a mean over the batch. The teacher is only ever read.
template <class T>
LossReport evaluate_step(const SRModel<T>& student, const SRNetwork<T>* teacher, const StepInputs<T>& in,
                         const DistillSettings& settings, Gradients<T>* grads) {
  const auto& f = settings.flags;
  const auto& w = settings.weights;
  w.validate();
  if (in.pairs.empty()) throw DataError("empty batch");
  if (f.needs_teacher() && teacher == nullptr) throw ConfigError("distillation terms enabled without a teacher");
  if (f.needs_upcycling() && in.upcycled.size() != in.pairs.size())
    throw ConfigError("step inputs lack upcycled data");
  if (f.consistency && in.augs.size() != in.pairs.size()) throw ConfigError("step inputs lack augmentations");

  const double batch = static_cast<double>(in.pairs.size());
  LossComponents c;
  ForwardCache<T> cache;

  auto forward = [&](const Image<T>& x) { return grads ? student.forward(x, cache) : student.forward(x); };
  auto backward = [&](const Image<T>& g) {
    if (grads) student.backward(cache, g, *grads);
  };

  for (std::size_t i = 0; i < in.pairs.size(); ++i) {
    const auto& p = in.pairs[i];
    p.validate();
    // original LR input: reconstruction and vanilla KD
    {
      const Image<T> out = forward(p.lr);
      const double n = batch * static_cast<double>(out.size());
      Image<T> g(out.channels(), out.height(), out.width());
      c.rec += detail::abs_sum(out, p.hr) / n;
      if (grads) add_l1_grad(out, p.hr, 1.0 / n, g);
      if (f.kd) {
        const Image<T> t = teacher->infer(p.lr);
        c.kd += detail::abs_sum(out, t) / n;
        if (grads) add_l1_grad(out, t, w.lambda_kd / n, g);
      }
      backward(g);
    }
    if (!f.needs_upcycling()) continue;
    const auto& up = in.upcycled[i];

    std::optional<Image<T>> teacher_zi;
    if (f.zoom_in) teacher_zi = teacher->infer(up.zoom_in);
    if (f.zoom_in) {
      const Image<T> out = forward(up.zoom_in);
      const double n = batch * static_cast<double>(out.size());
      c.dukd += detail::abs_sum(out, *teacher_zi) / n;
      if (grads) {
        Image<T> g(out.channels(), out.height(), out.width());
        add_l1_grad(out, *teacher_zi, w.lambda_dukd / n, g);
        backward(g);
      }
    }
    if (f.zoom_out) {
      if (!up.zoom_out) throw ConfigError("zoom-out enabled but the upcycled batch has none");
      const Image<T> out = forward(*up.zoom_out);
      const Image<T> t = teacher->infer(*up.zoom_out);
      const double n = batch * static_cast<double>(out.size());
      c.dukd += detail::abs_sum(out, t) / n;
      c.rec += detail::abs_sum(out, up.lr_ref) / n;
      if (grads) {
        Image<T> g(out.channels(), out.height(), out.width());
        add_l1_grad(out, up.lr_ref, 1.0 / n, g);
        add_l1_grad(out, t, w.lambda_dukd / n, g);
        backward(g);
      }
    }
    if (f.consistency) {
      const Image<T>& x = f.zoom_in ? up.zoom_in : p.lr;
      const Image<T> t = teacher_zi ? *teacher_zi : teacher->infer(x);
      const AugKind aug = in.augs[i];
      const Image<T> out = forward(apply(aug, x));
      const Image<T> restored = invert(aug, out);
      const double n = batch * static_cast<double>(restored.size());
      c.lc += detail::abs_sum(restored, t) / n;
      if (grads) {
        Image<T> g(restored.channels(), restored.height(), restored.width());
        add_l1_grad(restored, t, w.lambda_lc / n, g);
        backward(invert_adjoint(aug, g));
      }
    }
  }
  return total_loss(c, w);
}

/// Student parameters, optimizer moments and random streams: everything a
/// resumed run needs to continue bit-identically.
template <class T>
struct TrainState {
  std::int64_t iteration = 0;
  SRModel<T> student;
  AdamState<T> adam;
  Rng data_rng;
  Rng upcycle_rng;
  Rng aug_rng;
  double current_lr = 0.0;

  /// Streams derived from one master seed; the student init stream is separate
  /// so changing the model does not shift data sampling.
  static TrainState fresh(const SRModelConfig& student_config, std::uint64_t seed) {
    Rng master(seed);
    Rng init = master.split();
    TrainState s;
    s.student = SRModel<T>(student_config, init);
    s.adam = AdamState<T>::zeros_like(s.student.params());
    s.data_rng = master.split();
    s.upcycle_rng = master.split();
    s.aug_rng = master.split();
    return s;
  }
};

/// One update: losses on the batch, backward, Adam at lr_at(iteration).
template <class T>
LossReport train_step(TrainState<T>& state, std::vector<TrainingPair<T>> batch, const SRNetwork<T>* teacher,
                      const DistillSettings& settings, const OptimizerConfig& cfg) {
  const StepInputs<T> in = make_step_inputs(std::move(batch), settings, state.upcycle_rng, state.aug_rng);
  Gradients<T> grads = state.student.zero_gradients();
  const LossReport report = evaluate_step(state.student, teacher, in, settings, &grads);
  state.current_lr = lr_at(state.iteration, cfg);
  adam_step(state.student.params(), state.adam, grads, state.current_lr, cfg);
  ++state.iteration;
  return report;
}

template <class T>
void save_train_state(const TrainState<T>& s, const std::string& path) {
  std::vector<Param<T>> tensors = s.student.params();
  const auto& params = s.student.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    tensors.push_back({"adam.m/" + params[i].name, params[i].shape, s.adam.m[i]});
    tensors.push_back({"adam.v/" + params[i].name, params[i].shape, s.adam.v[i]});
  }
  const nlohmann::json meta{{"kind", "train_state"},
                            {"iteration", s.iteration},
                            {"adam_step", s.adam.step},
                            {"lr", s.current_lr},
                            {"rng", {{"data", s.data_rng.state()},
                                     {"upcycle", s.upcycle_rng.state()},
                                     {"aug", s.aug_rng.state()}}}};
  write_checkpoint(path, s.student.config(), tensors, meta);
}

template <class T>
TrainState<T> load_train_state(const std::string& path) {
  const CheckpointFile f = read_checkpoint(path);
  if (f.meta.value("kind", "") != "train_state") throw FormatError("'" + path + "' holds no training state");
  TrainState<T> s;
  Rng unused(0);
  s.student = SRModel<T>(f.config, unused);
  const auto report = load_into(s.student, f, unused);
  if (!report.reinitialized.empty()) throw FormatError("training state lacks upsampler tensors");
  s.adam = AdamState<T>::zeros_like(s.student.params());
  const auto& params = s.student.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (auto [prefix, dst] : {std::pair{"adam.m/", &s.adam.m[i]}, std::pair{"adam.v/", &s.adam.v[i]}}) {
      const auto it = f.tensors.find(prefix + params[i].name);
      if (it == f.tensors.end() || it->second.data.size() != dst->size())
        throw FormatError("training state lacks optimizer tensor for '" + params[i].name + "'");
      for (std::size_t k = 0; k < dst->size(); ++k) (*dst)[k] = static_cast<T>(it->second.data[k]);
    }
  }
  try {
    s.iteration = f.meta.at("iteration").get<std::int64_t>();
    s.adam.step = f.meta.at("adam_step").get<std::int64_t>();
    s.current_lr = f.meta.value("lr", 0.0);
    s.data_rng.set_state(f.meta.at("rng").at("data").get<std::string>());
    s.upcycle_rng.set_state(f.meta.at("rng").at("upcycle").get<std::string>());
    s.aug_rng.set_state(f.meta.at("rng").at("aug").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("training state metadata: ") + e.what());
  }
  return s;
}

/// In-memory training driver: owns the state, samples batches, steps.
template <class T>
class Trainer {
 public:
  Trainer(std::span<const TrainingPair<T>> data, const SRNetwork<T>* teacher, DistillSettings settings,
          OptimizerConfig cfg, TrainState<T> state)
      : data_(data), teacher_(teacher), settings_(std::move(settings)), cfg_(cfg), state_(std::move(state)) {
    cfg_.validate();
    settings_.weights.validate();
    if (settings_.flags.needs_teacher() && teacher_ == nullptr)
      throw ConfigError("distillation flags require a teacher model");
    if (teacher_ && teacher_->scale() != state_.student.scale())
      throw ConfigError("teacher and student scales differ");
    if (settings_.flags.consistency && settings_.aug_pool.empty()) throw ConfigError("augmentation pool is empty");
  }

  LossReport step() {
    auto batch = sample_batch(data_, cfg_.batch_size, cfg_.lr_patch, state_.data_rng);
    return train_step(state_, std::move(batch), teacher_, settings_, cfg_);
  }

  bool done() const { return state_.iteration >= cfg_.total_iters; }

  TrainState<T>& state() { return state_; }
  const TrainState<T>& state() const { return state_; }
  const OptimizerConfig& optimizer() const { return cfg_; }

 private:
  std::span<const TrainingPair<T>> data_;
  const SRNetwork<T>* teacher_;
  DistillSettings settings_;
  OptimizerConfig cfg_;
  TrainState<T> state_;
};

}  // namespace dukd
