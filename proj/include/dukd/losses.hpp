#pragma once

#include <cmath>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "dukd/augment.hpp"
#include "dukd/error.hpp"
#include "dukd/image.hpp"
#include "dukd/model.hpp"

namespace dukd {

struct LossWeights {
  double lambda_kd = 1.0;
  double lambda_dukd = 1.0;
  double lambda_lc = 1.0;

  void validate() const {
    for (double v : {lambda_kd, lambda_dukd, lambda_lc})
      if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and non-negative");
  }
};

/// Unweighted loss components of one step. `rec` already includes the
/// zoom-out reconstruction term when zoom-out is active.
struct LossComponents {
  double rec = 0.0;
  double kd = 0.0;
  double dukd = 0.0;
  double lc = 0.0;
};

struct LossReport {
  double rec = 0.0;
  double kd = 0.0;
  double dukd = 0.0;
  double lc = 0.0;
  double total = 0.0;

  friend bool operator==(const LossReport&, const LossReport&) = default;
};

inline nlohmann::json to_json(const LossReport& r) {
  return {{"rec", r.rec}, {"kd", r.kd}, {"dukd", r.dukd}, {"lc", r.lc}, {"total", r.total}};
}

inline LossReport total_loss(const LossComponents& c, const LossWeights& w) {
  w.validate();
  LossReport r{c.rec, c.kd, c.dukd, c.lc, 0.0};
  r.total = c.rec + w.lambda_kd * c.kd + w.lambda_dukd * c.dukd + w.lambda_lc * c.lc;
  return r;
}

/// Mean absolute difference over every element.
template <class T>
double l1(const Image<T>& a, const Image<T>& b) {
  if (!a.same_shape(b)) throw ShapeError("l1: shape mismatch " + a.shape() + " vs " + b.shape());
  const auto av = a.values(), bv = b.values();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += std::abs(static_cast<double>(av[i]) - static_cast<double>(bv[i]));
  return s / static_cast<double>(av.size());
}

/// Mean absolute difference over every element of every image in the batch.
template <class T>
double l1(const ImageBatch<T>& a, const ImageBatch<T>& b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("l1: batch sizes differ or are empty");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += l1(a[i], b[i]) * static_cast<double>(a[i].size());
    n += a[i].size();
  }
  return s / static_cast<double>(n);
}

/// grad += scale * sign(a - b), the subgradient of scale * sum|a - b|.
template <class T>
void add_l1_grad(const Image<T>& a, const Image<T>& b, double scale, Image<T>& grad) {
  if (!a.same_shape(b) || !a.same_shape(grad)) throw ShapeError("l1 gradient: shape mismatch");
  const auto av = a.values(), bv = b.values();
  auto gv = grad.values();
  const T s = static_cast<T>(scale);
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (av[i] > bv[i])
      gv[i] += s;
    else if (av[i] < bv[i])
      gv[i] -= s;
  }
}

/// Sum of the zoom-in term and, when both are given, the zoom-out term.
template <class T>
double dukd_loss(const ImageBatch<T>& student_zi, const ImageBatch<T>& teacher_zi,
                 const std::optional<ImageBatch<T>>& student_zo = std::nullopt,
                 const std::optional<ImageBatch<T>>& teacher_zo = std::nullopt) {
  if (student_zo.has_value() != teacher_zo.has_value())
    throw ConfigError("dukd_loss: zoom-out outputs must be given for both student and teacher or neither");
  double v = l1(student_zi, teacher_zi);
  if (student_zo) v += l1(*student_zo, *teacher_zo);
  return v;
}

/// The student's SR of the zoom-out input is supervised by the original LR.
template <class T>
double zoom_out_rec_loss(const ImageBatch<T>& student_zo, const ImageBatch<T>& lr_ref) {
  return l1(student_zo, lr_ref);
}

/// || F^-1(S(F(x))) - T(x) ||_1 with T(x) precomputed by the frozen teacher,
/// one augmentation per sample.
template <class T>
double consistency_loss(const SRNetwork<T>& student, const ImageBatch<T>& teacher_out, const ImageBatch<T>& input,
                        const std::vector<AugKind>& augs) {
  if (teacher_out.size() != input.size() || augs.size() != input.size())
    throw ShapeError("consistency_loss: batch sizes differ");
  ImageBatch<T> restored;
  restored.reserve(input.size());
  for (std::size_t i = 0; i < input.size(); ++i)
    restored.push_back(invert(augs[i], student.infer(apply(augs[i], input[i]))));
  return l1(restored, teacher_out);
}

template <class T>
double consistency_loss(const SRNetwork<T>& student, const ImageBatch<T>& teacher_out, const ImageBatch<T>& input,
                        AugKind aug) {
  return consistency_loss(student, teacher_out, input, std::vector<AugKind>(input.size(), aug));
}

}  // namespace dukd
