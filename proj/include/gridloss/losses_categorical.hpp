#ifndef GRIDLOSS_LOSSES_CATEGORICAL_HPP
#define GRIDLOSS_LOSSES_CATEGORICAL_HPP

// Count-based categorical scores: CSI, IOU, Dice and Tversky.
//
// The truth must be binary. Only the prediction goes through the
// discretization mode. Every score is positively oriented; with
// `use_as_loss` the functions return 1 - score instead.

#include <cstddef>
#include <string>

#include "gridloss/autodiff.hpp"
#include "gridloss/discretize.hpp"
#include "gridloss/error.hpp"
#include "gridloss/grid_tensor.hpp"
#include "gridloss/losses_regression.hpp"

namespace gridloss {

/// Guards denominators that can vanish.
inline constexpr double kEpsilon = 1e-7;

enum class UnionForm {
  /// Sum of truth and prediction over every channel of the sample, minus the
  /// class-restricted intersection (what the original Keras code computes).
  full_tensor,
  /// Truth and prediction restricted to the selected class.
  strict,
};

enum class DiceDenominator {
  /// rows * cols * channels per sample.
  all_channels,
  /// rows * cols per sample.
  per_grid_point,
};

struct CategoricalConfig {
  bool use_as_loss = false;
  DiscretizationMode discretization = NoDiscretization{};
  /// Tversky false-positive weight.
  double alpha = 1.0;
  /// Tversky false-negative weight.
  double beta = 1.0;
  UnionForm union_form = UnionForm::full_tensor;
  DiceDenominator dice_denominator = DiceDenominator::all_channels;
};

struct ClassSelector {
  std::size_t which_class = 0;
  std::size_t num_classes = 1;
};

namespace detail {

inline void check_config(const CategoricalConfig& cfg, const char* op) {
  validate(cfg.discretization);
  if (cfg.use_as_loss && is_hard(cfg.discretization)) {
    fail(ErrorCode::hard_mode_as_loss,
         std::string(op) + ": hard discretization cannot be used in a loss");
  }
  if (!(cfg.alpha >= 0.0) || !(cfg.beta >= 0.0)) {
    fail(ErrorCode::invalid_config, std::string(op) + ": alpha and beta must be >= 0");
  }
}

template <GridExpr T>
void check_binary_truth(const T& y_true, const char* op) {
  for (double v : value_of(y_true).values()) {
    if (v != 0.0 && v != 1.0) {
      fail(ErrorCode::non_binary_truth,
           std::string(op) + ": truth must contain only 0 and 1");
    }
  }
}

template <GridExpr T>
void check_class(const T& y_true, const ClassSelector& sel, const char* op) {
  if (sel.num_classes < 1 || sel.which_class >= sel.num_classes) {
    fail(ErrorCode::class_out_of_range,
         std::string(op) + ": class " + std::to_string(sel.which_class) +
             " outside [0, " + std::to_string(sel.num_classes) + ")");
  }
  if (y_true.shape().channels != sel.num_classes) {
    fail(ErrorCode::shape_mismatch,
         std::string(op) + ": expected " + std::to_string(sel.num_classes) +
             " class channels, got shape " + y_true.shape().str());
  }
}

template <GridExpr T>
T orient(const T& score, const CategoricalConfig& cfg) {
  return cfg.use_as_loss ? 1.0 - score : score;
}

/// Shared setup of the per-class scores: returns the discretized prediction.
template <GridExpr T>
T prepare(const T& y_true, const T& y_pred, const ClassSelector& sel,
          const CategoricalConfig& cfg, const char* op) {
  check_config(cfg, op);
  require_same_shape(y_true, y_pred, op);
  check_class(y_true, sel, op);
  check_binary_truth(y_true, op);
  return discretize(y_pred, cfg.discretization);
}

inline const AxisSet& spatial_axes() {
  static const AxisSet axes{Axis::rows, Axis::cols};
  return axes;
}

inline const AxisSet& sample_axes() {
  static const AxisSet axes{Axis::rows, Axis::cols, Axis::channels};
  return axes;
}

}  // namespace detail

/// a / (a + b + c + eps) over every element of the batch.
template <GridExpr T>
T csi(const T& y_true, const T& y_pred, const CategoricalConfig& cfg = {}) {
  detail::check_config(cfg, "csi");
  require_same_shape(y_true, y_pred, "csi");
  detail::check_binary_truth(y_true, "csi");
  const T p = discretize(y_pred, cfg.discretization);
  const T a = sum_all(y_true * p);
  const T b = sum_all((1.0 - y_true) * p);
  const T c = sum_all(y_true * (1.0 - p));
  return detail::orient(a / (a + b + c + kEpsilon), cfg);
}

/// Batch mean of intersection / (union + eps), per sample.
template <GridExpr T>
T iou(const T& y_true, const T& y_pred, const ClassSelector& sel,
      const CategoricalConfig& cfg = {}) {
  const T p = detail::prepare(y_true, y_pred, sel, cfg, "iou");
  const T tk = channel(y_true, sel.which_class);
  const T pk = channel(p, sel.which_class);
  const T intersection = reduce_sum(tk * pk, detail::spatial_axes());
  const T uni = cfg.union_form == UnionForm::full_tensor
                    ? reduce_sum(y_true, detail::sample_axes()) +
                          reduce_sum(p, detail::sample_axes()) - intersection
                    : reduce_sum(tk, detail::spatial_axes()) +
                          reduce_sum(pk, detail::spatial_axes()) - intersection;
  return detail::orient(mean_all(intersection / (uni + kEpsilon)), cfg);
}

/// Batch mean of intersection / number of points, per sample.
template <GridExpr T>
T dice(const T& y_true, const T& y_pred, const ClassSelector& sel,
       const CategoricalConfig& cfg = {}) {
  const T p = detail::prepare(y_true, y_pred, sel, cfg, "dice");
  const T intersection = reduce_sum(channel(y_true, sel.which_class) *
                                        channel(p, sel.which_class),
                                    detail::spatial_axes());
  const Shape s = y_true.shape();
  const double points =
      static_cast<double>(s.rows * s.cols) *
      (cfg.dice_denominator == DiceDenominator::all_channels ? s.channels : 1);
  return detail::orient(mean_all(intersection / points), cfg);
}

/// Batch mean of a / (a + alpha b + beta c + eps), per sample.
template <GridExpr T>
T tversky(const T& y_true, const T& y_pred, const ClassSelector& sel,
          const CategoricalConfig& cfg = {}) {
  const T p = detail::prepare(y_true, y_pred, sel, cfg, "tversky");
  const T tk = channel(y_true, sel.which_class);
  const T pk = channel(p, sel.which_class);
  const T a = reduce_sum(tk * pk, detail::spatial_axes());
  const T b = reduce_sum((1.0 - tk) * pk, detail::spatial_axes());
  const T c = reduce_sum(tk * (1.0 - pk), detail::spatial_axes());
  return detail::orient(
      mean_all(a / (a + b * cfg.alpha + c * cfg.beta + kEpsilon)), cfg);
}

enum class ClassMetric { iou, dice, tversky };

template <GridExpr T>
T class_metric(ClassMetric m, const T& y_true, const T& y_pred,
               const ClassSelector& sel, const CategoricalConfig& cfg) {
  switch (m) {
    case ClassMetric::iou:
      return iou(y_true, y_pred, sel, cfg);
    case ClassMetric::dice:
      return dice(y_true, y_pred, sel, cfg);
    case ClassMetric::tversky:
      return tversky(y_true, y_pred, sel, cfg);
  }
  fail(ErrorCode::invalid_config, "unknown class metric");
}

/// Arithmetic mean of the single-class value over every class channel.
template <GridExpr T>
T all_class_mean(ClassMetric m, const T& y_true, const T& y_pred,
                 const CategoricalConfig& cfg = {}) {
  const std::size_t k = y_true.shape().channels;
  T total = class_metric(m, y_true, y_pred, ClassSelector{0, k}, cfg);
  for (std::size_t i = 1; i < k; ++i) {
    total = total + class_metric(m, y_true, y_pred, ClassSelector{i, k}, cfg);
  }
  return total / static_cast<double>(k);
}

}  // namespace gridloss

#endif  // GRIDLOSS_LOSSES_CATEGORICAL_HPP
