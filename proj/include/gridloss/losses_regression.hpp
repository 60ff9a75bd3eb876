#ifndef GRIDLOSS_LOSSES_REGRESSION_HPP
#define GRIDLOSS_LOSSES_REGRESSION_HPP

// Pointwise regression losses. Every function is generic over the tensor type
// so the same code evaluates plain tensors and taped Vars.

#include <string>

#include "gridloss/autodiff.hpp"
#include "gridloss/error.hpp"
#include "gridloss/grid_tensor.hpp"

namespace gridloss {

template <GridExpr T>
void require_same_shape(const T& a, const T& b, const std::string& op) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::shape_mismatch, op + ": shapes " + a.shape().str() + " and " +
                                        b.shape().str() + " differ");
  }
}

/// Global mean of (true - pred)^2, batch included.
template <GridExpr T>
T mse(const T& y_true, const T& y_pred) {
  require_same_shape(y_true, y_pred, "mse");
  return mean_all(square(y_true - y_pred));
}

/// Per-pixel squared error, left for the caller to reduce.
template <GridExpr T>
T mse_per_pixel(const T& y_true, const T& y_pred) {
  require_same_shape(y_true, y_pred, "mse_per_pixel");
  return square(y_pred - y_true);
}

/// Square root of the mean over the whole batch.
template <GridExpr T>
T rmse_by_batch(const T& y_true, const T& y_pred) {
  require_same_shape(y_true, y_pred, "rmse_by_batch");
  return sqrt(mean_all(square(y_true - y_pred)));
}

/// One RMSE per sample, then the mean over samples.
template <GridExpr T>
T rmse_by_sample(const T& y_true, const T& y_pred) {
  require_same_shape(y_true, y_pred, "rmse_by_sample");
  const T per_sample =
      sqrt(reduce_mean(square(y_true - y_pred), {Axis::rows, Axis::cols, Axis::channels}));
  return mean_all(per_sample);
}

/// mean(exp(w * y_true) * (pred - true)^2)
template <GridExpr T>
T mse_weighted_exp(const T& y_true, const T& y_pred, double w = 5.0) {
  require_same_shape(y_true, y_pred, "mse_weighted_exp");
  return mean_all(exp(y_true * w) * square(y_pred - y_true));
}

/// mean(exp(w * y_true^2) * (pred - true)^2)
template <GridExpr T>
T mse_weighted_genexp(const T& y_true, const T& y_pred, double w = 1.0) {
  require_same_shape(y_true, y_pred, "mse_weighted_genexp");
  return mean_all(exp(square(y_true) * w) * square(y_pred - y_true));
}

/// mean(max(|true|, |pred|)^gamma * (pred - true)^2)
template <GridExpr T>
T dual_weighted_mse(const T& y_true, const T& y_pred, double gamma = 5.0) {
  require_same_shape(y_true, y_pred, "dual_weighted_mse");
  return mean_all(pow(maximum(abs(y_true), abs(y_pred)), gamma) *
                  square(y_pred - y_true));
}

/// Weight w_nonzero where y_true > 0 and w_zero elsewhere (negatives included).
template <GridExpr T>
T mse_zero_nonzero(const T& y_true, const T& y_pred, double w_zero = 1.0,
                   double w_nonzero = 1.0) {
  require_same_shape(y_true, y_pred, "mse_zero_nonzero");
  const T weights = where(greater(y_true, 0.0), full_like(y_true, w_nonzero),
                          full_like(y_true, w_zero));
  return mean_all(weights * square(y_pred - y_true));
}

/// MSE plus w times the squared differences of both Sobel components.
template <GridExpr T>
T mse_with_sobel(const T& y_true, const T& y_pred, double w = 0.0) {
  require_same_shape(y_true, y_pred, "mse_with_sobel");
  const SobelEdges<T> et = sobel_edges(y_true);
  const SobelEdges<T> ep = sobel_edges(y_pred);
  return mean_all(square(y_pred - y_true) + square(ep.dy - et.dy) * w +
                  square(ep.dx - et.dx) * w);
}

/**
 * `y_true_aug` carries the truth in channel 0 and a supplemental mask in
 * channel 1. Pixels whose mask is < 1 get weight w0, the rest w1.
 */
template <GridExpr T>
T mse_supplementary_weighted(const T& y_true_aug, const T& y_pred,
                             double w0 = 1.0, double w1 = 1.0) {
  if (y_true_aug.shape().channels < 2) {
    fail(ErrorCode::missing_supplement_channel,
         "mse_supplementary_weighted: truth needs a mask in channel 1, got shape " +
             y_true_aug.shape().str());
  }
  const T truth = channel(y_true_aug, 0);
  const T suppl = channel(y_true_aug, 1);
  require_same_shape(truth, y_pred, "mse_supplementary_weighted");
  const T weights = where(less(suppl, 1.0), full_like(suppl, w0), full_like(suppl, w1));
  return mean_all(weights * square(y_pred - truth));
}

/// Per-pixel (pred - true)^2 + max(true - pred, 0). Under-prediction costs
/// extra. Not reduced, like the per-pixel MSE it is paired with in training.
template <GridExpr T>
T mse_fewer_misses(const T& y_true, const T& y_pred) {
  require_same_shape(y_true, y_pred, "mse_fewer_misses");
  return square(y_pred - y_true) + maximum(y_true - y_pred, 0.0);
}

}  // namespace gridloss

#endif  // GRIDLOSS_LOSSES_REGRESSION_HPP
