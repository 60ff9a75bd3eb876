#ifndef GRIDLOSS_LOSSES_SPATIAL_HPP
#define GRIDLOSS_LOSSES_SPATIAL_HPP

// Neighborhood measures: the fractions skill score and single-scale SSIM.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gridloss/autodiff.hpp"
#include "gridloss/discretize.hpp"
#include "gridloss/error.hpp"
#include "gridloss/grid_tensor.hpp"
#include "gridloss/losses_categorical.hpp"
#include "gridloss/losses_regression.hpp"

namespace gridloss {

struct FssConfig {
  std::size_t mask_size = 3;
  DiscretizationMode discretization = SoftMode{0.5, 10.0, SoftForm::centered};
  /// Compute the ratio for each sample on its own and average, instead of
  /// the batch-mixed normalization of the original code.
  bool per_sample = false;
};

namespace detail {

/// 1 where the value is exactly zero, as a constant of the same type.
template <GridExpr T>
T zero_indicator(const T& t) {
  const auto& v = value_of(t);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] == 0.0 ? 1.0 : 0.0;
  return constant_like(t, GridTensor(v.shape(), std::move(out)));
}

}  // namespace detail

/**
 * MSE_n / MSE_n_ref, the quantity subtracted from 1 in the FSS.
 *
 * Both fields are discretized, then turned into event densities by average
 * pooling with stride 1 and valid padding. MSE_n is the mean squared density
 * difference over batch and pixels. MSE_n_ref sums the squared densities over
 * the whole batch but divides by the pooled pixel count of a single sample.
 * Hard mode returns MSE_n unchanged when MSE_n_ref is 0; the other modes
 * divide by MSE_n_ref + 1e-7.
 */
template <GridExpr T>
T fss_ratio(const T& y_true, const T& y_pred, const FssConfig& cfg = {}) {
  require_same_shape(y_true, y_pred, "fss");
  validate(cfg.discretization);
  const Shape s = y_true.shape();
  if (cfg.mask_size < 1 || cfg.mask_size > s.rows || cfg.mask_size > s.cols) {
    fail(ErrorCode::mask_too_large, "fss: mask size " + std::to_string(cfg.mask_size) +
                                        " does not fit grid " + s.str());
  }
  const Window mask{cfg.mask_size, cfg.mask_size};
  const T o = average_pool2d(discretize(y_true, cfg.discretization), mask);
  const T m = average_pool2d(discretize(y_pred, cfg.discretization), mask);
  const Shape ps = o.shape();
  const double n_density_pixels = static_cast<double>(ps.rows * ps.cols);
  const bool hard = is_hard(cfg.discretization);

  if (!cfg.per_sample) {
    const T mse_n = mean_all(square(o - m));
    const T ref = (sum_all(square(o)) + sum_all(square(m))) / n_density_pixels;
    if (hard) return mse_n / (ref + detail::zero_indicator(ref));
    return mse_n / (ref + kEpsilon);
  }
  const AxisSet per{Axis::rows, Axis::cols, Axis::channels};
  const T mse_n = reduce_mean(square(o - m), per);
  const T ref = (reduce_sum(square(o), per) + reduce_sum(square(m), per)) /
                (n_density_pixels * static_cast<double>(ps.channels));
  if (hard) return mean_all(mse_n / (ref + detail::zero_indicator(ref)));
  return mean_all(mse_n / (ref + kEpsilon));
}

/// FSS in loss orientation (0 is best). Hard discretization is rejected.
template <GridExpr T>
T fss_loss(const T& y_true, const T& y_pred, const FssConfig& cfg = {}) {
  if (is_hard(cfg.discretization)) {
    fail(ErrorCode::hard_mode_as_loss,
         "fss: hard discretization cannot be used in a loss");
  }
  return fss_ratio(y_true, y_pred, cfg);
}

/// 1 - MSE_n / MSE_n_ref; any discretization mode.
template <GridExpr T>
T fss_score(const T& y_true, const T& y_pred, const FssConfig& cfg = {}) {
  return 1.0 - fss_ratio(y_true, y_pred, cfg);
}

// ---------------------------------------------------------------------------
// SSIM

struct SsimConfig {
  /// Dynamic range L of the images.
  double max_val = 1.0;
  std::size_t filter_size = 11;
  double filter_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

inline void validate(const SsimConfig& cfg) {
  const bool ok = std::isfinite(cfg.max_val) && cfg.max_val > 0 &&
                  std::isfinite(cfg.filter_sigma) && cfg.filter_sigma > 0 &&
                  std::isfinite(cfg.k1) && cfg.k1 > 0 && std::isfinite(cfg.k2) &&
                  cfg.k2 > 0 && cfg.filter_size % 2 == 1;
  if (!ok) {
    fail(ErrorCode::invalid_config,
         "ssim: max_val, filter_sigma, k1 and k2 must be positive and "
         "filter_size odd");
  }
}

/**
 * Mean SSIM over the valid region of each image, then over the batch.
 *
 * Local statistics use a normalized Gaussian window without border padding.
 * Per pixel: (2 mu1 mu2 + C1)(2 s12 + C2) / ((mu1^2 + mu2^2 + C1)(s1 + s2 + C2))
 * with C1 = (k1 L)^2 and C2 = (k2 L)^2, the usual merged form of the
 * luminance, contrast and structure terms (C3 = C2 / 2).
 */
template <GridExpr T>
T ssim(const T& img1, const T& img2, const SsimConfig& cfg = {}) {
  validate(cfg);
  require_same_shape(img1, img2, "ssim");
  const Shape s = img1.shape();
  if (s.channels != 1) {
    fail(ErrorCode::shape_mismatch, "ssim: images must have one channel, got " + s.str());
  }
  if (s.rows < cfg.filter_size || s.cols < cfg.filter_size) {
    fail(ErrorCode::shape_mismatch, "ssim: image " + s.str() +
                                        " is smaller than the filter window");
  }
  for (const T* img : {&img1, &img2}) {
    for (double v : value_of(*img).values()) {
      if (v < 0.0 || v > cfg.max_val) {
        fail(ErrorCode::range_violation, "ssim: values must lie in [0, max_val]");
      }
    }
  }
  const Kernel window = gaussian_window(cfg.filter_size, cfg.filter_sigma);
  auto filter = [&](const T& t) { return conv2d_fixed(t, window, Padding::valid); };

  const double c1 = (cfg.k1 * cfg.max_val) * (cfg.k1 * cfg.max_val);
  const double c2 = (cfg.k2 * cfg.max_val) * (cfg.k2 * cfg.max_val);
  const T mu1 = filter(img1);
  const T mu2 = filter(img2);
  const T mu11 = mu1 * mu1;
  const T mu22 = mu2 * mu2;
  const T mu12 = mu1 * mu2;
  const T s11 = filter(img1 * img1) - mu11;
  const T s22 = filter(img2 * img2) - mu22;
  const T s12 = filter(img1 * img2) - mu12;
  const T map = ((mu12 * 2.0 + c1) * (s12 * 2.0 + c2)) /
                ((mu11 + mu22 + c1) * (s11 + s22 + c2));
  return mean_all(map);
}

template <GridExpr T>
T ssim_loss(const T& img1, const T& img2, const SsimConfig& cfg = {}) {
  return 1.0 - ssim(img1, img2, cfg);
}

}  // namespace gridloss

#endif  // GRIDLOSS_LOSSES_SPATIAL_HPP
