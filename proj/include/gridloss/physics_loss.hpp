#ifndef GRIDLOSS_PHYSICS_LOSS_HPP
#define GRIDLOSS_PHYSICS_LOSS_HPP

// Radiative-flux losses with and without the net-flux constraint.
//
// Fluxes are per-sample scalars carried as (batch, 1, 1, 2) tensors:
// channel 0 is surface downwelling flux, channel 1 top-of-atmosphere
// upwelling flux, both in W m^-2.

#include <string>

#include "gridloss/autodiff.hpp"
#include "gridloss/error.hpp"
#include "gridloss/grid_tensor.hpp"
#include "gridloss/losses_regression.hpp"

namespace gridloss {

template <GridExpr T>
void check_flux_shape(const T& t, const std::string& op) {
  const Shape s = t.shape();
  if (s.rows != 1 || s.cols != 1 || s.channels != 2) {
    fail(ErrorCode::shape_mismatch,
         op + ": fluxes must have shape (batch, 1, 1, 2), got " + s.str());
  }
}

/// Shape check plus non-negativity, for fluxes read from files.
inline void validate_flux(const GridTensor& t) {
  check_flux_shape(t, "flux");
  for (double v : t.values()) {
    if (v < 0.0) fail(ErrorCode::out_of_range, "flux: values must be >= 0");
  }
}

/// F_net = F_down - F_up, shape (batch, 1, 1, 1).
template <GridExpr T>
T net_flux(const T& t) {
  check_flux_shape(t, "net_flux");
  return channel(t, 0) - channel(t, 1);
}

/// Mean over samples of (F_down - F_down')^2 + (F_up - F_up')^2.
template <GridExpr T>
T flux_loss_unconstrained(const T& y_true, const T& y_pred) {
  check_flux_shape(y_true, "flux_loss_unconstrained");
  require_same_shape(y_true, y_pred, "flux_loss_unconstrained");
  const T d = channel(y_true, 0) - channel(y_pred, 0);
  const T u = channel(y_true, 1) - channel(y_pred, 1);
  return mean_all(square(d) + square(u));
}

/// Adds (F_down - F_up - F_down' + F_up')^2 to the unconstrained terms.
template <GridExpr T>
T flux_loss_constrained(const T& y_true, const T& y_pred) {
  check_flux_shape(y_true, "flux_loss_constrained");
  require_same_shape(y_true, y_pred, "flux_loss_constrained");
  const T down = channel(y_true, 0);
  const T up = channel(y_true, 1);
  const T down_hat = channel(y_pred, 0);
  const T up_hat = channel(y_pred, 1);
  return mean_all(square(down - down_hat) + square(up - up_hat) +
                  square(down - up - down_hat + up_hat));
}

}  // namespace gridloss

#endif  // GRIDLOSS_PHYSICS_LOSS_HPP
