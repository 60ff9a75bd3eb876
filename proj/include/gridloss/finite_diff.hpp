#ifndef GRIDLOSS_FINITE_DIFF_HPP
#define GRIDLOSS_FINITE_DIFF_HPP

// Central-difference gradient oracle and the reverse-mode-vs-oracle check.
//
// The oracle never touches a Tape. It evaluates the same generic function on
// plain tensors, by default in extended precision, so that its rounding noise
// (about ulp(f) / h) stays far below the gradients it is compared against.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridloss/autodiff.hpp"
#include "gridloss/grid_tensor.hpp"

namespace gridloss {

/// Finite-difference step used when callers don't choose one.
inline constexpr double kDefaultFiniteDiffStep = 1e-5;

/**
 * Central differences (f(p + h e_i) - f(p - h e_i)) / 2h for every element of
 * every parameter. `f` receives the parameters as BasicGridTensor<P> and must
 * return a 1x1x1x1 tensor of the same precision.
 */
template <std::floating_point P = long double, class F>
std::vector<GridTensor> finite_diff_grad(F&& f,
                                         const std::vector<GridTensor>& params,
                                         double h = kDefaultFiniteDiffStep) {
  if (!(h > 0)) fail(ErrorCode::invalid_config, "finite-difference step must be > 0");
  std::vector<BasicGridTensor<P>> point;
  point.reserve(params.size());
  for (const auto& p : params) point.push_back(p.template cast<P>());

  const P step = static_cast<P>(h);
  std::vector<GridTensor> grads;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const BasicGridTensor<P> original = point[k];
    std::vector<P> values(original.values().begin(), original.values().end());
    std::vector<double> g(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const P x = values[i];
      values[i] = x + step;
      point[k] = BasicGridTensor<P>::unchecked(original.shape(), values);
      const P up = f(point).item();
      values[i] = x - step;
      point[k] = BasicGridTensor<P>::unchecked(original.shape(), values);
      const P down = f(point).item();
      values[i] = x;
      g[i] = static_cast<double>((up - down) / (P(2) * step));
    }
    point[k] = original;
    grads.push_back(GridTensor::unchecked(original.shape(), std::move(g)));
  }
  return grads;
}

struct GradCoord {
  std::size_t param = 0;
  std::size_t batch = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t channel = 0;
};

struct GradCheckReport {
  std::string op;
  double max_rel_err = 0.0;
  GradCoord worst_coord;
  bool pass = false;
  /// Set when reverse mode hit a non-differentiable op on the path to a
  /// parameter. Such checks are excluded, not failed.
  std::string blocked_by;

  bool gradient_blocked() const noexcept { return !blocked_by.empty(); }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["op"] = op;
    j["max_rel_err"] = max_rel_err;
    j["worst_coord"] = {{"param", worst_coord.param},
                        {"batch", worst_coord.batch},
                        {"row", worst_coord.row},
                        {"col", worst_coord.col},
                        {"channel", worst_coord.channel}};
    j["pass"] = pass;
    j["gradient_blocked"] = gradient_blocked();
    if (gradient_blocked()) j["blocked_by"] = blocked_by;
    return j;
  }
};

/// |a - b| / max(|a|, |b|, 1e-8)
inline double gradient_rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/**
 * Compares reverse-mode gradients of `f` against finite_diff_grad().
 *
 * `f` must be generic over the tensor type: it is called once with
 * std::vector<Var> (parameters registered on a fresh Tape) and repeatedly
 * with std::vector<BasicGridTensor<long double>> by the oracle.
 */
template <class F>
GradCheckReport grad_check(std::string op, F&& f,
                           const std::vector<GridTensor>& params,
                           double rel_tol,
                           double h = kDefaultFiniteDiffStep) {
  if (!(rel_tol > 0)) fail(ErrorCode::invalid_config, "rel_tol must be > 0");
  GradCheckReport report;
  report.op = std::move(op);

  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.parameter(p));
  const Var loss = f(vars);
  const GradientSet ad = backward(tape, loss);
  if (ad.gradient_blocked()) {
    report.blocked_by = ad.blocked_by;
    return report;
  }

  const std::vector<GridTensor> fd = finite_diff_grad(f, params, h);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const GridTensor& a = ad[vars[k]];
    const GridTensor& b = fd[k];
    const Shape s = a.shape();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double err = gradient_rel_err(a[i], b[i]);
      if (err > report.max_rel_err || (k == 0 && i == 0)) {
        report.max_rel_err = err;
        const std::size_t per_batch = s.rows * s.cols * s.channels;
        report.worst_coord = {k, i / per_batch, (i / (s.cols * s.channels)) % s.rows,
                              (i / s.channels) % s.cols, i % s.channels};
      }
    }
  }
  report.pass = report.max_rel_err < rel_tol;
  return report;
}

}  // namespace gridloss

#endif  // GRIDLOSS_FINITE_DIFF_HPP
