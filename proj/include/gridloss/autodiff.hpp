#ifndef GRIDLOSS_AUTODIFF_HPP
#define GRIDLOSS_AUTODIFF_HPP

// Reverse-mode differentiation over GridTensor operations.
//
// A Tape records every operation applied to Var handles in execution order,
// which is a topological order by construction. backward() walks the tape in
// reverse and accumulates adjoints into the nodes marked as parameters.
//
// Operations without a derivative (thresholding, comparisons) are recorded
// as "blocked": they pass no gradient, and any value computed downstream of a
// blocked op whose input depended on a parameter carries the op's name in
// Node::blocked_by. Callers inspect GradientSet::blocked_by to reject such
// losses instead of silently training on a zero gradient.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridloss/error.hpp"
#include "gridloss/grid_tensor.hpp"

namespace gridloss {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while its Tape lives.
class Var {
 public:
  Var() = default;

  const GridTensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool requires_grad() const;

  friend Var operator+(const Var& a, const Var& b);
  friend Var operator-(const Var& a, const Var& b);
  friend Var operator*(const Var& a, const Var& b);
  friend Var operator/(const Var& a, const Var& b);
  friend Var operator-(const Var& a);

  friend Var operator+(const Var& a, double s);
  friend Var operator+(double s, const Var& a);
  friend Var operator-(const Var& a, double s);
  friend Var operator-(double s, const Var& a);
  friend Var operator*(const Var& a, double s);
  friend Var operator*(double s, const Var& a);
  friend Var operator/(const Var& a, double s);
  friend Var operator/(double s, const Var& a);

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <>
struct is_grid_expr<Var> : std::true_type {};

/// Maps the upstream adjoint to one adjoint per input, in input order.
using BackwardFn = std::function<std::vector<GridTensor>(const GridTensor&)>;

struct Node {
  std::string op;
  GridTensor value;
  std::vector<std::size_t> inputs;
  BackwardFn backward;
  bool requires_grad = false;
  bool is_parameter = false;
  /// Name of the first non-differentiable op that cut a parameter
  /// dependency somewhere upstream of this node; empty if none.
  std::string blocked_by;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var parameter(GridTensor value) {
    Node n;
    n.op = "parameter";
    n.value = std::move(value);
    n.requires_grad = true;
    n.is_parameter = true;
    parameters_.push_back(nodes_.size());
    return push(std::move(n));
  }

  Var constant(GridTensor value) {
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    return push(std::move(n));
  }

  /// Records a differentiable op. `extra_block` names a blocking condition
  /// the op itself introduces (used by where() for its condition input).
  Var record(std::string op, GridTensor value, const std::vector<Var>& inputs,
             BackwardFn backward, std::string extra_block = {}) {
    Node n;
    n.op = std::move(op);
    n.value = std::move(value);
    n.backward = std::move(backward);
    n.blocked_by = std::move(extra_block);
    for (const Var& v : inputs) {
      check_owner(v);
      const Node& in = nodes_[v.id()];
      n.inputs.push_back(v.id());
      n.requires_grad = n.requires_grad || in.requires_grad;
      if (n.blocked_by.empty()) n.blocked_by = in.blocked_by;
    }
    return push(std::move(n));
  }

  /// Records a non-differentiable op. The output never requires grad.
  Var record_blocked(std::string op, GridTensor value,
                     const std::vector<Var>& inputs) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    for (const Var& v : inputs) {
      check_owner(v);
      const Node& in = nodes_[v.id()];
      n.inputs.push_back(v.id());
      if (n.blocked_by.empty()) {
        n.blocked_by = in.requires_grad ? op : in.blocked_by;
      }
    }
    return push(std::move(n));
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  const std::vector<std::size_t>& parameters() const noexcept {
    return parameters_;
  }

  void check_owner(const Var& v) const {
    if (v.tape() != this) {
      fail(ErrorCode::invalid_config, "Var belongs to a different tape");
    }
  }

 private:
  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::vector<std::size_t> parameters_;
};

inline const GridTensor& Var::value() const {
  return tape_->node(id_).value;
}
inline bool Var::requires_grad() const {
  return tape_->node(id_).requires_grad;
}

inline const GridTensor& value_of(const Var& v) { return v.value(); }

/// One gradient per parameter of the tape, keyed by node id.
struct GradientSet {
  std::map<std::size_t, GridTensor> by_node;
  std::string blocked_by;

  bool gradient_blocked() const noexcept { return !blocked_by.empty(); }

  const GridTensor& operator[](const Var& parameter) const {
    auto it = by_node.find(parameter.id());
    if (it == by_node.end()) {
      fail(ErrorCode::invalid_config, "Var is not a parameter of this tape");
    }
    return it->second;
  }
};

namespace detail {

inline Tape& tape_of(const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    fail(ErrorCode::invalid_config, "operands live on different tapes");
  }
  return *a.tape();
}

/// Folds an adjoint back to the shape of a scalar-broadcast operand.
inline GridTensor unbroadcast(const GridTensor& g, const Shape& shape) {
  if (g.shape() == shape) return g;
  return sum_all(g);
}

inline Var lift(const Var& like, double s) {
  return like.tape()->constant(GridTensor::scalar(s));
}

template <class Fwd, class Dfx>
Var unary(const char* op, const Var& a, Fwd&& fwd, Dfx&& dfdx) {
  GridTensor x = a.value();
  GridTensor y = fwd(x);
  return a.tape()->record(
      op, y, {a},
      [x, y, dfdx](const GridTensor& g) -> std::vector<GridTensor> {
        return {g * dfdx(x, y)};
      });
}

}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a, b);
  const Shape sa = a.shape(), sb = b.shape();
  return t.record("add", a.value() + b.value(), {a, b},
                  [sa, sb](const GridTensor& g) -> std::vector<GridTensor> {
                    return {detail::unbroadcast(g, sa),
                            detail::unbroadcast(g, sb)};
                  });
}

inline Var operator-(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a, b);
  const Shape sa = a.shape(), sb = b.shape();
  return t.record("sub", a.value() - b.value(), {a, b},
                  [sa, sb](const GridTensor& g) -> std::vector<GridTensor> {
                    return {detail::unbroadcast(g, sa),
                            detail::unbroadcast(-g, sb)};
                  });
}

inline Var operator*(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a, b);
  GridTensor x = a.value(), y = b.value();
  return t.record("mul", x * y, {a, b},
                  [x, y](const GridTensor& g) -> std::vector<GridTensor> {
                    return {detail::unbroadcast(g * y, x.shape()),
                            detail::unbroadcast(g * x, y.shape())};
                  });
}

inline Var operator/(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a, b);
  GridTensor x = a.value(), y = b.value();
  GridTensor q = x / y;
  const Shape sx = x.shape();
  return t.record("div", q, {a, b},
                  [y, q, sx](const GridTensor& g) -> std::vector<GridTensor> {
                    return {detail::unbroadcast(g / y, sx),
                            detail::unbroadcast(-(g * q) / y, y.shape())};
                  });
}

inline Var operator-(const Var& a) {
  return a.tape()->record("neg", -a.value(), {a},
                          [](const GridTensor& g) -> std::vector<GridTensor> {
                            return {-g};
                          });
}

inline Var operator+(const Var& a, double s) { return a + detail::lift(a, s); }
inline Var operator+(double s, const Var& a) { return detail::lift(a, s) + a; }
inline Var operator-(const Var& a, double s) { return a - detail::lift(a, s); }
inline Var operator-(double s, const Var& a) { return detail::lift(a, s) - a; }
inline Var operator*(const Var& a, double s) { return a * detail::lift(a, s); }
inline Var operator*(double s, const Var& a) { return detail::lift(a, s) * a; }
inline Var operator/(const Var& a, double s) { return a / detail::lift(a, s); }
inline Var operator/(double s, const Var& a) { return detail::lift(a, s) / a; }

inline Var square(const Var& a) {
  return detail::unary("square", a, [](const GridTensor& x) { return square(x); },
                       [](const GridTensor& x, const GridTensor&) {
                         return 2.0 * x;
                       });
}

inline Var sqrt(const Var& a) {
  return detail::unary("sqrt", a, [](const GridTensor& x) { return sqrt(x); },
                       [](const GridTensor&, const GridTensor& y) {
                         return map(y, [](double v) { return 0.5 / v; });
                       });
}

inline Var exp(const Var& a) {
  return detail::unary("exp", a, [](const GridTensor& x) { return exp(x); },
                       [](const GridTensor&, const GridTensor& y) { return y; });
}

inline Var abs(const Var& a) {
  return detail::unary(
      "abs", a, [](const GridTensor& x) { return abs(x); },
      [](const GridTensor& x, const GridTensor&) {
        return map(x, [](double v) {
          return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
        });
      });
}

inline Var sigmoid(const Var& a) {
  return detail::unary("sigmoid", a,
                       [](const GridTensor& x) { return sigmoid(x); },
                       [](const GridTensor&, const GridTensor& y) {
                         return y * (1.0 - y);
                       });
}

inline Var pow(const Var& a, double exponent) {
  return detail::unary(
      "pow", a, [exponent](const GridTensor& x) { return pow(x, exponent); },
      [exponent](const GridTensor& x, const GridTensor&) {
        if (exponent == 0.0) return GridTensor::zeros(x.shape());
        return map(x, [exponent](double v) {
          return exponent * std::pow(v, exponent - 1.0);
        });
      });
}

/// Elementwise max. At ties the whole adjoint goes to the first argument.
inline Var maximum(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a, b);
  GridTensor x = a.value(), y = b.value();
  GridTensor first = zip(x, y, [](double u, double v) { return u >= v ? 1.0 : 0.0; });
  return t.record("maximum", maximum(x, y), {a, b},
                  [x, y, first](const GridTensor& g) -> std::vector<GridTensor> {
                    return {detail::unbroadcast(g * first, x.shape()),
                            detail::unbroadcast(g * (1.0 - first), y.shape())};
                  });
}
inline Var maximum(const Var& a, double b) { return maximum(a, detail::lift(a, b)); }

/// Elementwise min. At ties the whole adjoint goes to the first argument.
inline Var minimum(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a, b);
  GridTensor x = a.value(), y = b.value();
  GridTensor first = zip(x, y, [](double u, double v) { return u <= v ? 1.0 : 0.0; });
  return t.record("minimum", minimum(x, y), {a, b},
                  [x, y, first](const GridTensor& g) -> std::vector<GridTensor> {
                    return {detail::unbroadcast(g * first, x.shape()),
                            detail::unbroadcast(g * (1.0 - first), y.shape())};
                  });
}
inline Var minimum(const Var& a, double b) { return minimum(a, detail::lift(a, b)); }

inline Var greater(const Var& a, double threshold) {
  return a.tape()->record_blocked("greater", greater(a.value(), threshold), {a});
}
inline Var less(const Var& a, double threshold) {
  return a.tape()->record_blocked("less", less(a.value(), threshold), {a});
}

inline Var full_like(const Var& ref, double value) {
  return ref.tape()->constant(GridTensor::full(ref.shape(), value));
}
inline Var ones_like(const Var& ref) { return full_like(ref, 1.0); }
inline Var constant_like(const Var& ref, const GridTensor& value) {
  return ref.tape()->constant(value);
}

/// Select with multiplicative-mask adjoints. The condition receives no
/// gradient; a condition that depends on a parameter marks the result as
/// gradient-blocked.
inline Var where(const Var& cond, const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a, b);
  t.check_owner(cond);
  GridTensor c = cond.value();
  GridTensor out = where(c, a.value(), b.value());
  std::string block;
  if (cond.requires_grad()) block = "where_condition";
  return t.record(
      "where", std::move(out), {cond, a, b},
      [c](const GridTensor& g) -> std::vector<GridTensor> {
        return {GridTensor::zeros(c.shape()), g * c, g * (1.0 - c)};
      },
      std::move(block));
}

inline Var reduce(const Var& a, const AxisSet& axes, Reduction kind) {
  const Shape in = a.shape();
  GridTensor out = reduce(a.value(), axes, kind);
  const double scale =
      kind == Reduction::mean
          ? 1.0 / static_cast<double>(in.size() / out.size())
          : 1.0;
  return a.tape()->record(
      kind == Reduction::mean ? "reduce_mean" : "reduce_sum", std::move(out),
      {a}, [in, scale](const GridTensor& g) -> std::vector<GridTensor> {
        GridTensor spread = broadcast_to(g, in);
        return {scale == 1.0 ? spread : spread * scale};
      });
}
inline Var reduce_sum(const Var& a, const AxisSet& axes) {
  return reduce(a, axes, Reduction::sum);
}
inline Var reduce_mean(const Var& a, const AxisSet& axes) {
  return reduce(a, axes, Reduction::mean);
}
inline Var sum_all(const Var& a) { return reduce_sum(a, AxisSet::all()); }
inline Var mean_all(const Var& a) { return reduce_mean(a, AxisSet::all()); }

inline Var channel(const Var& a, std::size_t k) {
  const Shape in = a.shape();
  return a.tape()->record(
      "channel", channel(a.value(), k), {a},
      [in, k](const GridTensor& g) -> std::vector<GridTensor> {
        std::vector<double> out(in.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) out[i * in.channels + k] = g[i];
        return {GridTensor::unchecked(in, std::move(out))};
      });
}

inline Var tile_batch(const Var& a, std::size_t n) {
  return a.tape()->record("tile_batch", tile_batch(a.value(), n), {a},
                          [](const GridTensor& g) -> std::vector<GridTensor> {
                            return {reduce_sum(g, {Axis::batch})};
                          });
}

inline Var pad_reflect(const Var& a, std::size_t n) {
  const Shape in = a.shape();
  return a.tape()->record(
      "pad_reflect", pad_reflect(a.value(), n), {a},
      [in, n](const GridTensor& g) -> std::vector<GridTensor> {
        std::vector<double> out(in.size(), 0.0);
        const Shape gs = g.shape();
        const long off = static_cast<long>(n);
        std::size_t i = 0;
        for (std::size_t b = 0; b < gs.batch; ++b)
          for (std::size_t r = 0; r < gs.rows; ++r)
            for (std::size_t c = 0; c < gs.cols; ++c)
              for (std::size_t ch = 0; ch < gs.channels; ++ch, ++i) {
                const std::size_t rr = reflect_index(static_cast<long>(r) - off, in.rows);
                const std::size_t cc = reflect_index(static_cast<long>(c) - off, in.cols);
                out[((b * in.rows + rr) * in.cols + cc) * in.channels + ch] += g[i];
              }
        return {GridTensor::unchecked(in, std::move(out))};
      });
}

inline Var average_pool2d(const Var& a, Window pool, Window stride = {1, 1}) {
  const Shape in = a.shape();
  return a.tape()->record(
      "average_pool2d", average_pool2d(a.value(), pool, stride), {a},
      [in, pool, stride](const GridTensor& g) -> std::vector<GridTensor> {
        const Shape os = g.shape();
        const double area = static_cast<double>(pool.rows * pool.cols);
        std::vector<double> out(in.size(), 0.0);
        auto idx = [&in](std::size_t b, std::size_t r, std::size_t c,
                         std::size_t ch) {
          return ((b * in.rows + r) * in.cols + c) * in.channels + ch;
        };
        std::size_t o = 0;
        for (std::size_t b = 0; b < os.batch; ++b)
          for (std::size_t r = 0; r < os.rows; ++r)
            for (std::size_t c = 0; c < os.cols; ++c)
              for (std::size_t ch = 0; ch < os.channels; ++ch, ++o) {
                const double share = g[o] / area;
                for (std::size_t dr = 0; dr < pool.rows; ++dr)
                  for (std::size_t dc = 0; dc < pool.cols; ++dc)
                    out[idx(b, r * stride.rows + dr, c * stride.cols + dc, ch)] +=
                        share;
              }
        return {GridTensor::unchecked(in, std::move(out))};
      });
}

inline Var conv2d_fixed(const Var& a, const Kernel& k,
                        Padding padding = Padding::same) {
  const Shape in = a.shape();
  const ConvGeometry geom = ConvGeometry::make(in, k, padding);
  return a.tape()->record(
      "conv2d_fixed", conv2d_fixed(a.value(), k, padding), {a},
      [in, k, geom](const GridTensor& g) -> std::vector<GridTensor> {
        std::vector<double> out(in.size(), 0.0);
        geom.for_each_tap(in, k, [&](std::size_t o, std::size_t i, double w) {
          out[i] += w * g[o];
        });
        return {GridTensor::unchecked(in, std::move(out))};
      });
}

/**
 * Adjoints of `loss` with respect to every parameter on its tape.
 *
 * `loss` must be 1x1x1x1. Parameters the loss does not depend on get an
 * exact zero tensor. Throws NonFiniteGradient if any adjoint is NaN/Inf.
 */
inline GradientSet backward(const Tape& tape, const Var& loss) {
  tape.check_owner(loss);
  if (!loss.value().is_scalar()) {
    fail(ErrorCode::non_scalar_loss,
         "backward needs a scalar loss, got shape " + loss.shape().str());
  }
  std::vector<std::optional<GridTensor>> adj(loss.id() + 1);
  adj[loss.id()] = GridTensor::scalar(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    if (!adj[i]) continue;
    const Node& n = tape.node(i);
    if (!n.requires_grad || !n.backward) continue;
    std::vector<GridTensor> in_adj = n.backward(*adj[i]);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const std::size_t j = n.inputs[k];
      if (!tape.node(j).requires_grad) continue;
      adj[j] = adj[j] ? *adj[j] + in_adj[k] : in_adj[k];
    }
    // Intermediate adjoints are no longer needed once propagated.
    if (!n.is_parameter) adj[i].reset();
  }
  GradientSet out;
  out.blocked_by = tape.node(loss.id()).blocked_by;
  for (std::size_t p : tape.parameters()) {
    GridTensor g = (p <= loss.id() && adj[p])
                       ? *adj[p]
                       : GridTensor::zeros(tape.node(p).value.shape());
    if (!g.all_finite()) {
      fail(ErrorCode::non_finite_gradient,
           "non-finite gradient for parameter node " + std::to_string(p));
    }
    out.by_node.emplace(p, std::move(g));
  }
  return out;
}

}  // namespace gridloss

#endif  // GRIDLOSS_AUTODIFF_HPP
