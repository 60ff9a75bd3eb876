#ifndef GRIDLOSS_GRID_TENSOR_HPP
#define GRIDLOSS_GRID_TENSOR_HPP

/**
 * @file grid_tensor.hpp
 * @brief Immutable rank-4 tensor (batch, rows, cols, channels) and the
 * operations the loss catalogue is assembled from.
 *
 * Storage is row-major with the channel axis varying fastest. Tensors share
 * their buffer on copy; nothing mutates a buffer after construction, so a
 * tensor can be handed to any number of threads.
 *
 * Broadcasting is limited to scalar-vs-tensor: a 1x1x1x1 operand combines
 * with a tensor of any shape. Everything else requires identical shapes.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "gridloss/error.hpp"

namespace gridloss {

enum class Axis : unsigned { batch = 0, rows = 1, cols = 2, channels = 3 };

struct Shape {
  std::size_t batch = 1;
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::size_t channels = 1;

  constexpr std::size_t size() const noexcept {
    return batch * rows * cols * channels;
  }

  constexpr std::size_t extent(Axis axis) const noexcept {
    switch (axis) {
      case Axis::batch: return batch;
      case Axis::rows: return rows;
      case Axis::cols: return cols;
      case Axis::channels: return channels;
    }
    return 0;
  }

  constexpr bool is_scalar() const noexcept { return size() == 1; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    std::ostringstream os;
    os << '(' << batch << ", " << rows << ", " << cols << ", " << channels
       << ')';
    return os.str();
  }
};

/// A set of axes to reduce over. Duplicates are rejected at construction.
class AxisSet {
 public:
  AxisSet() = default;

  AxisSet(std::initializer_list<Axis> axes) {
    for (Axis a : axes) add(a);
  }

  static AxisSet all() {
    return {Axis::batch, Axis::rows, Axis::cols, Axis::channels};
  }

  /// Axis indices 0..3 as used by array libraries (0 = batch).
  static AxisSet from_indices(std::span<const int> indices) {
    AxisSet set;
    for (int i : indices) {
      if (i < 0 || i > 3) {
        fail(ErrorCode::invalid_axis,
             "axis index " + std::to_string(i) + " outside [0, 3]");
      }
      set.add(static_cast<Axis>(i));
    }
    return set;
  }

  bool contains(Axis a) const noexcept {
    return (mask_ & bit(a)) != 0;
  }
  bool empty() const noexcept { return mask_ == 0; }

 private:
  static constexpr unsigned bit(Axis a) noexcept {
    return 1u << static_cast<unsigned>(a);
  }
  void add(Axis a) {
    if (contains(a)) fail(ErrorCode::invalid_axis, "duplicate axis in AxisSet");
    mask_ |= bit(a);
  }

  unsigned mask_ = 0;
};

enum class Reduction { mean, sum };

template <std::floating_point S>
class BasicGridTensor {
 public:
  using value_type = S;

  /// Scalar zero.
  BasicGridTensor() : BasicGridTensor(Shape{}, std::vector<S>{S(0)}) {}

  /// Checked constructor: rejects size mismatches and NaN/Inf entries.
  BasicGridTensor(Shape shape, std::vector<S> values)
      : BasicGridTensor(shape, std::move(values), Unchecked{}) {
    for (S v : *data_) {
      if (!std::isfinite(v)) {
        fail(ErrorCode::non_finite_operand,
             "GridTensor constructed from a non-finite value");
      }
    }
  }

  /// Accepts non-finite entries. Shape consistency is still enforced.
  static BasicGridTensor unchecked(Shape shape, std::vector<S> values) {
    return BasicGridTensor(shape, std::move(values), Unchecked{});
  }

  static BasicGridTensor full(Shape shape, S value) {
    return unchecked(shape, std::vector<S>(shape.size(), value));
  }
  static BasicGridTensor zeros(Shape shape) { return full(shape, S(0)); }
  static BasicGridTensor scalar(S value) { return full(Shape{}, value); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_->size(); }
  bool is_scalar() const noexcept { return shape_.is_scalar(); }
  std::span<const S> values() const& noexcept { return *data_; }
  /// Deleted so a span into a dying temporary cannot be formed.
  std::span<const S> values() const&& = delete;

  S operator[](std::size_t i) const { return (*data_)[i]; }

  std::size_t index(std::size_t b, std::size_t r, std::size_t c,
                    std::size_t ch) const noexcept {
    return ((b * shape_.rows + r) * shape_.cols + c) * shape_.channels + ch;
  }
  S at(std::size_t b, std::size_t r, std::size_t c, std::size_t ch) const {
    return (*data_)[index(b, r, c, ch)];
  }

  /// Value of a 1x1x1x1 tensor.
  S item() const {
    if (!is_scalar()) {
      fail(ErrorCode::shape_mismatch,
           "item() on non-scalar tensor of shape " + shape_.str());
    }
    return (*data_)[0];
  }

  bool all_finite() const noexcept {
    return std::all_of(data_->begin(), data_->end(),
                       [](S v) { return std::isfinite(v); });
  }

  template <std::floating_point T>
  BasicGridTensor<T> cast() const {
    return BasicGridTensor<T>::unchecked(
        shape_, std::vector<T>(data_->begin(), data_->end()));
  }

  friend BasicGridTensor operator+(const BasicGridTensor& a,
                                   const BasicGridTensor& b) {
    return zip(a, b, [](S x, S y) { return x + y; });
  }
  friend BasicGridTensor operator-(const BasicGridTensor& a,
                                   const BasicGridTensor& b) {
    return zip(a, b, [](S x, S y) { return x - y; });
  }
  friend BasicGridTensor operator*(const BasicGridTensor& a,
                                   const BasicGridTensor& b) {
    return zip(a, b, [](S x, S y) { return x * y; });
  }
  friend BasicGridTensor operator/(const BasicGridTensor& a,
                                   const BasicGridTensor& b) {
    for (S v : b.values()) {
      if (v == S(0)) fail(ErrorCode::domain_error, "division by zero");
    }
    return zip(a, b, [](S x, S y) { return x / y; });
  }
  friend BasicGridTensor operator-(const BasicGridTensor& a) {
    return map(a, [](S x) { return -x; });
  }

  friend BasicGridTensor operator+(const BasicGridTensor& a, S s) {
    return a + scalar(s);
  }
  friend BasicGridTensor operator+(S s, const BasicGridTensor& a) {
    return scalar(s) + a;
  }
  friend BasicGridTensor operator-(const BasicGridTensor& a, S s) {
    return a - scalar(s);
  }
  friend BasicGridTensor operator-(S s, const BasicGridTensor& a) {
    return scalar(s) - a;
  }
  friend BasicGridTensor operator*(const BasicGridTensor& a, S s) {
    return a * scalar(s);
  }
  friend BasicGridTensor operator*(S s, const BasicGridTensor& a) {
    return scalar(s) * a;
  }
  friend BasicGridTensor operator/(const BasicGridTensor& a, S s) {
    return a / scalar(s);
  }
  friend BasicGridTensor operator/(S s, const BasicGridTensor& a) {
    return scalar(s) / a;
  }

  /// Elementwise map; the result may hold non-finite values.
  template <class F>
  friend BasicGridTensor map(const BasicGridTensor& a, F&& f) {
    std::vector<S> out(a.size());
    std::transform(a.data_->begin(), a.data_->end(), out.begin(), f);
    return unchecked(a.shape_, std::move(out));
  }

  /// Elementwise binary combination with scalar broadcasting.
  template <class F>
  friend BasicGridTensor zip(const BasicGridTensor& a, const BasicGridTensor& b,
                             F&& f) {
    const Shape out_shape = broadcast_shape(a.shape_, b.shape_);
    std::vector<S> out(out_shape.size());
    const bool a_scalar = a.size() == 1;
    const bool b_scalar = b.size() == 1;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = f(a_scalar ? (*a.data_)[0] : (*a.data_)[i],
                 b_scalar ? (*b.data_)[0] : (*b.data_)[i]);
    }
    return unchecked(out_shape, std::move(out));
  }

  static Shape broadcast_shape(const Shape& a, const Shape& b) {
    if (a == b) return a;
    if (a.is_scalar()) return b;
    if (b.is_scalar()) return a;
    fail(ErrorCode::shape_mismatch,
         "shapes " + a.str() + " and " + b.str() + " are not compatible");
  }

 private:
  struct Unchecked {};

  BasicGridTensor(Shape shape, std::vector<S> values, Unchecked)
      : shape_(shape),
        data_(std::make_shared<const std::vector<S>>(std::move(values))) {
    if (shape.batch == 0 || shape.rows == 0 || shape.cols == 0 ||
        shape.channels == 0) {
      fail(ErrorCode::shape_mismatch, "shape dimensions must be >= 1, got " +
                                          shape.str());
    }
    if (data_->size() != shape.size()) {
      fail(ErrorCode::shape_mismatch,
           "data length " + std::to_string(data_->size()) +
               " does not match shape " + shape.str());
    }
  }

  Shape shape_;
  std::shared_ptr<const std::vector<S>> data_;
};

using GridTensor = BasicGridTensor<double>;

/// Types the loss templates accept: concrete tensors of any float precision,
/// plus the differentiable handle declared in autodiff.hpp.
template <class T>
struct is_grid_expr : std::false_type {};
template <std::floating_point S>
struct is_grid_expr<BasicGridTensor<S>> : std::true_type {};

template <class T>
concept GridExpr = is_grid_expr<std::remove_cvref_t<T>>::value;

template <std::floating_point S>
const BasicGridTensor<S>& value_of(const BasicGridTensor<S>& t) noexcept {
  return t;
}

template <GridExpr T>
double scalar_value(const T& t) {
  return static_cast<double>(value_of(t).item());
}

// ---------------------------------------------------------------------------
// Elementwise family

template <std::floating_point S>
BasicGridTensor<S> square(const BasicGridTensor<S>& a) {
  return map(a, [](S x) { return x * x; });
}

template <std::floating_point S>
BasicGridTensor<S> sqrt(const BasicGridTensor<S>& a) {
  for (S v : a.values()) {
    if (v < S(0)) fail(ErrorCode::domain_error, "sqrt of a negative value");
  }
  return map(a, [](S x) { return std::sqrt(x); });
}

template <std::floating_point S>
BasicGridTensor<S> exp(const BasicGridTensor<S>& a) {
  return map(a, [](S x) { return std::exp(x); });
}

template <std::floating_point S>
BasicGridTensor<S> abs(const BasicGridTensor<S>& a) {
  return map(a, [](S x) { return std::abs(x); });
}

template <std::floating_point S>
S sigmoid_scalar(S x) {
  // Evaluated on the side that cannot overflow exp().
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

template <std::floating_point S>
BasicGridTensor<S> sigmoid(const BasicGridTensor<S>& a) {
  return map(a, [](S x) { return sigmoid_scalar(x); });
}

template <std::floating_point S>
BasicGridTensor<S> pow(const BasicGridTensor<S>& a,
                       std::type_identity_t<S> exponent) {
  auto out = map(a, [exponent](S x) { return std::pow(x, exponent); });
  for (S v : out.values()) {
    if (std::isnan(v)) fail(ErrorCode::domain_error, "pow produced NaN");
  }
  return out;
}

template <std::floating_point S>
BasicGridTensor<S> maximum(const BasicGridTensor<S>& a,
                           const BasicGridTensor<S>& b) {
  return zip(a, b, [](S x, S y) { return x >= y ? x : y; });
}
template <std::floating_point S>
BasicGridTensor<S> maximum(const BasicGridTensor<S>& a,
                           std::type_identity_t<S> b) {
  return maximum(a, BasicGridTensor<S>::scalar(b));
}

template <std::floating_point S>
BasicGridTensor<S> minimum(const BasicGridTensor<S>& a,
                           const BasicGridTensor<S>& b) {
  return zip(a, b, [](S x, S y) { return x <= y ? x : y; });
}
template <std::floating_point S>
BasicGridTensor<S> minimum(const BasicGridTensor<S>& a,
                           std::type_identity_t<S> b) {
  return minimum(a, BasicGridTensor<S>::scalar(b));
}

/// 1 where a > threshold, else 0.
template <std::floating_point S>
BasicGridTensor<S> greater(const BasicGridTensor<S>& a,
                           std::type_identity_t<S> threshold) {
  return map(a, [threshold](S x) { return x > threshold ? S(1) : S(0); });
}

/// 1 where a < threshold, else 0.
template <std::floating_point S>
BasicGridTensor<S> less(const BasicGridTensor<S>& a,
                        std::type_identity_t<S> threshold) {
  return map(a, [threshold](S x) { return x < threshold ? S(1) : S(0); });
}

template <std::floating_point S>
BasicGridTensor<S> full_like(const BasicGridTensor<S>& ref, double value) {
  return BasicGridTensor<S>::full(ref.shape(), static_cast<S>(value));
}

template <std::floating_point S>
BasicGridTensor<S> ones_like(const BasicGridTensor<S>& ref) {
  return full_like(ref, 1.0);
}

/// Lifts a double-precision constant into the precision of `ref`.
template <std::floating_point S>
BasicGridTensor<S> constant_like(const BasicGridTensor<S>&,
                                 const GridTensor& value) {
  return value.template cast<S>();
}

// ---------------------------------------------------------------------------
// Reductions (kept-dims)

inline Shape reduced_shape(const Shape& in, const AxisSet& axes) {
  return Shape{axes.contains(Axis::batch) ? 1 : in.batch,
               axes.contains(Axis::rows) ? 1 : in.rows,
               axes.contains(Axis::cols) ? 1 : in.cols,
               axes.contains(Axis::channels) ? 1 : in.channels};
}

template <std::floating_point S>
BasicGridTensor<S> reduce(const BasicGridTensor<S>& t, const AxisSet& axes,
                          Reduction kind) {
  if (axes.empty()) fail(ErrorCode::invalid_axis, "reduction over no axes");
  const Shape in = t.shape();
  const Shape out_shape = reduced_shape(in, axes);
  std::vector<S> acc(out_shape.size(), S(0));
  // Inputs are visited in storage order so the summation order is fixed.
  std::size_t i = 0;
  for (std::size_t b = 0; b < in.batch; ++b) {
    const std::size_t ob = axes.contains(Axis::batch) ? 0 : b;
    for (std::size_t r = 0; r < in.rows; ++r) {
      const std::size_t orow = axes.contains(Axis::rows) ? 0 : r;
      for (std::size_t c = 0; c < in.cols; ++c) {
        const std::size_t oc = axes.contains(Axis::cols) ? 0 : c;
        for (std::size_t ch = 0; ch < in.channels; ++ch, ++i) {
          const std::size_t och = axes.contains(Axis::channels) ? 0 : ch;
          acc[((ob * out_shape.rows + orow) * out_shape.cols + oc) *
                  out_shape.channels +
              och] += t[i];
        }
      }
    }
  }
  if (kind == Reduction::mean) {
    const S count = static_cast<S>(in.size() / out_shape.size());
    for (S& v : acc) v /= count;
  }
  return BasicGridTensor<S>::unchecked(out_shape, std::move(acc));
}

template <std::floating_point S>
BasicGridTensor<S> reduce_sum(const BasicGridTensor<S>& t, const AxisSet& axes) {
  return reduce(t, axes, Reduction::sum);
}
template <std::floating_point S>
BasicGridTensor<S> reduce_mean(const BasicGridTensor<S>& t,
                               const AxisSet& axes) {
  return reduce(t, axes, Reduction::mean);
}
template <std::floating_point S>
BasicGridTensor<S> sum_all(const BasicGridTensor<S>& t) {
  return reduce(t, AxisSet::all(), Reduction::sum);
}
template <std::floating_point S>
BasicGridTensor<S> mean_all(const BasicGridTensor<S>& t) {
  return reduce(t, AxisSet::all(), Reduction::mean);
}

/// Inverse of a kept-dims reduction: repeats size-1 axes up to `shape`.
template <std::floating_point S>
BasicGridTensor<S> broadcast_to(const BasicGridTensor<S>& t, const Shape& shape) {
  const Shape in = t.shape();
  auto compatible = [](std::size_t from, std::size_t to) {
    return from == to || from == 1;
  };
  if (!compatible(in.batch, shape.batch) || !compatible(in.rows, shape.rows) ||
      !compatible(in.cols, shape.cols) ||
      !compatible(in.channels, shape.channels)) {
    fail(ErrorCode::shape_mismatch,
         "cannot broadcast " + in.str() + " to " + shape.str());
  }
  std::vector<S> out(shape.size());
  std::size_t i = 0;
  for (std::size_t b = 0; b < shape.batch; ++b)
    for (std::size_t r = 0; r < shape.rows; ++r)
      for (std::size_t c = 0; c < shape.cols; ++c)
        for (std::size_t ch = 0; ch < shape.channels; ++ch, ++i)
          out[i] = t.at(in.batch == 1 ? 0 : b, in.rows == 1 ? 0 : r,
                        in.cols == 1 ? 0 : c, in.channels == 1 ? 0 : ch);
  return BasicGridTensor<S>::unchecked(shape, std::move(out));
}

// ---------------------------------------------------------------------------
// Selection

/**
 * Elementwise select: a where cond is 1, b where cond is 0.
 *
 * Both branches must be finite. A NaN in the unselected branch would survive
 * the multiplicative masking used during differentiation (0 * NaN = NaN), so
 * it is rejected here rather than at backward time.
 */
template <std::floating_point S>
BasicGridTensor<S> where(const BasicGridTensor<S>& cond,
                         const BasicGridTensor<S>& a,
                         const BasicGridTensor<S>& b) {
  if (cond.shape() != a.shape() || cond.shape() != b.shape()) {
    fail(ErrorCode::shape_mismatch, "where: shapes " + cond.shape().str() +
                                        ", " + a.shape().str() + ", " +
                                        b.shape().str() + " differ");
  }
  if (!a.all_finite() || !b.all_finite()) {
    fail(ErrorCode::non_finite_operand,
         "where: branch tensors must be finite");
  }
  std::vector<S> out(cond.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const S c = cond[i];
    if (c != S(0) && c != S(1)) {
      fail(ErrorCode::domain_error, "where: condition must be 0/1 valued");
    }
    out[i] = c == S(1) ? a[i] : b[i];
  }
  return BasicGridTensor<S>::unchecked(cond.shape(), std::move(out));
}

// ---------------------------------------------------------------------------
// Layout helpers

template <std::floating_point S>
BasicGridTensor<S> channel(const BasicGridTensor<S>& t, std::size_t k) {
  const Shape in = t.shape();
  if (k >= in.channels) {
    fail(ErrorCode::shape_mismatch, "channel " + std::to_string(k) +
                                        " out of range for shape " + in.str());
  }
  Shape out_shape = in;
  out_shape.channels = 1;
  std::vector<S> out(out_shape.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t[i * in.channels + k];
  return BasicGridTensor<S>::unchecked(out_shape, std::move(out));
}

template <std::floating_point S>
BasicGridTensor<S> concat_channels(std::span<const BasicGridTensor<S>> parts) {
  if (parts.empty()) fail(ErrorCode::shape_mismatch, "concat of no tensors");
  Shape out_shape = parts.front().shape();
  out_shape.channels = 0;
  for (const auto& p : parts) {
    const Shape s = p.shape();
    if (s.batch != out_shape.batch || s.rows != out_shape.rows ||
        s.cols != out_shape.cols) {
      fail(ErrorCode::shape_mismatch, "concat_channels: spatial shapes differ");
    }
    out_shape.channels += s.channels;
  }
  std::vector<S> out;
  out.reserve(out_shape.size());
  const std::size_t pixels = out_shape.batch * out_shape.rows * out_shape.cols;
  for (std::size_t px = 0; px < pixels; ++px) {
    for (const auto& p : parts) {
      const std::size_t n = p.shape().channels;
      for (std::size_t ch = 0; ch < n; ++ch) out.push_back(p[px * n + ch]);
    }
  }
  return BasicGridTensor<S>::unchecked(out_shape, std::move(out));
}

template <std::floating_point S>
BasicGridTensor<S> concat_channels(const BasicGridTensor<S>& a,
                                   const BasicGridTensor<S>& b) {
  const std::array<BasicGridTensor<S>, 2> parts{a, b};
  return concat_channels(std::span<const BasicGridTensor<S>>(parts));
}

/// Samples [begin, end) along the batch axis.
template <std::floating_point S>
BasicGridTensor<S> slice_batch(const BasicGridTensor<S>& t, std::size_t begin,
                               std::size_t end) {
  const Shape in = t.shape();
  if (begin >= end || end > in.batch) {
    fail(ErrorCode::shape_mismatch, "slice_batch: bad range");
  }
  Shape out_shape = in;
  out_shape.batch = end - begin;
  const std::size_t per = in.rows * in.cols * in.channels;
  auto first = t.values().begin() + static_cast<std::ptrdiff_t>(begin * per);
  return BasicGridTensor<S>::unchecked(
      out_shape,
      std::vector<S>(first, first + static_cast<std::ptrdiff_t>(
                                        out_shape.batch * per)));
}

/// Repeats a batch-1 tensor n times along the batch axis.
template <std::floating_point S>
BasicGridTensor<S> tile_batch(const BasicGridTensor<S>& t, std::size_t n) {
  if (t.shape().batch != 1) {
    fail(ErrorCode::shape_mismatch, "tile_batch expects batch size 1");
  }
  Shape s = t.shape();
  s.batch = n;
  return broadcast_to(t, s);
}

/// Swaps the rows and cols axes.
template <std::floating_point S>
BasicGridTensor<S> transpose_spatial(const BasicGridTensor<S>& t) {
  const Shape in = t.shape();
  const Shape out_shape{in.batch, in.cols, in.rows, in.channels};
  std::vector<S> out(in.size());
  std::size_t i = 0;
  for (std::size_t b = 0; b < in.batch; ++b)
    for (std::size_t r = 0; r < out_shape.rows; ++r)
      for (std::size_t c = 0; c < out_shape.cols; ++c)
        for (std::size_t ch = 0; ch < in.channels; ++ch, ++i)
          out[i] = t.at(b, c, r, ch);
  return BasicGridTensor<S>::unchecked(out_shape, std::move(out));
}

/// Source index of padded position `i` (may be negative or >= n) under
/// reflection about the border cells, which are not repeated.
inline std::size_t reflect_index(long i, std::size_t n) {
  const long last = static_cast<long>(n) - 1;
  if (i < 0) i = -i;
  if (i > last) i = 2 * last - i;
  return static_cast<std::size_t>(i);
}

/// Pads rows and columns by `n` cells on every side by reflection.
template <std::floating_point S>
BasicGridTensor<S> pad_reflect(const BasicGridTensor<S>& t, std::size_t n) {
  const Shape in = t.shape();
  if (in.rows <= n || in.cols <= n) {
    fail(ErrorCode::shape_mismatch,
         "pad_reflect: grid " + in.str() + " too small to reflect by " + std::to_string(n));
  }
  const Shape out_shape{in.batch, in.rows + 2 * n, in.cols + 2 * n, in.channels};
  std::vector<S> out;
  out.reserve(out_shape.size());
  const long off = static_cast<long>(n);
  for (std::size_t b = 0; b < in.batch; ++b)
    for (std::size_t r = 0; r < out_shape.rows; ++r)
      for (std::size_t c = 0; c < out_shape.cols; ++c)
        for (std::size_t ch = 0; ch < in.channels; ++ch)
          out.push_back(t.at(b, reflect_index(static_cast<long>(r) - off, in.rows),
                             reflect_index(static_cast<long>(c) - off, in.cols), ch));
  return BasicGridTensor<S>::unchecked(out_shape, std::move(out));
}

// ---------------------------------------------------------------------------
// Structured spatial operations

struct Window {
  std::size_t rows = 1;
  std::size_t cols = 1;
};

inline Shape pooled_shape(const Shape& in, Window pool, Window stride) {
  if (pool.rows == 0 || pool.cols == 0 || stride.rows == 0 ||
      stride.cols == 0) {
    fail(ErrorCode::invalid_config, "pool and stride must be >= 1");
  }
  if (pool.rows > in.rows || pool.cols > in.cols) {
    fail(ErrorCode::pool_too_large,
         "pool window larger than spatial extent of " + in.str());
  }
  return Shape{in.batch, (in.rows - pool.rows) / stride.rows + 1,
               (in.cols - pool.cols) / stride.cols + 1, in.channels};
}

/// Average pooling with "valid" padding, per channel and per sample.
template <std::floating_point S>
BasicGridTensor<S> average_pool2d(const BasicGridTensor<S>& t, Window pool,
                                  Window stride = {1, 1}) {
  const Shape in = t.shape();
  const Shape out_shape = pooled_shape(in, pool, stride);
  const S area = static_cast<S>(pool.rows * pool.cols);
  std::vector<S> out(out_shape.size());
  std::size_t o = 0;
  for (std::size_t b = 0; b < out_shape.batch; ++b)
    for (std::size_t r = 0; r < out_shape.rows; ++r)
      for (std::size_t c = 0; c < out_shape.cols; ++c)
        for (std::size_t ch = 0; ch < out_shape.channels; ++ch, ++o) {
          S sum = 0;
          for (std::size_t dr = 0; dr < pool.rows; ++dr)
            for (std::size_t dc = 0; dc < pool.cols; ++dc)
              sum += t.at(b, r * stride.rows + dr, c * stride.cols + dc, ch);
          out[o] = sum / area;
        }
  return BasicGridTensor<S>::unchecked(out_shape, std::move(out));
}

enum class Padding { same, valid };

/**
 * Fixed (non-trainable) convolution weights in (rows, cols, in, out) order,
 * the layout array libraries call HWIO, plus one bias per output channel.
 */
struct Kernel {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::vector<double> weights;
  std::vector<double> bias;

  double weight(std::size_t kr, std::size_t kc, std::size_t ci,
                std::size_t co) const {
    return weights[((kr * cols + kc) * in_channels + ci) * out_channels + co];
  }

  void validate() const {
    if (rows == 0 || cols == 0 || in_channels == 0 || out_channels == 0 ||
        weights.size() != rows * cols * in_channels * out_channels ||
        bias.size() != out_channels) {
      fail(ErrorCode::shape_mismatch, "kernel weights/bias size mismatch");
    }
  }
};

/// Geometry shared by the forward pass and its adjoint.
struct ConvGeometry {
  Shape out;
  std::size_t pad_top = 0;
  std::size_t pad_left = 0;

  static ConvGeometry make(const Shape& in, const Kernel& k, Padding padding) {
    k.validate();
    if (k.in_channels != in.channels) {
      fail(ErrorCode::shape_mismatch,
           "kernel expects " + std::to_string(k.in_channels) +
               " input channels, tensor has " + std::to_string(in.channels));
    }
    ConvGeometry g;
    if (padding == Padding::same) {
      g.out = Shape{in.batch, in.rows, in.cols, k.out_channels};
      g.pad_top = (k.rows - 1) / 2;
      g.pad_left = (k.cols - 1) / 2;
    } else {
      if (k.rows > in.rows || k.cols > in.cols) {
        fail(ErrorCode::shape_mismatch,
             "kernel larger than input for valid convolution");
      }
      g.out = Shape{in.batch, in.rows - k.rows + 1, in.cols - k.cols + 1,
                    k.out_channels};
    }
    return g;
  }

  /// Visits every (output index, input index, weight) triple that
  /// contributes to the cross-correlation. Zero padding means out-of-range
  /// taps are simply skipped.
  template <class F>
  void for_each_tap(const Shape& in, const Kernel& k, F&& f) const {
    for (std::size_t b = 0; b < out.batch; ++b)
      for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t c = 0; c < out.cols; ++c)
          for (std::size_t kr = 0; kr < k.rows; ++kr) {
            const auto ir = static_cast<std::ptrdiff_t>(r + kr) -
                            static_cast<std::ptrdiff_t>(pad_top);
            if (ir < 0 || ir >= static_cast<std::ptrdiff_t>(in.rows)) continue;
            for (std::size_t kc = 0; kc < k.cols; ++kc) {
              const auto ic = static_cast<std::ptrdiff_t>(c + kc) -
                              static_cast<std::ptrdiff_t>(pad_left);
              if (ic < 0 || ic >= static_cast<std::ptrdiff_t>(in.cols))
                continue;
              const std::size_t in_base =
                  ((b * in.rows + static_cast<std::size_t>(ir)) * in.cols +
                   static_cast<std::size_t>(ic)) *
                  in.channels;
              const std::size_t out_base =
                  ((b * out.rows + r) * out.cols + c) * out.channels;
              for (std::size_t ci = 0; ci < k.in_channels; ++ci)
                for (std::size_t co = 0; co < k.out_channels; ++co)
                  f(out_base + co, in_base + ci, k.weight(kr, kc, ci, co));
            }
          }
  }
};

/// Cross-correlation with a constant kernel (stride 1).
template <std::floating_point S>
BasicGridTensor<S> conv2d_fixed(const BasicGridTensor<S>& t, const Kernel& k,
                                Padding padding = Padding::same) {
  const ConvGeometry g = ConvGeometry::make(t.shape(), k, padding);
  std::vector<S> out(g.out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<S>(k.bias[i % k.out_channels]);
  }
  g.for_each_tap(t.shape(), k, [&](std::size_t o, std::size_t i, double w) {
    out[o] += static_cast<S>(w) * t[i];
  });
  return BasicGridTensor<S>::unchecked(g.out, std::move(out));
}

/// 5x5 Gaussian smoother with an e-folding radius of one pixel.
inline constexpr std::array<double, 25> gaussian_smoother_5x5 = {
    0.00296902, 0.01330621, 0.02193823, 0.01330621, 0.00296902,
    0.01330621, 0.0596343,  0.09832033, 0.0596343,  0.01330621,
    0.02193823, 0.09832033, 0.16210282, 0.09832033, 0.02193823,
    0.01330621, 0.0596343,  0.09832033, 0.0596343,  0.01330621,
    0.00296902, 0.01330621, 0.02193823, 0.01330621, 0.00296902};

/**
 * The smoother expanded to (5, 5, in, out). Every (in, out) pair receives the
 * same 5x5 weights, so with several channels each output channel is the sum
 * of all smoothed inputs. Biases are zero.
 */
inline Kernel gaussian_kernel(std::size_t in_channels = 1,
                              std::size_t out_channels = 1) {
  Kernel k{5, 5, in_channels, out_channels, {}, {}};
  k.weights.reserve(25 * in_channels * out_channels);
  for (double w : gaussian_smoother_5x5)
    for (std::size_t i = 0; i < in_channels * out_channels; ++i)
      k.weights.push_back(w);
  k.bias.assign(out_channels, 0.0);
  return k;
}

/// Normalized square Gaussian window of odd `size`, single channel.
inline Kernel gaussian_window(std::size_t size, double sigma) {
  if (size == 0 || size % 2 == 0 || !(sigma > 0)) {
    fail(ErrorCode::invalid_config, "gaussian window needs odd size, sigma > 0");
  }
  std::vector<double> g(size);
  const double center = static_cast<double>(size - 1) / 2.0;
  double total = 0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - center;
    g[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  Kernel k{size, size, 1, 1, {}, {0.0}};
  k.weights.reserve(size * size);
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c) k.weights.push_back(g[r] * g[c]);
  return k;
}

/// Sobel stencils as a (3, 3, 1, 2) kernel: output 0 = dy, output 1 = dx.
inline Kernel sobel_kernel() {
  constexpr std::array<double, 9> dy = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
  constexpr std::array<double, 9> dx = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
  Kernel k{3, 3, 1, 2, {}, {0.0, 0.0}};
  for (std::size_t i = 0; i < 9; ++i) {
    k.weights.push_back(dy[i]);
    k.weights.push_back(dx[i]);
  }
  return k;
}

template <GridExpr T>
struct SobelEdges {
  T dy;
  T dx;
};

/// Vertical and horizontal Sobel responses at every grid point. Borders are
/// handled by reflection, so constant fields give zero edges everywhere.
template <GridExpr T>
SobelEdges<T> sobel_edges(const T& t) {
  if (value_of(t).shape().channels != 1) {
    fail(ErrorCode::shape_mismatch, "sobel_edges expects a single channel");
  }
  const T both = conv2d_fixed(pad_reflect(t, 1), sobel_kernel(), Padding::valid);
  return {channel(both, 0), channel(both, 1)};
}

}  // namespace gridloss

#endif  // GRIDLOSS_GRID_TENSOR_HPP
