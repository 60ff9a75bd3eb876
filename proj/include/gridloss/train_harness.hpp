#ifndef GRIDLOSS_TRAIN_HARNESS_HPP
#define GRIDLOSS_TRAIN_HARNESS_HPP

// A toy trainer: a per-pixel (or scalar) affine model fitted by plain
// gradient descent on contiguous batches, with auto-mean reduction, an L2
// penalty on the weights, stateless or stateful loss reporting, metric
// tracking and multi-phase loss schedules.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gridloss/autodiff.hpp"
#include "gridloss/error.hpp"
#include "gridloss/grid_io.hpp"
#include "gridloss/grid_tensor.hpp"
#include "gridloss/loss_spec.hpp"

namespace gridloss {

inline constexpr std::size_t kMaxToyParameters = 1000;

// ---------------------------------------------------------------------------
// Model

struct SmoothingConfig {
  std::size_t size = 3;
  double sigma = 1.0;
};

/// y_hat = w * smooth(x) + b, elementwise. `w` and `b` are either scalars or
/// one value per grid cell and channel (batch 1, tiled over the batch).
struct ToyModel {
  GridTensor w = GridTensor::scalar(0.0);
  std::optional<GridTensor> b;
  std::optional<SmoothingConfig> smoothing;

  std::size_t parameter_count() const { return w.size() + (b ? b->size() : 0); }
};

inline void validate(const ToyModel& m) {
  for (const GridTensor* p : {&m.w, m.b ? &*m.b : nullptr}) {
    if (p && !p->shape().is_scalar() && p->shape().batch != 1) {
      fail(ErrorCode::invalid_config, "per-pixel parameters must have batch size 1");
    }
  }
  if (m.parameter_count() >= kMaxToyParameters) {
    fail(ErrorCode::invalid_config, "toy model has " + std::to_string(m.parameter_count()) +
                                        " parameters, limit is " +
                                        std::to_string(kMaxToyParameters - 1));
  }
  if (m.smoothing) gaussian_window(m.smoothing->size, m.smoothing->sigma);
}

/// The fixed smoothing layer, applied channel by channel with same padding.
inline GridTensor model_input(const ToyModel& m, const GridTensor& x) {
  if (!m.smoothing) return x;
  const Kernel k = gaussian_window(m.smoothing->size, m.smoothing->sigma);
  std::vector<GridTensor> parts;
  for (std::size_t ch = 0; ch < x.shape().channels; ++ch) {
    parts.push_back(conv2d_fixed(channel(x, ch), k, Padding::same));
  }
  return concat_channels(std::span<const GridTensor>(parts));
}

namespace detail {

template <GridExpr T>
T per_sample(const T& param, std::size_t batch) {
  return param.shape().is_scalar() ? param : tile_batch(param, batch);
}

}  // namespace detail

/// Affine map on an already smoothed input.
template <GridExpr T>
T affine(const T& w, const std::optional<T>& b, const GridTensor& input) {
  const std::size_t n = input.shape().batch;
  T y = detail::per_sample(w, n) * constant_like(w, input);
  if (b) y = y + detail::per_sample(*b, n);
  return y;
}

inline GridTensor predict(const ToyModel& m, const GridTensor& x) {
  return affine<GridTensor>(m.w, m.b, model_input(m, x));
}

// ---------------------------------------------------------------------------
// Data

struct Dataset {
  GridTensor x;
  GridTensor y;

  std::size_t size() const { return x.shape().batch; }
};

inline void validate(const Dataset& d) {
  if (d.x.shape().batch != d.y.shape().batch) {
    fail(ErrorCode::shape_mismatch, "x and y hold different numbers of samples");
  }
}

struct ConvectionOptions {
  std::size_t samples = 16;
  std::size_t rows = 12;
  std::size_t cols = 12;
  std::size_t max_blobs = 2;
  std::uint64_t seed = 0;
};

/**
 * Sparse convection-like toy data. x holds a few Gaussian blobs on an empty
 * background; y marks the cells where x exceeds 0.5, so a threshold on x
 * separates the classes exactly.
 */
inline Dataset synthetic_convection(const ConvectionOptions& o) {
  if (o.samples == 0 || o.rows == 0 || o.cols == 0) {
    fail(ErrorCode::invalid_config, "synthetic_convection needs non-empty dimensions");
  }
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Shape s{o.samples, o.rows, o.cols, 1};
  std::vector<double> x(s.size(), 0.0), y(s.size(), 0.0);
  for (std::size_t b = 0; b < o.samples; ++b) {
    const auto blobs = static_cast<std::size_t>(unit(rng) * static_cast<double>(o.max_blobs + 1));
    for (std::size_t k = 0; k < std::min(blobs, o.max_blobs); ++k) {
      const double cr = unit(rng) * static_cast<double>(o.rows - 1);
      const double cc = unit(rng) * static_cast<double>(o.cols - 1);
      const double amp = 0.6 + 0.4 * unit(rng);
      const double width = 0.8 + 1.2 * unit(rng);
      for (std::size_t r = 0; r < o.rows; ++r)
        for (std::size_t c = 0; c < o.cols; ++c) {
          const double dr = static_cast<double>(r) - cr, dc = static_cast<double>(c) - cc;
          double& v = x[(b * o.rows + r) * o.cols + c];
          v = std::max(v, amp * std::exp(-(dr * dr + dc * dc) / (2 * width * width)));
        }
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.5 ? 1.0 : 0.0;
  return {GridTensor(s, std::move(x)), GridTensor(s, std::move(y))};
}

// ---------------------------------------------------------------------------
// Configuration

enum class LossReporting { stateless, stateful };

struct Phase {
  LossSpec loss;
  std::size_t epochs = 1;
};

struct TrainConfig {
  std::size_t batch_size = 1;
  double learning_rate = 0.01;
  double l2_lambda = 0.0;
  LossReporting loss_reporting = LossReporting::stateful;
  std::vector<LossSpec> metrics;
  std::vector<Phase> phases;
};

inline std::string metric_label(const LossSpec& spec) { return spec.name; }

inline void validate(const TrainConfig& cfg, std::size_t dataset_size) {
  if (cfg.phases.empty()) fail(ErrorCode::invalid_config, "at least one phase is required");
  if (cfg.batch_size == 0 || cfg.batch_size > dataset_size) {
    fail(ErrorCode::invalid_config, "batch_size must be in [1, " +
                                        std::to_string(dataset_size) + "]");
  }
  if (!std::isfinite(cfg.learning_rate) || cfg.learning_rate < 0) {
    fail(ErrorCode::invalid_config, "learning_rate must be finite and >= 0");
  }
  if (!std::isfinite(cfg.l2_lambda) || cfg.l2_lambda < 0) {
    fail(ErrorCode::invalid_config, "l2_lambda must be finite and >= 0");
  }
  std::set<std::string> labels;
  for (const LossSpec& m : cfg.metrics) {
    if (!labels.insert(metric_label(m)).second) {
      fail(ErrorCode::invalid_config, "metric '" + metric_label(m) + "' listed twice");
    }
  }
}

inline std::string to_string(LossReporting r) {
  return r == LossReporting::stateless ? "stateless" : "stateful";
}

// ---------------------------------------------------------------------------
// Reports

struct EpochRecord {
  std::size_t phase = 0;
  std::size_t epoch = 0;  ///< 1-based within the phase
  std::string loss;
  /// Per the reporting mode: last batch (stateless) or batch mean (stateful).
  double loss_reported = 0;
  double combined_loss = 0;
  double l2_penalty = 0;
  double pure_loss = 0;
  /// Combined (loss + penalty) value of every batch, in order.
  std::vector<double> batch_losses;
  std::vector<double> batch_pure_losses;
  std::vector<double> batch_penalties;
  /// Whether the loss output was a tensor that auto-mean reduced.
  bool auto_mean_applied = false;
  std::vector<std::pair<std::string, double>> metrics;
};

/// Between two phases: both losses on the full data at the same parameters.
struct PhaseBoundary {
  std::size_t from_phase = 0;
  std::size_t to_phase = 0;
  std::string from_loss;
  std::string to_loss;
  double loss_previous = 0;
  double loss_next = 0;
};

struct TrainResult {
  ToyModel model;
  std::vector<EpochRecord> epochs;
  std::vector<PhaseBoundary> boundaries;
};

inline nlohmann::json to_json(const EpochRecord& r, LossReporting mode) {
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [k, v] : r.metrics) m[k] = v;
  return {{"event", "epoch"},
          {"phase", r.phase},
          {"epoch", r.epoch},
          {"loss_name", r.loss},
          {"loss_reporting", to_string(mode)},
          {"loss_reported", r.loss_reported},
          {"combined_loss", r.combined_loss},
          {"l2_penalty", r.l2_penalty},
          {"loss", r.pure_loss},
          {"batch_losses", r.batch_losses},
          {"auto_mean_applied", r.auto_mean_applied},
          {"metrics", m}};
}

inline nlohmann::json to_json(const PhaseBoundary& b) {
  return {{"event", "phase_boundary"},
          {"from_phase", b.from_phase},
          {"to_phase", b.to_phase},
          {"from_loss", b.from_loss},
          {"to_loss", b.to_loss},
          {"loss_previous", b.loss_previous},
          {"loss_next", b.loss_next},
          {"parameters_reset", false},
          {"optimizer_state_reset", true}};
}

inline nlohmann::json to_json(const GridTensor& t) {
  const Shape s = t.shape();
  return {{"shape", {s.batch, s.rows, s.cols, s.channels}}, {"values", t.values()}};
}

inline nlohmann::json summary_json(const TrainResult& r, const TrainConfig& cfg) {
  nlohmann::json phases = nlohmann::json::array();
  for (std::size_t i = 0; i < cfg.phases.size(); ++i) {
    phases.push_back({{"phase", i}, {"loss", to_json(cfg.phases[i].loss)},
                      {"epochs", cfg.phases[i].epochs}});
  }
  nlohmann::json params = {{"w", to_json(r.model.w)}};
  params["b"] = r.model.b ? to_json(*r.model.b) : nlohmann::json(nullptr);
  nlohmann::json out = {{"event", "summary"},
                        {"phases", phases},
                        {"epochs_run", r.epochs.size()},
                        {"parameters", params}};
  out["final_loss"] = r.epochs.empty() ? nlohmann::json(nullptr)
                                       : nlohmann::json(r.epochs.back().loss_reported);
  return out;
}

// ---------------------------------------------------------------------------
// Training

/// Loss of the full dataset under `spec`, auto-mean reduced, without penalty.
inline double full_data_loss(const ToyModel& m, const Dataset& d, const LossSpec& spec) {
  return auto_mean_reduce(evaluate_loss(spec, d.y, predict(m, d.x))).value.item();
}

struct BatchGradient {
  double loss = 0;      ///< pure loss, auto-mean reduced
  double penalty = 0;   ///< l2_lambda * sum(w^2)
  double combined = 0;  ///< loss + penalty
  bool auto_mean_applied = false;
  GridTensor grad_w;
  std::optional<GridTensor> grad_b;
};

/// Forward and backward pass over one batch. Gradients of the batch mean.
inline BatchGradient batch_gradient(const ToyModel& m, const GridTensor& x, const GridTensor& y,
                                    const LossSpec& spec, double l2_lambda) {
  Tape tape;
  const Var w = tape.parameter(m.w);
  std::optional<Var> b;
  if (m.b) b = tape.parameter(*m.b);
  const Var y_hat = affine<Var>(w, b, model_input(m, x));
  const AutoMean<Var> loss = auto_mean_reduce(evaluate_loss(spec, tape.constant(y), y_hat));
  const Var penalty = sum_all(square(w)) * l2_lambda;
  const Var combined = loss.value + penalty;
  if (!std::isfinite(combined.value().item())) {
    fail(ErrorCode::divergence_detected, "loss '" + spec.name + "' became non-finite");
  }
  GradientSet g;
  try {
    g = backward(tape, combined);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::non_finite_gradient) throw;
    fail(ErrorCode::divergence_detected, std::string(e.what()));
  }
  if (g.gradient_blocked()) {
    fail(ErrorCode::gradient_blocked_loss,
         "loss '" + spec.name + "' is not differentiable: blocked by " + g.blocked_by);
  }
  BatchGradient out{loss.value.value().item(), penalty.value().item(), combined.value().item(),
                    loss.reduced, g[w], std::nullopt};
  if (b) out.grad_b = g[*b];
  return out;
}

using ReportSink = std::function<void(const nlohmann::json&)>;

namespace detail {

inline void require_differentiable(const LossSpec& spec) {
  if (auto op = blocking_op(spec)) {
    fail(ErrorCode::gradient_blocked_loss,
         "loss '" + spec.name + "' is not differentiable: blocked by " + *op);
  }
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

/**
 * Runs every phase in order without resetting parameters. Each batch is a
 * contiguous slice of the data (the last one may be shorter). Metrics are
 * evaluated on the full dataset after each epoch; they never include the
 * penalty. `sink`, if set, receives each epoch record and phase marker as
 * it is produced.
 */
inline TrainResult train(ToyModel model, const Dataset& data, const TrainConfig& cfg,
                         const ReportSink& sink = {}) {
  validate(model);
  validate(data);
  validate(cfg, data.size());
  for (const Phase& ph : cfg.phases) detail::require_differentiable(ph.loss);

  TrainResult result;
  const std::size_t n = data.size();
  for (std::size_t p = 0; p < cfg.phases.size(); ++p) {
    const Phase& phase = cfg.phases[p];
    if (p > 0) {
      PhaseBoundary b{p - 1, p, cfg.phases[p - 1].loss.name, phase.loss.name,
                      full_data_loss(model, data, cfg.phases[p - 1].loss),
                      full_data_loss(model, data, phase.loss)};
      if (sink) sink(to_json(b));
      result.boundaries.push_back(std::move(b));
    }
    for (std::size_t e = 1; e <= phase.epochs; ++e) {
      EpochRecord rec;
      rec.phase = p;
      rec.epoch = e;
      rec.loss = phase.loss.name;
      for (std::size_t start = 0; start < n; start += cfg.batch_size) {
        const std::size_t end = std::min(n, start + cfg.batch_size);
        const BatchGradient g = batch_gradient(model, slice_batch(data.x, start, end),
                                               slice_batch(data.y, start, end), phase.loss,
                                               cfg.l2_lambda);
        model.w = model.w - g.grad_w * cfg.learning_rate;
        if (model.b) model.b = *model.b - *g.grad_b * cfg.learning_rate;
        if (!model.w.all_finite() || (model.b && !model.b->all_finite())) {
          fail(ErrorCode::divergence_detected, "parameters became non-finite");
        }
        rec.batch_losses.push_back(g.combined);
        rec.batch_pure_losses.push_back(g.loss);
        rec.batch_penalties.push_back(g.penalty);
        rec.auto_mean_applied = rec.auto_mean_applied || g.auto_mean_applied;
      }
      const bool last = cfg.loss_reporting == LossReporting::stateless;
      auto pick = [&](const std::vector<double>& v) {
        return last ? v.back() : detail::mean_of(v);
      };
      rec.combined_loss = pick(rec.batch_losses);
      rec.pure_loss = pick(rec.batch_pure_losses);
      rec.l2_penalty = pick(rec.batch_penalties);
      rec.loss_reported = rec.combined_loss;
      const GridTensor y_hat = predict(model, data.x);
      for (const LossSpec& m : cfg.metrics) {
        rec.metrics.emplace_back(metric_label(m),
                                 auto_mean_reduce(evaluate_loss(m, data.y, y_hat)).value.item());
      }
      if (sink) sink(to_json(rec, cfg.loss_reporting));
      result.epochs.push_back(std::move(rec));
    }
  }
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Two-phase demo

struct TwoPhaseOptions {
  std::size_t phase1_epochs = 30;
  std::size_t phase2_epochs = 30;
  std::size_t batch_size = 8;
  double learning_rate = 0.5;
  double l2_lambda = 0.0;
};

inline TrainConfig two_phase_config(const TwoPhaseOptions& o) {
  TrainConfig cfg;
  cfg.batch_size = o.batch_size;
  cfg.learning_rate = o.learning_rate;
  cfg.l2_lambda = o.l2_lambda;
  cfg.phases = {{parse_loss_spec("mse"), o.phase1_epochs},
                {parse_loss_spec("mse_fewer_misses"), o.phase2_epochs}};
  for (const char* m : {"mse", "count_miss", "count_true", "count_pred", "count_overlap"}) {
    cfg.metrics.push_back(parse_loss_spec(m));
  }
  cfg.metrics.push_back(parse_loss_spec("csi:mode=hard,cutoff=0.5"));
  return cfg;
}

/// Phase 1 fits with plain MSE; phase 2 continues from the same parameters
/// with the miss-penalizing loss.
inline TrainResult run_two_phase_demo(const Dataset& data, const TwoPhaseOptions& o = {},
                                      const ReportSink& sink = {}) {
  ToyModel model;
  model.w = GridTensor::scalar(0.0);
  model.b = GridTensor::scalar(0.0);
  return train(std::move(model), data, two_phase_config(o), sink);
}

// ---------------------------------------------------------------------------
// JSON configuration
//
// {
//   "batch_size": 4, "learning_rate": 0.1, "l2_lambda": 0,
//   "loss_reporting": "stateless" | "stateful",
//   "metrics": [SPEC, ...],
//   "phases": [{"loss": SPEC, "epochs": 3}, ...]   (or "loss" + "epochs"),
//   "model": {"weights": "scalar" | "per_pixel", "bias": true, "init_w": 0,
//             "init_b": 0, "smoothing": {"size": 3, "sigma": 1}},
//   "data": {"x": [...], "y": [...], "shape": [B, R, C, Ch]}
//        or {"x_path": F, "y_path": F}
//        or {"synthetic_convection": {"samples": 16, "rows": 12, "cols": 12,
//                                     "max_blobs": 2, "seed": 0}}
// }

struct TrainJob {
  ToyModel model;
  Dataset data;
  TrainConfig config;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::invalid_config, where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) fail(ErrorCode::invalid_config, "unknown field '" + k + "' in " + where);
  }
}

inline double get_number(const nlohmann::json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) fail(ErrorCode::invalid_config, "'" + key + "' must be a number");
  return j[key].get<double>();
}

inline std::size_t get_count(const nlohmann::json& j, const std::string& key,
                             std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_unsigned()) {
    fail(ErrorCode::invalid_config, "'" + key + "' must be a non-negative integer");
  }
  return j[key].get<std::size_t>();
}

inline GridTensor inline_tensor(const nlohmann::json& values, const Shape& s,
                                const std::string& key) {
  if (!values.is_array()) fail(ErrorCode::invalid_config, "'" + key + "' must be an array");
  std::vector<double> v;
  for (const auto& x : values) {
    if (!x.is_number()) fail(ErrorCode::invalid_config, "'" + key + "' must hold numbers");
    v.push_back(x.get<double>());
  }
  if (v.size() != s.size()) {
    fail(ErrorCode::shape_mismatch, "'" + key + "' has " + std::to_string(v.size()) +
                                        " values for shape " + s.str());
  }
  return GridTensor(s, std::move(v));
}

inline Dataset dataset_from_json(const nlohmann::json& j, std::optional<std::uint64_t> seed) {
  check_keys(j, {"x", "y", "shape", "x_path", "y_path", "synthetic_convection"}, "data");
  if (j.contains("synthetic_convection")) {
    const nlohmann::json& s = j["synthetic_convection"];
    check_keys(s, {"samples", "rows", "cols", "max_blobs", "seed"}, "synthetic_convection");
    ConvectionOptions o;
    o.samples = get_count(s, "samples", o.samples);
    o.rows = get_count(s, "rows", o.rows);
    o.cols = get_count(s, "cols", o.cols);
    o.max_blobs = get_count(s, "max_blobs", o.max_blobs);
    o.seed = seed.value_or(get_count(s, "seed", 0));
    return synthetic_convection(o);
  }
  if (j.contains("x_path") || j.contains("y_path")) {
    if (!j.contains("x_path") || !j.contains("y_path")) {
      fail(ErrorCode::invalid_config, "data needs both x_path and y_path");
    }
    return {load_grid(j["x_path"].get<std::string>()), load_grid(j["y_path"].get<std::string>())};
  }
  if (!j.contains("x") || !j.contains("y") || !j.contains("shape")) {
    fail(ErrorCode::invalid_config, "data needs x, y and shape, files, or synthetic_convection");
  }
  const auto dims = j["shape"].get<std::vector<std::size_t>>();
  if (dims.size() != 4) fail(ErrorCode::invalid_config, "shape must have 4 entries");
  const Shape s{dims[0], dims[1], dims[2], dims[3]};
  return {inline_tensor(j["x"], s, "x"), inline_tensor(j["y"], s, "y")};
}

inline ToyModel model_from_json(const nlohmann::json& j, const Shape& sample) {
  check_keys(j, {"weights", "bias", "init_w", "init_b", "smoothing"}, "model");
  ToyModel m;
  const std::string kind = j.value("weights", "scalar");
  Shape ps{};
  if (kind == "per_pixel") {
    ps = Shape{1, sample.rows, sample.cols, sample.channels};
  } else if (kind != "scalar") {
    fail(ErrorCode::invalid_config, "model.weights must be 'scalar' or 'per_pixel'");
  }
  m.w = GridTensor::full(ps, get_number(j, "init_w", 0.0));
  if (j.contains("bias") && !j["bias"].is_boolean()) {
    fail(ErrorCode::invalid_config, "model.bias must be a boolean");
  }
  if (j.value("bias", false)) m.b = GridTensor::full(ps, get_number(j, "init_b", 0.0));
  if (j.contains("smoothing") && !j["smoothing"].is_null()) {
    check_keys(j["smoothing"], {"size", "sigma"}, "model.smoothing");
    m.smoothing = SmoothingConfig{get_count(j["smoothing"], "size", 3),
                                  get_number(j["smoothing"], "sigma", 1.0)};
  }
  return m;
}

}  // namespace detail

/// `seed`, when given, overrides any seed in the configuration.
inline TrainJob train_job_from_json(const nlohmann::json& j,
                                    std::optional<std::uint64_t> seed = std::nullopt) {
  using detail::check_keys;
  check_keys(j, {"batch_size", "learning_rate", "l2_lambda", "loss_reporting", "metrics",
                 "phases", "loss", "epochs", "model", "data"},
             "train config");
  TrainJob job;
  if (!j.contains("data")) fail(ErrorCode::invalid_config, "train config needs 'data'");
  job.data = detail::dataset_from_json(j["data"], seed);
  validate(job.data);
  job.model = detail::model_from_json(j.value("model", nlohmann::json::object()),
                                      job.data.x.shape());

  TrainConfig& c = job.config;
  c.batch_size = detail::get_count(j, "batch_size", job.data.size());
  c.learning_rate = detail::get_number(j, "learning_rate", c.learning_rate);
  c.l2_lambda = detail::get_number(j, "l2_lambda", c.l2_lambda);
  const std::string mode = j.value("loss_reporting", "stateful");
  if (mode == "stateless") {
    c.loss_reporting = LossReporting::stateless;
  } else if (mode != "stateful") {
    fail(ErrorCode::invalid_config, "loss_reporting must be 'stateless' or 'stateful'");
  }
  for (const auto& m : j.value("metrics", nlohmann::json::array())) {
    c.metrics.push_back(loss_spec_from_json(m));
  }
  if (j.contains("phases")) {
    if (j.contains("loss") || j.contains("epochs")) {
      fail(ErrorCode::invalid_config, "give either 'phases' or 'loss' and 'epochs'");
    }
    for (const auto& ph : j["phases"]) {
      check_keys(ph, {"loss", "epochs"}, "phase");
      if (!ph.contains("loss")) fail(ErrorCode::invalid_config, "phase needs 'loss'");
      c.phases.push_back({loss_spec_from_json(ph["loss"]), detail::get_count(ph, "epochs", 1)});
    }
  } else if (j.contains("loss")) {
    c.phases.push_back({loss_spec_from_json(j["loss"]), detail::get_count(j, "epochs", 1)});
  }
  validate(job.model);
  validate(job.config, job.data.size());
  return job;
}

}  // namespace gridloss

#endif  // GRIDLOSS_TRAIN_HARNESS_HPP
