#ifndef GRIDLOSS_DISCRETIZE_HPP
#define GRIDLOSS_DISCRETIZE_HPP

// Hard, soft and no discretization of confidence scores.

#include <cmath>
#include <string>
#include <type_traits>
#include <variant>

#include "json.hpp"

#include "gridloss/autodiff.hpp"
#include "gridloss/error.hpp"
#include "gridloss/grid_tensor.hpp"

namespace gridloss {

/// Threshold at `cutoff`: 1 where p > cutoff, else 0. Not differentiable.
struct HardMode {
  double cutoff = 0.5;
};

enum class SoftForm {
  /// S(c * (p - cutoff))
  centered,
  /// S(p), ignoring cutoff and c. This is what the categorical scores in the
  /// original Keras code apply when soft discretization is switched on.
  raw_sigmoid,
};

struct SoftMode {
  double cutoff = 0.5;
  double c = 1.0;
  SoftForm form = SoftForm::centered;
};

/// Scores are used as they are (quasi-probabilistic counting).
struct NoDiscretization {};

using DiscretizationMode = std::variant<NoDiscretization, HardMode, SoftMode>;

inline bool is_hard(const DiscretizationMode& m) {
  return std::holds_alternative<HardMode>(m);
}

inline void validate(const DiscretizationMode& mode) {
  auto check_cutoff = [](double cutoff) {
    if (!(cutoff > 0.0 && cutoff < 1.0)) {
      fail(ErrorCode::invalid_config, "cutoff must lie strictly inside (0, 1)");
    }
  };
  if (const auto* h = std::get_if<HardMode>(&mode)) check_cutoff(h->cutoff);
  if (const auto* s = std::get_if<SoftMode>(&mode)) {
    check_cutoff(s->cutoff);
    if (!(std::isfinite(s->c) && s->c > 0.0)) {
      fail(ErrorCode::invalid_config, "sigmoid steepness c must be finite and > 0");
    }
  }
}

template <std::floating_point S>
BasicGridTensor<S> hard_discretize(const BasicGridTensor<S>& p, double cutoff) {
  return greater(p, static_cast<S>(cutoff));
}

inline Var hard_discretize(const Var& p, double cutoff) {
  return p.tape()->record_blocked("hard_discretize",
                                  hard_discretize(p.value(), cutoff), {p});
}

template <GridExpr T>
T soft_discretize(const T& p, double cutoff, double c) {
  if (!(c > 0.0)) fail(ErrorCode::invalid_config, "sigmoid steepness c must be > 0");
  return sigmoid((p - cutoff) * c);
}

template <GridExpr T>
T discretize(const T& p, const DiscretizationMode& mode) {
  validate(mode);
  if (const auto* h = std::get_if<HardMode>(&mode)) {
    return hard_discretize(p, h->cutoff);
  }
  if (const auto* s = std::get_if<SoftMode>(&mode)) {
    if (s->form == SoftForm::raw_sigmoid) return sigmoid(p);
    return soft_discretize(p, s->cutoff, s->c);
  }
  return p;
}

/// Sum of the mode-transformed scores: an exact event count in hard mode,
/// an approximation in soft mode and the quasi-probabilistic sum otherwise.
template <GridExpr T>
T soft_count(const T& p, const DiscretizationMode& mode) {
  if (std::holds_alternative<NoDiscretization>(mode)) {
    for (double v : value_of(p).values()) {
      if (v < 0.0 || v > 1.0) {
        fail(ErrorCode::out_of_range,
             "scores must lie in [0, 1] when counted without discretization");
      }
    }
  }
  return sum_all(discretize(p, mode));
}

// ---------------------------------------------------------------------------
// JSON: {"mode": "hard"|"soft"|"none", "cutoff": x, "c": y,
//        "soft_form": "centered"|"raw_sigmoid"}

inline nlohmann::json to_json(const DiscretizationMode& mode) {
  nlohmann::json j;
  if (const auto* h = std::get_if<HardMode>(&mode)) {
    j = {{"mode", "hard"}, {"cutoff", h->cutoff}};
  } else if (const auto* s = std::get_if<SoftMode>(&mode)) {
    j = {{"mode", "soft"},
         {"cutoff", s->cutoff},
         {"c", s->c},
         {"soft_form", s->form == SoftForm::centered ? "centered" : "raw_sigmoid"}};
  } else {
    j = {{"mode", "none"}};
  }
  return j;
}

/// Parses a mode object. Missing fields take the values in `defaults` when
/// it has the same mode, otherwise cutoff 0.5 and c = 1.
inline DiscretizationMode discretization_from_json(
    const nlohmann::json& j, const DiscretizationMode& defaults = SoftMode{}) {
  if (!j.is_object()) fail(ErrorCode::parse_error, "discretization must be an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "mode" && key != "cutoff" && key != "c" && key != "soft_form") {
      fail(ErrorCode::parse_error, "unknown discretization field '" + key + "'");
    }
  }
  auto number = [&](const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) {
      fail(ErrorCode::parse_error, std::string("discretization field '") + key +
                                       "' must be a number");
    }
    return j[key].get<double>();
  };

  std::string name = "soft";
  if (std::holds_alternative<HardMode>(defaults)) name = "hard";
  if (std::holds_alternative<NoDiscretization>(defaults)) name = "none";
  if (j.contains("mode")) {
    if (!j["mode"].is_string()) fail(ErrorCode::parse_error, "mode must be a string");
    name = j["mode"].get<std::string>();
  }

  DiscretizationMode out;
  if (name == "hard") {
    HardMode h;
    if (const auto* d = std::get_if<HardMode>(&defaults)) h = *d;
    if (j.contains("c") || j.contains("soft_form")) {
      fail(ErrorCode::invalid_config, "hard mode takes only a cutoff");
    }
    h.cutoff = number("cutoff", h.cutoff);
    out = h;
  } else if (name == "soft") {
    SoftMode s;
    if (const auto* d = std::get_if<SoftMode>(&defaults)) s = *d;
    s.cutoff = number("cutoff", s.cutoff);
    s.c = number("c", s.c);
    if (j.contains("soft_form")) {
      const auto form = j["soft_form"].is_string() ? j["soft_form"].get<std::string>() : "";
      if (form == "centered") {
        s.form = SoftForm::centered;
      } else if (form == "raw_sigmoid") {
        s.form = SoftForm::raw_sigmoid;
      } else {
        fail(ErrorCode::invalid_config, "soft_form must be 'centered' or 'raw_sigmoid'");
      }
    }
    out = s;
  } else if (name == "none") {
    if (j.contains("cutoff") || j.contains("c") || j.contains("soft_form")) {
      fail(ErrorCode::invalid_config, "mode 'none' takes no parameters");
    }
    out = NoDiscretization{};
  } else {
    fail(ErrorCode::invalid_config, "unknown discretization mode '" + name + "'");
  }
  validate(out);
  return out;
}

}  // namespace gridloss

#endif  // GRIDLOSS_DISCRETIZE_HPP
