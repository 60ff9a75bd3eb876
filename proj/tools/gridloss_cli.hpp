#ifndef GRIDLOSS_TOOLS_GRIDLOSS_CLI_HPP
#define GRIDLOSS_TOOLS_GRIDLOSS_CLI_HPP

// Command-line front end. Every exit path writes JSON to `out`:
//   0  success
//   1  gradient check failed
//   2  usage, parse, shape or configuration error
//   3  gradient-blocked loss
//   4  training diverged

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gridloss/finite_diff.hpp"
#include "gridloss/grid_io.hpp"
#include "gridloss/loss_spec.hpp"
#include "gridloss/train_harness.hpp"

namespace gridloss::cli {

using nlohmann::json;

/// JSON text with every floating-point number written to 17 significant
/// digits. Non-finite numbers become null.
inline void dump17(const json& j, std::ostream& os) {
  switch (j.type()) {
    case json::value_t::object: {
      os << '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) os << ',';
        first = false;
        os << json(k).dump() << ':';
        dump17(v, os);
      }
      os << '}';
      break;
    }
    case json::value_t::array: {
      os << '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ',';
        dump17(j[i], os);
      }
      os << ']';
      break;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        os << "null";
        break;
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << buf;
      break;
    }
    default:
      os << j.dump();
  }
}

inline std::string dump17(const json& j) {
  std::ostringstream os;
  dump17(j, os);
  return os.str();
}

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::gradient_blocked_loss:
    case ErrorCode::hard_mode_as_loss:
      return 3;
    case ErrorCode::divergence_detected:
    case ErrorCode::non_finite_gradient:
      return 4;
    default:
      return 2;
  }
}

inline json error_json(std::string_view code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

// ---------------------------------------------------------------------------
// Loss parameter flags: every registered parameter name is also a flag,
// e.g. gamma_weight <-> --gamma-weight. A flag overrides that parameter in
// each requested loss that has it.

inline std::vector<std::string> parameter_names() {
  std::set<std::string> names;
  for (const LossInfo& info : loss_registry()) {
    for (const auto& [p, d] : info.params) names.emplace(p);
  }
  return {names.begin(), names.end()};
}

inline std::string flag_name(std::string p) {
  for (char& c : p) {
    if (c == '_') c = '-';
  }
  return "--" + p;
}

using ParamFlags = std::map<std::string, std::optional<double>>;

inline void add_param_flags(CLI::App& app, ParamFlags& flags) {
  for (const std::string& p : parameter_names()) {
    app.add_option(flag_name(p), flags[p], "override loss parameter " + p);
  }
}

inline LossSpec apply_param_flags(LossSpec spec, const ParamFlags& flags, std::set<std::string>& used) {
  for (WeightedLoss& t : spec.terms) t.spec = apply_param_flags(t.spec, flags, used);
  for (const auto& [p, v] : flags) {
    if (v && spec.params.contains(p)) {
      spec.params[p] = *v;
      used.insert(p);
    }
  }
  return spec.name == "combine" ? spec : normalize(std::move(spec));
}

inline std::vector<LossSpec> resolve_specs(const std::vector<std::string>& texts,
                                           const ParamFlags& flags) {
  std::vector<LossSpec> specs;
  std::set<std::string> used;
  for (const std::string& t : texts) specs.push_back(apply_param_flags(parse_loss_spec(t), flags, used));
  for (const auto& [p, v] : flags) {
    if (v && !used.contains(p)) {
      fail(ErrorCode::invalid_config, flag_name(p) + " does not apply to any requested loss");
    }
  }
  return specs;
}

// ---------------------------------------------------------------------------
// Random inputs for gradient checks, shaped for each loss family.

struct CheckInputs {
  GridTensor truth;
  GridTensor pred;
};

inline std::string input_family(const LossSpec& spec) {
  if (spec.name == "combine") return input_family(spec.terms.at(0).spec);
  const std::string base = split_loss_suffix(spec.name).first;
  if (base.starts_with("flux_loss")) return "flux";
  if (base == "ssim" || base == "fss" || base == "mse_supplementary_weighted") return base;
  if (base == "csi" || base == "iou" || base == "dice" || base == "tversky") return "categorical";
  return "regression";
}

inline const LossSpec& first_leaf(const LossSpec& spec) {
  return spec.name == "combine" ? first_leaf(spec.terms.at(0).spec) : spec;
}

inline CheckInputs random_inputs(const LossSpec& spec, std::mt19937_64& rng) {
  auto fill = [&](Shape s, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(s.size());
    for (double& x : v) x = d(rng);
    return GridTensor(s, std::move(v));
  };
  auto bits = [&](Shape s) {
    std::bernoulli_distribution d(0.4);
    std::vector<double> v(s.size());
    for (double& x : v) x = d(rng) ? 1.0 : 0.0;
    return GridTensor(s, std::move(v));
  };
  const LossSpec& leaf = first_leaf(spec);
  const std::string family = input_family(spec);
  if (family == "flux") {
    return {fill(Shape{3, 1, 1, 2}, 0, 500), fill(Shape{3, 1, 1, 2}, 0, 500)};
  }
  if (family == "ssim") {
    const double L = leaf.param("max_val");
    const auto n = std::max<std::size_t>(12, static_cast<std::size_t>(leaf.param("filter_size")) + 1);
    return {fill(Shape{1, n, n, 1}, 0.1 * L, 0.9 * L), fill(Shape{1, n, n, 1}, 0.1 * L, 0.9 * L)};
  }
  if (family == "fss") {
    const auto n = std::max<std::size_t>(8, static_cast<std::size_t>(leaf.param("mask_size")) + 3);
    return {fill(Shape{2, n, n, 1}, 0, 1), fill(Shape{2, n, n, 1}, 0, 1)};
  }
  if (family == "mse_supplementary_weighted") {
    const Shape s{2, 5, 5, 1};
    return {concat_channels(fill(s, 0, 1), bits(s)), fill(s, 0, 1)};
  }
  if (family == "categorical") {
    std::size_t ch = 1;
    if (leaf.params.contains("which_class")) {
      ch = leaf.param("all_classes") != 0 ? 2 : static_cast<std::size_t>(leaf.param("which_class")) + 1;
    }
    const Shape s{2, 6, 6, ch};
    return {bits(s), fill(s, 0.05, 0.95)};
  }
  const Shape s{2, 6, 6, 1};
  return {fill(s, 0, 1), fill(s, 0, 1)};
}

// ---------------------------------------------------------------------------
// Commands

struct Options {
  std::string truth, pred, config;
  std::vector<std::string> losses;
  std::string loss;
  std::size_t trials = 10;
  std::optional<double> rel_tol;
  std::vector<std::size_t> masks{1, 3, 5};
  std::string fss_mode = "hard";
  double fss_cutoff = 0.5;
  double fss_c = 10.0;
  bool fss_per_sample = false;
  ParamFlags eval_flags, check_flags;
};

inline int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
  const GridTensor truth = load_grid(o.truth);
  const GridTensor pred = load_grid(o.pred);
  const std::vector<LossSpec> specs = resolve_specs(o.losses, o.eval_flags);
  json result = json::object();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const std::string key = result.contains(specs[i].name) ? o.losses[i] : specs[i].name;
    const AutoMean<GridTensor> v = auto_mean_reduce(evaluate_loss(specs[i], truth, pred));
    if (v.reduced) {
      dump17({{"warning", "auto_mean"}, {"loss", key},
              {"message", "tensor-valued output reduced to its global mean"}},
             err);
      err << '\n';
    }
    result[key] = v.value.item();
  }
  dump17(result, out);
  out << '\n';
  return 0;
}

inline int cmd_gradcheck(const Options& o, std::uint64_t seed, std::ostream& out) {
  const LossSpec spec = resolve_specs({o.loss}, o.check_flags).at(0);
  if (auto op = blocking_op(spec)) {
    json e = error_json(code_name(ErrorCode::gradient_blocked_loss),
                        "loss '" + spec.name + "' is not differentiable");
    e["error"]["blocking_op"] = *op;
    dump17(e, out);
    out << '\n';
    return 3;
  }
  if (o.trials == 0) fail(ErrorCode::invalid_config, "--trials must be >= 1");
  const double rel_tol =
      o.rel_tol.value_or(input_family(spec) == "ssim" ? 1e-4 : 1e-5);
  std::mt19937_64 rng(seed);
  json trials = json::array();
  bool pass = true;
  double worst = 0;
  for (std::size_t t = 0; t < o.trials; ++t) {
    const CheckInputs in = random_inputs(spec, rng);
    auto f = [&](const auto& x) {
      return auto_mean_reduce(evaluate_loss(spec, constant_like(x[0], in.truth), x[0])).value;
    };
    const GradCheckReport r = grad_check(spec.name, f, {in.pred}, rel_tol);
    if (r.gradient_blocked()) {
      json e = error_json(code_name(ErrorCode::gradient_blocked_loss),
                          "loss '" + spec.name + "' is not differentiable");
      e["error"]["blocking_op"] = r.blocked_by;
      dump17(e, out);
      out << '\n';
      return 3;
    }
    json tj = r.to_json();
    tj["trial"] = t;
    trials.push_back(tj);
    pass = pass && r.pass;
    worst = std::max(worst, r.max_rel_err);
  }
  dump17({{"command", "gradcheck"}, {"loss", to_json(spec)}, {"trials", trials},
          {"rel_tol", rel_tol}, {"seed", seed}, {"max_rel_err", worst}, {"pass", pass}},
         out);
  out << '\n';
  return pass ? 0 : 1;
}

inline int cmd_train_demo(const Options& o, std::optional<std::uint64_t> seed, std::ostream& out) {
  std::ifstream in(o.config);
  if (!in) fail(ErrorCode::io_error, "cannot open '" + o.config + "'");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, o.config + ": " + e.what());
  }
  const TrainJob job = train_job_from_json(cfg, seed);
  const TrainResult r = train(job.model, job.data, job.config, [&](const json& line) {
    dump17(line, out);
    out << '\n';
  });
  dump17(summary_json(r, job.config), out);
  out << '\n';
  return 0;
}

inline int cmd_fss_sweep(const Options& o, std::ostream& out) {
  const GridTensor truth = load_grid(o.truth);
  const GridTensor pred = load_grid(o.pred);
  FssConfig cfg;
  cfg.per_sample = o.fss_per_sample;
  if (o.fss_mode == "hard") {
    cfg.discretization = HardMode{o.fss_cutoff};
  } else if (o.fss_mode == "soft") {
    cfg.discretization = SoftMode{o.fss_cutoff, o.fss_c};
  } else if (o.fss_mode == "none") {
    cfg.discretization = NoDiscretization{};
  } else {
    fail(ErrorCode::invalid_config, "--mode must be hard, soft or none");
  }
  validate(cfg.discretization);
  json scores = json::array();
  for (std::size_t n : o.masks) {
    cfg.mask_size = n;
    scores.push_back(fss_score(truth, pred, cfg).item());
  }
  dump17({{"command", "fss-sweep"}, {"masks", o.masks}, {"fss", scores},
          {"discretization", to_json(cfg.discretization)}, {"per_sample", cfg.per_sample}},
         out);
  out << '\n';
  return 0;
}

inline std::optional<std::uint64_t> parse_seed(const std::optional<std::string>& text) {
  if (!text) return std::nullopt;
  std::uint64_t v = 0;
  std::size_t used = 0;
  try {
    if (!text->empty() && (*text)[0] != '-') v = std::stoull(*text, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text->size()) {
    fail(ErrorCode::parse_error, "GRIDLOSS_SEED must be a non-negative integer");
  }
  return v;
}

/// `args` excludes the program name. `seed_env` is the value of
/// GRIDLOSS_SEED, if set.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                   const std::optional<std::string>& seed_env = std::nullopt) {
  CLI::App app{"Differentiable losses and metrics for gridded fields", "gridloss"};
  app.require_subcommand(1);
  Options o;

  CLI::App* eval = app.add_subcommand("evaluate", "evaluate losses between two grid files");
  eval->add_option("--truth", o.truth, "truth grid (GRD1 or CSV)")->required();
  eval->add_option("--pred", o.pred, "prediction grid (GRD1 or CSV)")->required();
  eval->add_option("--loss", o.losses, "loss spec: JSON or name:key=val,...")->required();
  add_param_flags(*eval, o.eval_flags);

  CLI::App* check = app.add_subcommand("gradcheck", "compare reverse-mode and finite-difference gradients");
  check->add_option("--loss", o.loss, "loss spec")->required();
  check->add_option("--trials", o.trials, "random points to check");
  check->add_option("--rel-tol", o.rel_tol, "relative tolerance (1e-5, or 1e-4 for ssim)");
  add_param_flags(*check, o.check_flags);

  CLI::App* demo = app.add_subcommand("train-demo", "train the toy model from a JSON config");
  demo->add_option("--config", o.config, "training config")->required();

  CLI::App* sweep = app.add_subcommand("fss-sweep", "FSS over several mask sizes");
  sweep->add_option("--truth", o.truth)->required();
  sweep->add_option("--pred", o.pred)->required();
  sweep->add_option("--masks", o.masks, "comma-separated mask sizes")->delimiter(',');
  sweep->add_option("--mode", o.fss_mode, "hard, soft or none");
  sweep->add_option("--cutoff", o.fss_cutoff);
  sweep->add_option("--c", o.fss_c, "soft-mode sigmoid steepness");
  sweep->add_flag("--per-sample", o.fss_per_sample);

  std::vector<std::string> argv_store{"gridloss"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    dump17({{"usage", app.help()}}, out);
    out << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    dump17(error_json("USAGE_ERROR", e.what()), out);
    out << '\n';
    return 2;
  }

  try {
    const std::optional<std::uint64_t> seed = parse_seed(seed_env);
    if (eval->parsed()) return cmd_evaluate(o, out, err);
    if (check->parsed()) return cmd_gradcheck(o, seed.value_or(std::random_device{}()), out);
    if (demo->parsed()) return cmd_train_demo(o, seed, out);
    return cmd_fss_sweep(o, out);
  } catch (const Error& e) {
    dump17(error_json(code_name(e.code()), e.what()), out);
    out << '\n';
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    dump17(error_json(code_name(ErrorCode::parse_error), e.what()), out);
    out << '\n';
    return 2;
  } catch (const std::exception& e) {
    dump17(error_json("INTERNAL_ERROR", e.what()), out);
    out << '\n';
    return 2;
  }
}

}  // namespace gridloss::cli

#endif  // GRIDLOSS_TOOLS_GRIDLOSS_CLI_HPP
