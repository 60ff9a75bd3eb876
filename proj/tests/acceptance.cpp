// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "gridloss/gridloss.hpp"
#include "gridloss_cli.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace gridloss;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Collects the first failure of a criterion as a short note.
struct Check {
  bool ok = true;
  std::string note;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      note = what;
    }
  }
  void near(double a, double b, double tol, const std::string& what) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": " << a << " vs " << b << " (tol " << tol << ")";
    expect(std::abs(a - b) <= tol, os.str());
  }
};

Check neighborhood_density() {
  Check c;
  const auto start = Clock::now();
  const auto [obs, fc] = testing::shifted_band_pair();
  const Window mask{testing::kPointMask, testing::kPointMask};
  const GridTensor o = average_pool2d(hard_discretize(obs, 0.5), mask);
  const GridTensor m = average_pool2d(hard_discretize(fc, 0.5), mask);
  const std::size_t r = testing::kPointRow - 2, col = testing::kPointCol - 2;
  c.expect(o.at(0, r, col, 0) == 3.0 / 25.0, "observed density at P is not 3/25");
  c.expect(m.at(0, r, col, 0) == 3.0 / 25.0, "forecast density at P is not 3/25");
  c.expect(o.at(0, r, col, 0) == 0.12, "density at P is not 0.12");
  const double contribution = (o.at(0, r, col, 0) - m.at(0, r, col, 0));
  c.expect(contribution * contribution == 0.0, "P contributes to MSE_n");
  c.expect(seconds_since(start) < 1.0, "took longer than 1 s");
  return c;
}

Check fss_identities() {
  Check c;
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const GridTensor t = testing::uniform(Shape{2, 8, 8, 1}, rng, 0, 1);
    c.near(fss_score(t, t, FssConfig{3, HardMode{0.5}, false}).item(), 1.0, 1e-7, "hard score");
    c.near(fss_score(t, t).item(), 1.0, 1e-7, "soft score");
    c.near(fss_loss(t, t).item(), 0.0, 1e-7, "soft loss on identical fields");
  }
  const GridTensor zero = GridTensor::zeros(Shape{2, 8, 8, 1});
  c.near(fss_loss(zero, zero).item(), 0.0, 1e-7, "soft loss on all-zero fields");
  c.near(fss_loss(zero, zero, FssConfig{3, NoDiscretization{}, false}).item(), 0.0, 1e-7,
         "raw loss on all-zero fields");
  return c;
}

Check fss_oracle() {
  Check c;
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const GridTensor t = testing::binary(Shape{1, 8, 8, 1}, rng, 0.3);
    const GridTensor p = testing::binary(Shape{1, 8, 8, 1}, rng, 0.3);
    for (std::size_t n : {1, 3, 5}) {
      c.near(fss_score(t, p, FssConfig{n, HardMode{0.5}, false}).item(),
             oracle::fss_hard(t, p, n, 0.5), 1e-12, "mask " + std::to_string(n));
    }
  }
  return c;
}

Check gradient_suite() {
  Check c;
  const auto start = Clock::now();
  const std::vector<std::string> losses = {
      "mse", "mse_per_pixel", "rmse_by_batch", "rmse_by_sample",
      "mse_weighted_exp", "mse_weighted_genexp", "dual_weighted_mse",
      "mse_zero_nonzero:w_zero=0.5,w_nonzero=2", "mse_with_sobel:sobel_weight=0.5",
      "mse_supplementary_weighted:w0=1,w1=3", "mse_fewer_misses",
      "csi.loss:mode=soft,c=10", "csi.loss",
      "iou.loss:mode=soft,c=10", "iou.loss",
      "dice.loss:mode=soft,c=10", "dice.loss",
      "tversky.loss:mode=soft,c=10,alpha=0.3,beta=0.7", "tversky.loss:alpha=0.3,beta=0.7",
      "fss.loss:mode=soft,c=10", "ssim.loss",
      "flux_loss_unconstrained", "flux_loss_constrained"};
  std::mt19937_64 rng(3);
  for (const std::string& text : losses) {
    const LossSpec spec = parse_loss_spec(text);
    const double tol = spec.name == "ssim.loss" ? 1e-4 : 1e-5;
    for (int trial = 0; trial < 10; ++trial) {
      const cli::CheckInputs in = cli::random_inputs(spec, rng);
      auto f = [&](const auto& x) {
        return auto_mean_reduce(evaluate_loss(spec, constant_like(x[0], in.truth), x[0])).value;
      };
      const GradCheckReport r = grad_check(text, f, {in.pred}, tol);
      c.expect(r.pass && !r.gradient_blocked(), text + ": " + r.to_json().dump());
    }
  }
  c.expect(seconds_since(start) < 60.0, "took longer than 60 s");
  return c;
}

Check counting_oracle() {
  Check c;
  CategoricalConfig hard{false, HardMode{0.5}};
  CategoricalConfig skewed = hard;
  skewed.alpha = 0.3;
  skewed.beta = 0.7;
  auto compare = [&](const GridTensor& t, const GridTensor& p) {
    const oracle::Contingency all = oracle::contingency(t, p, 0.5);
    c.near(csi(t, p, hard).item(), oracle::csi(all), 1e-12, "csi");
    const double batch = static_cast<double>(t.shape().batch);
    double iou_mean = 0, tv_mean = 0;
    for (std::size_t b = 0; b < t.shape().batch; ++b) {
      iou_mean += oracle::iou(t, p, 0.5, b, 0) / batch;
      const auto k = oracle::contingency(t, p, 0.5, b, 0);
      tv_mean += k.hits / (k.hits + 0.3 * k.false_alarms + 0.7 * k.misses + 1e-7) / batch;
    }
    c.near(iou(t, p, {0, 1}, hard).item(), iou_mean, 1e-12, "iou");
    c.near(tversky(t, p, {0, 1}, skewed).item(), tv_mean, 1e-12, "tversky");
  };
  // Every truth and prediction pattern on a 2x4 grid.
  auto pattern = [](unsigned bits, double off, double on) {
    std::vector<double> v(8);
    for (unsigned i = 0; i < 8; ++i) v[i] = (bits >> i) & 1u ? on : off;
    return GridTensor(Shape{1, 2, 4, 1}, std::move(v));
  };
  for (unsigned t = 0; t < 256; ++t) {
    const GridTensor truth = pattern(t, 0.0, 1.0);
    for (unsigned p = 0; p < 256; ++p) compare(truth, pattern(p, 0.2, 0.8));
  }
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    compare(testing::binary(Shape{1, 8, 8, 1}, rng, 0.3),
            testing::uniform(Shape{1, 8, 8, 1}, rng, 0, 1));
  }
  return c;
}

Check neutral_parameters() {
  Check c;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const GridTensor t = testing::uniform(Shape{2, 6, 6, 1}, rng, 0, 1);
    const GridTensor p = testing::uniform(Shape{2, 6, 6, 1}, rng, 0, 1);
    const double ref = mse(t, p).item();
    c.near(dual_weighted_mse(t, p, 0.0).item(), ref, 1e-12, "dual_weighted_mse(0)");
    c.near(mse_weighted_exp(t, p, 0.0).item(), ref, 1e-12, "mse_weighted_exp(0)");
    c.near(mse_weighted_genexp(t, p, 0.0).item(), ref, 1e-12, "mse_weighted_genexp(0)");
    // Truth with zeros so both branches are exercised.
    const GridTensor sparse = t * testing::binary(t.shape(), rng);
    c.near(mse_zero_nonzero(sparse, p, 1.0, 1.0).item(), mse(sparse, p).item(), 1e-12,
           "mse_zero_nonzero(1, 1)");
    c.near(mse_with_sobel(t, p, 0.0).item(), ref, 1e-12, "mse_with_sobel(0)");
    // Tversky averages per sample and CSI pools the batch; with one sample
    // the two coincide.
    const GridTensor bt = testing::binary(Shape{1, 6, 6, 1}, rng);
    const GridTensor p1 = slice_batch(p, 0, 1);
    for (const DiscretizationMode& mode :
         {DiscretizationMode{HardMode{0.5}}, DiscretizationMode{SoftMode{0.5, 10.0}},
          DiscretizationMode{NoDiscretization{}}}) {
      const CategoricalConfig cfg{false, mode};
      c.near(tversky(bt, p1, {0, 1}, cfg).item(), csi(bt, p1, cfg).item(), 1e-12,
             "tversky(1, 1) vs csi");
    }
  }
  return c;
}

Check weight_anchor() {
  Check c;
  const GridTensor t = GridTensor::full(Shape{1, 1, 1, 1}, 1.0);
  const GridTensor p = GridTensor::zeros(Shape{1, 1, 1, 1});
  // Unit squared error, so the loss equals the weight.
  const double weight = mse_weighted_exp(t, p, 5.0).item();
  c.near(weight, 148.41, 0.01, "weight at y_true = 1");
  c.near(weight, std::exp(5.0), 1e-12, "weight is e^5");
  return c;
}

Check physics_algebra() {
  Check c;
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const GridTensor t = testing::uniform(Shape{1, 1, 1, 2}, rng, 0, 1000);
    const GridTensor p = testing::uniform(Shape{1, 1, 1, 2}, rng, 0, 1000);
    const GridTensor d = t - p;
    const double net = mean_all(square(channel(d, 0) - channel(d, 1))).item();
    const double con = flux_loss_constrained(t, p).item();
    // Scaled by magnitude: both sides are sums of terms up to ~1e6.
    c.near(con - flux_loss_unconstrained(t, p).item(), net, 1e-12 * std::max(1.0, con),
           "constrained - unconstrained");
  }
  const GridTensor truth(Shape{1, 1, 1, 2}, {300, 100});
  const GridTensor pred(Shape{1, 1, 1, 2}, {290, 110});
  c.expect(flux_loss_constrained(truth, pred).item() - flux_loss_unconstrained(truth, pred).item() ==
               400.0,
           "compensating-bias net term is not 400");
  return c;
}

Check training_semantics() {
  Check c;
  {
    TrainConfig cfg;
    cfg.batch_size = 1;
    cfg.learning_rate = 0.1;
    cfg.phases = {{parse_loss_spec("mse"), 1}};
    const Dataset d{GridTensor::full(Shape{1, 1, 1, 1}, 1.0), GridTensor::full(Shape{1, 1, 1, 1}, 2.0)};
    c.near(train(ToyModel{}, d, cfg).model.w.item(), 0.4, 1e-12, "closed-form step");
  }
  std::mt19937_64 rng(7);
  const Dataset d{testing::uniform(Shape{4, 3, 3, 1}, rng, 0, 1),
                  testing::uniform(Shape{4, 3, 3, 1}, rng, 0, 2)};
  for (LossReporting mode : {LossReporting::stateless, LossReporting::stateful}) {
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.learning_rate = 0.1;
    cfg.l2_lambda = 0.2;
    cfg.loss_reporting = mode;
    cfg.phases = {{parse_loss_spec("mse"), 4}};
    ToyModel m;
    m.w = GridTensor::scalar(1.5);
    m.b = GridTensor::scalar(0.1);
    const TrainResult r = train(m, d, cfg);
    for (const EpochRecord& e : r.epochs) {
      c.near(e.combined_loss - e.l2_penalty, e.pure_loss, 1e-12, "combined - penalty");
      c.expect(e.batch_losses.size() == 2 && e.batch_losses[0] != e.batch_losses[1],
               "epoch does not have two unequal batches");
      const double expected = mode == LossReporting::stateless
                                  ? e.batch_losses.back()
                                  : (e.batch_losses[0] + e.batch_losses[1]) / 2;
      c.expect(e.loss_reported == expected, "reported loss does not follow " + to_string(mode));
    }
  }
  const auto start = Clock::now();
  const TrainResult demo = run_two_phase_demo(synthetic_convection({16, 12, 12, 2, 7}));
  c.expect(seconds_since(start) < 30.0, "two-phase demo took longer than 30 s");
  c.expect(demo.boundaries.size() == 1, "no phase boundary");
  if (!demo.boundaries.empty()) {
    c.expect(demo.boundaries[0].loss_next >= demo.boundaries[0].loss_previous,
             "phase-2 loss below phase-1 mse at the boundary");
  }
  return c;
}

Check reduction_order() {
  Check c;
  const GridTensor t = GridTensor::zeros(Shape{2, 1, 1, 1});
  const GridTensor p(Shape{2, 1, 1, 1}, {1.0, 3.0});
  c.near(rmse_by_batch(t, p).item(), std::sqrt(5.0), 1e-12, "rmse_by_batch");
  c.near(rmse_by_sample(t, p).item(), 2.0, 1e-12, "rmse_by_sample");
  return c;
}

Check nan_guard() {
  Check c;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto raises = [&](const std::function<void()>& f, const std::string& what) {
    try {
      f();
      c.expect(false, what + ": returned instead of raising");
    } catch (const Error& e) {
      c.expect(e.code() == ErrorCode::non_finite_operand, what + ": wrong error code");
    }
  };
  const GridTensor cond(Shape{1, 1, 3, 1}, {1, 0, 1});
  const GridTensor finite(Shape{1, 1, 3, 1}, {1, 2, 3});
  for (double bad : {nan, inf, -inf}) {
    const GridTensor a = GridTensor::unchecked(Shape{1, 1, 3, 1}, {1, bad, 3});
    const GridTensor b = GridTensor::unchecked(Shape{1, 1, 3, 1}, {bad, 2, bad});
    raises([&] { where(cond, finite, a); }, "tensor where, bad false branch");
    raises([&] { where(cond, b, finite); }, "tensor where, bad true branch");
    raises([&] { GridTensor(Shape{1, 1, 1, 1}, {bad}); }, "checked construction");
    Tape tape;
    const Var x = tape.parameter(finite);
    raises([&] { where(tape.constant(cond), x, tape.constant(a)); }, "Var where");
  }
  // A branch that overflows only where it is not selected.
  const GridTensor x(Shape{1, 1, 2, 1}, {1.0, 800.0});
  raises([&] { where(less(x, 100.0), exp(x), GridTensor::zeros(x.shape())); },
         "exp(x) guarded by x < 100");
  // A branch dividing by zero where unselected is rejected even earlier, at
  // the division itself.
  const GridTensor z(Shape{1, 1, 2, 1}, {0.0, 2.0});
  try {
    where(greater(z, 0.0), 1.0 / z, GridTensor::zeros(z.shape()));
    c.expect(false, "1/x guarded by x > 0: returned instead of raising");
  } catch (const Error& e) {
    c.expect(e.code() == ErrorCode::domain_error, "1/x guarded by x > 0: wrong error code");
  }
  return c;
}

Check ssim_identities() {
  Check c;
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const GridTensor x = testing::uniform(Shape{1, 16, 16, 1}, rng, 0, 1);
    const GridTensor y = testing::uniform(Shape{1, 16, 16, 1}, rng, 0, 1);
    c.near(ssim(x, x).item(), 1.0, 1e-12, "ssim(x, x)");
    c.near(ssim(x, y).item(), ssim(y, x).item(), 1e-12, "symmetry");
  }
  const SsimConfig d;
  c.expect(d.filter_size == 11 && d.filter_sigma == 1.5 && d.k1 == 0.01 && d.k2 == 0.03,
           "defaults are not (11, 1.5, 0.01, 0.03)");
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
      {"neighborhood density at P is 3/25 in both fields", neighborhood_density},
      {"FSS identities", fss_identities},
      {"FSS matches direct summation", fss_oracle},
      {"gradient suite", gradient_suite},
      {"hard-mode counting oracle", counting_oracle},
      {"neutral-parameter collapse", neutral_parameters},
      {"exponential weight anchor", weight_anchor},
      {"physics loss algebra", physics_algebra},
      {"training semantics", training_semantics},
      {"batch vs sample RMSE", reduction_order},
      {"NaN guard in where", nan_guard},
      {"SSIM identities and defaults", ssim_identities},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = Clock::now();
    Check c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.ok = false;
      c.note = std::string("exception: ") + e.what();
    }
    failures += c.ok ? 0 : 1;
    std::printf("%s %2zu %s (%.3f s)%s%s\n", c.ok ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), seconds_since(start), c.ok ? "" : ": ",
                c.note.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
