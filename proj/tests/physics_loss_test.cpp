#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gridloss/finite_diff.hpp"
#include "gridloss/physics_loss.hpp"
#include "test_util.hpp"

namespace gridloss {
namespace {

GridTensor flux(double down, double up) {
  return GridTensor(Shape{1, 1, 1, 2}, {down, up});
}

TEST(NetFlux, Examples) {
  EXPECT_EQ(net_flux(flux(100, 100)).item(), 0.0);
  EXPECT_EQ(net_flux(flux(300, 100)).item(), 200.0);
  std::mt19937_64 rng(51);
  const GridTensor a = testing::uniform(Shape{4, 1, 1, 2}, rng, 0, 500);
  const GridTensor b = testing::uniform(Shape{4, 1, 1, 2}, rng, 0, 500);
  EXPECT_LT(testing::max_abs_diff(net_flux(a + b), net_flux(a) + net_flux(b)), 1e-12);
  EXPECT_THROW(net_flux(GridTensor::zeros(Shape{1, 2, 1, 2})), Error);
}

TEST(FluxLoss, Examples) {
  const GridTensor truth = flux(300, 100);
  EXPECT_EQ(flux_loss_unconstrained(truth, truth).item(), 0.0);
  EXPECT_EQ(flux_loss_constrained(truth, truth).item(), 0.0);
  // Down over-predicted by 10 and up under-predicted by 10: the net error
  // compounds.
  const GridTensor compounding = flux(290, 110);
  EXPECT_EQ(flux_loss_unconstrained(truth, compounding).item(), 200.0);
  EXPECT_EQ(flux_loss_constrained(truth, compounding).item(), 600.0);
  // Equal errors on both components cancel in the net term.
  const GridTensor compensating = flux(290, 90);
  EXPECT_EQ(flux_loss_constrained(truth, compensating).item(), 200.0);
}

TEST(FluxLoss, ConstrainedAddsTheNetTerm) {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 200; ++trial) {
    const GridTensor t = testing::uniform(Shape{5, 1, 1, 2}, rng, 0, 1000);
    const GridTensor p = t + testing::uniform(Shape{5, 1, 1, 2}, rng, -50, 50);
    const GridTensor d = t - p;
    const double net = mean_all(square(channel(d, 0) - channel(d, 1))).item();
    const double constrained = flux_loss_constrained(t, p).item();
    const double diff = constrained - flux_loss_unconstrained(t, p).item();
    EXPECT_LE(std::abs(diff - net), 1e-12 * std::max(1.0, constrained));
  }
}

TEST(FluxLoss, ConstraintSteepensCompensatingErrors) {
  const GridTensor truth = flux(300, 100);
  auto grad_down = [&](auto loss) {
    Tape tape;
    const Var p = tape.parameter(flux(310, 90));
    return backward(tape, loss(tape.constant(truth), p))[p][0];
  };
  const double g_con = grad_down([](const Var& t, const Var& p) { return flux_loss_constrained(t, p); });
  const double g_unc = grad_down([](const Var& t, const Var& p) { return flux_loss_unconstrained(t, p); });
  EXPECT_GT(std::abs(g_con), std::abs(g_unc));
  EXPECT_EQ(g_unc, 20.0);
  EXPECT_EQ(g_con, 60.0);
}

TEST(FluxLoss, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    const GridTensor t = testing::uniform(Shape{3, 1, 1, 2}, rng, 0, 400);
    const GridTensor p = testing::uniform(Shape{3, 1, 1, 2}, rng, 0, 400);
    auto con = [&](const auto& x) { return flux_loss_constrained(constant_like(x[0], t), x[0]); };
    auto unc = [&](const auto& x) { return flux_loss_unconstrained(constant_like(x[0], t), x[0]); };
    EXPECT_TRUE(grad_check("flux_loss_constrained", con, {p}, 1e-6).pass);
    EXPECT_TRUE(grad_check("flux_loss_unconstrained", unc, {p}, 1e-6).pass);
  }
}

TEST(FluxLoss, ValidationOnIngestion) {
  EXPECT_NO_THROW(validate_flux(flux(0, 10)));
  try {
    validate_flux(flux(-1, 10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::out_of_range);
  }
}

}  // namespace
}  // namespace gridloss
