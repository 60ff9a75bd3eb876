#ifndef GRIDLOSS_GRIDLOSS_HPP
#define GRIDLOSS_GRIDLOSS_HPP

// Everything in one include.

#include "gridloss/error.hpp"
#include "gridloss/grid_tensor.hpp"
#include "gridloss/autodiff.hpp"
#include "gridloss/finite_diff.hpp"
#include "gridloss/discretize.hpp"
#include "gridloss/losses_regression.hpp"
#include "gridloss/losses_categorical.hpp"
#include "gridloss/losses_spatial.hpp"
#include "gridloss/physics_loss.hpp"
#include "gridloss/loss_spec.hpp"
#include "gridloss/grid_io.hpp"
#include "gridloss/train_harness.hpp"

#endif  // GRIDLOSS_GRIDLOSS_HPP
