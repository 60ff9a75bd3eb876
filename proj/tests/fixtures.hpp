#ifndef GRIDLOSS_TESTS_FIXTURES_HPP
#define GRIDLOSS_TESTS_FIXTURES_HPP

#include <cstddef>
#include <utility>
#include <vector>

#include "gridloss/grid_tensor.hpp"

namespace gridloss::testing {

/// Diagonal rain band on a 9x9 grid: cells (2 + i, 2 + i + shift), i = 0..6.
inline GridTensor diagonal_band(int shift) {
  std::vector<double> v(81, 0.0);
  for (int i = 0; i < 7; ++i) v[static_cast<std::size_t>((2 + i) * 9 + 2 + i + shift)] = 1.0;
  return GridTensor(Shape{1, 9, 9, 1}, std::move(v));
}

/// Observed band and the forecast displaced one column to the left.
inline std::pair<GridTensor, GridTensor> shifted_band_pair() {
  return {diagonal_band(0), diagonal_band(-1)};
}

/// Point P of the neighborhood illustration and the 5x5 mask around it.
inline constexpr std::size_t kPointRow = 2;
inline constexpr std::size_t kPointCol = 2;
inline constexpr std::size_t kPointMask = 5;

}  // namespace gridloss::testing

#endif  // GRIDLOSS_TESTS_FIXTURES_HPP
