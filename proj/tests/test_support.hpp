#pragma once

#include <memory>
#include <random>

#include "sts/grid.hpp"
#include "sts/ssm_core.hpp"

namespace sts::testing {

inline Grid<double> random_input(std::size_t H, std::size_t L, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Grid<double> x(H, L);
  for (double& v : x.flat()) v = detail::standard_normal(rng);
  return x;
}

inline DiscreteParams random_system(std::size_t H, std::size_t N, std::uint64_t seed) {
  return discretize(init_s4d_lin({H, N, 1e-3, 1e-1, seed}));
}

inline TransferState random_state(std::size_t H, std::size_t N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TransferState s(H, N);
  for (cplx& v : s.h.flat()) v = {detail::standard_normal(rng), detail::standard_normal(rng)};
  return s;
}

// Scalar system (H = N = 1) with explicit discrete coefficients.
inline DiscreteParams scalar_system(cplx a_bar, cplx b_bar, cplx c_bar, double d) {
  return {Grid<cplx>(1, 1, a_bar), Grid<cplx>(1, 1, b_bar), Grid<cplx>(1, 1, c_bar), {d}};
}

inline Grid<double> row_input(std::initializer_list<double> values) {
  Grid<double> x(1, values.size());
  std::copy(values.begin(), values.end(), x.row(0).begin());
  return x;
}

}  // namespace sts::testing
