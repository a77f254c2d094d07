#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mflab {

/// Optimal plan of a balanced, uncapacitated transportation problem.
struct TransportSolution {
  double cost = 0.0;
  /// Row-major m x n flow, filled only when requested.
  std::vector<double> flow;
  std::size_t pivots = 0;
};

/// Solves min sum c_ij f_ij subject to row sums = supply, column sums =
/// demand, f >= 0, with a primal network simplex (block-search pivoting,
/// strongly feasible spanning trees). Supplies and demands must be
/// nonnegative with equal totals up to round-off; the residual imbalance is
/// absorbed by the artificial root and must stay below 1e-9 of the total.
TransportSolution solve_transport(std::span<const double> supply, std::span<const double> demand,
                                  std::span<const double> cost, bool keep_flow = false);

}  // namespace mflab
