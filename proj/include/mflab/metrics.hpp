#pragma once

#include <cstddef>

#include "mflab/core_measures.hpp"

namespace mflab {

/// Largest combined atom count accepted by the exact solvers.
inline constexpr std::size_t kExactAtomCap = 2048;

/// Exact Wasserstein-1 distance with Euclidean ground cost. Throws when the
/// total masses differ by more than 1e-10.
double w1_spatial(const DiscreteSpatialMeasure& mu, const DiscreteSpatialMeasure& nu);

/// Exact Wasserstein-1 distance on R^d x P(U) with ground cost
/// |x - x'| + ||lambda - lambda'||_BL.
double w1_product(const EmpiricalMeasure& p, const EmpiricalMeasure& q, const LabelSpace& labels);
double w1_product(const EmpiricalMeasure& p, const EmpiricalMeasure& q);

/// Exact bounded-Lipschitz distance between finite nonnegative measures of
/// possibly different mass. Computed as a transport problem on the merged
/// support augmented with a ground point at distance 1 from every atom.
double bl_distance(const DiscreteSpatialMeasure& mu, const DiscreteSpatialMeasure& nu);

}  // namespace mflab
