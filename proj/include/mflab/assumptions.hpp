#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mflab/model.hpp"

namespace mflab {

struct AssumptionCheck {
  std::string name;
  double empirical = 0.0;
  double analytic = 0.0;
  bool flagged = false;
};

struct AssumptionReport {
  double R = 0.0;
  std::size_t samples = 0;
  AnalyticConstants constants;
  std::vector<AssumptionCheck> checks;

  bool any_flagged() const;
  const AssumptionCheck& find(const std::string& name) const;
};

/// Monte-Carlo estimates of the Lipschitz and sublinearity quotients of the
/// velocity, the adjoint generator action and the full field b on B_R,
/// compared against the analytic constants. A quotient is flagged when it
/// exceeds its bound by more than 1%.
AssumptionReport validate_assumptions(const Dynamics& dyn, double R, std::size_t samples, std::uint64_t seed = 1);

/// Same as above plus per-kernel and per-rate rows.
AssumptionReport validate_assumptions(const ModelSpec& spec, double R, std::size_t samples, std::uint64_t seed = 1);

}  // namespace mflab
