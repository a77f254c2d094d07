#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mflab/core_measures.hpp"
#include "mflab/model.hpp"

namespace mflab {

struct SimConfig {
  double dt = 0.01;
  double T = 1.0;
  std::size_t record_every = 1;
  std::uint64_t seed = 0;
  /// Worker threads used for the per-agent phase of each step.
  std::size_t jobs = 1;
};

/// Diagnostics accumulated over steps.
struct StepStats {
  /// Smallest label entry produced before clamping.
  double min_raw_entry = std::numeric_limits<double>::infinity();
  /// Largest |sum(lambda) - 1| before renormalization.
  double max_sum_defect = 0.0;
  /// Largest dt * |q_hh| seen.
  double max_exit_dt = 0.0;
  std::size_t agent_steps = 0;

  void merge(const StepStats& o);
};

struct Monitor {
  double max_state_norm = 0.0;
  double first_moment = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<EmpiricalMeasure> snapshots;
  std::vector<Monitor> monitors;
  std::vector<std::string> warnings;
  StepStats stats;
};

/// Warning threshold for dt * max |q_hh|.
inline constexpr double kExitRateGuard = 10.0;

/// Label marginals of the current measure, shared by every agent in a step.
Marginals freeze(const EmpiricalMeasure& p);

/// Advances agent i of p by dt against the frozen marginals m. Writes the
/// new position and label vector to x_out and lambda_out.
void advance_agent(const Dynamics& dyn, const EmpiricalMeasure& p, const Marginals& m, std::size_t i, double dt,
                   std::span<double> x_out, std::span<double> lambda_out, StepStats* stats = nullptr);

/// One Lie-splitting step: explicit Euler in x, exact exponential in lambda,
/// both against the pre-step measure. t is used only in error messages.
EmpiricalMeasure step(const Dynamics& dyn, const EmpiricalMeasure& p, double dt, StepStats* stats = nullptr,
                      double t = 0.0, std::size_t jobs = 1);
EmpiricalMeasure step(const ModelSpec& spec, const EmpiricalMeasure& p, double dt);

Monitor monitor(const EmpiricalMeasure& p, const LabelSpace& labels);

/// Iterates step from 0 to T, recording every record_every steps and at T.
/// A shorter final step lands exactly on T.
Trajectory simulate(const Dynamics& dyn, const EmpiricalMeasure& p0, const SimConfig& cfg);

/// (r + M t) e^{2 M t}.
double support_radius(double r, double M, double t);

struct SupportReport {
  double r = 0.0;
  double M = 0.0;
  std::vector<double> times;
  std::vector<double> max_norm;
  std::vector<double> bound;
  double min_margin = 0.0;
  std::size_t violations = 0;
  bool ok() const { return violations == 0; }
};

SupportReport support_bound_check(const Trajectory& traj, double r, double M, const LabelSpace& labels);

/// e^{L t + e^{L t} - 1}.
double stability_factor(double L, double t);

struct StabilityReport {
  double L_R = 0.0;
  std::vector<double> times;
  std::vector<double> w1;
  std::vector<double> envelope;
  double max_ratio = 0.0;
  bool ok = true;
};

inline constexpr double kStabilitySlack = 1.05;

StabilityReport stability_experiment(const Dynamics& dyn, const EmpiricalMeasure& p0a, const EmpiricalMeasure& p0b,
                                     const SimConfig& cfg, double L_R);

}  // namespace mflab
