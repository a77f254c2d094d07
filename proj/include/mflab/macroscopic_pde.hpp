#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "mflab/core_measures.hpp"
#include "mflab/model.hpp"

namespace mflab {

struct Grid1D {
  double x_min = -1.0;
  double x_max = 1.0;
  std::size_t n_cells = 2;

  Grid1D() = default;
  Grid1D(double lo, double hi, std::size_t n);

  double dx() const { return (x_max - x_min) / static_cast<double>(n_cells); }
  double center(std::size_t j) const { return x_min + (static_cast<double>(j) + 0.5) * dx(); }
  /// Face f sits between cells f - 1 and f, f = 0..n_cells.
  double face(std::size_t f) const { return x_min + static_cast<double>(f) * dx(); }
  bool operator==(const Grid1D&) const = default;
};

/// Cell averages of mu^1..mu^H (mass per length).
struct GriddedDensities {
  Grid1D grid;
  std::vector<std::vector<double>> rho;

  GriddedDensities() = default;
  GriddedDensities(Grid1D g, std::size_t labels);

  std::size_t labels() const { return rho.size(); }
  std::size_t cells() const { return grid.n_cells; }
  double mass(std::size_t h) const;
  double total_mass() const;
  double min_value() const;
  /// Atoms at cell centers with weight value * dx.
  DiscreteSpatialMeasure as_measure(std::size_t h) const;

  /// Cell averages from pointwise densities by a 4-point Gauss rule per cell.
  static GriddedDensities from_function(const Grid1D& g, std::size_t labels,
                                        const std::function<std::vector<double>(double)>& density);
};

void write_csv(std::ostream& os, const GriddedDensities& rho);
GriddedDensities read_gridded_csv(std::istream& is);

/// One upwind step of a single density with face velocities v (n + 1 values,
/// outer faces closed) and lam = dt / dx. Written as a nonnegative
/// combination of neighbours, so positivity holds whenever
/// lam (v+_{j+1/2} + v-_{j-1/2}) <= 1.
std::vector<double> upwind_transport(const std::vector<double>& rho, const std::vector<double>& v, double lam);

struct PdeStepStats {
  double max_cfl = 0.0;
  double max_outflow_cfl = 0.0;
  double min_reaction_entry = 0.0;
};

/// CFL bound used for both max|v| dt / dx and the per-cell outflow number.
inline constexpr double kCflLimit = 0.9;
/// Cells at either edge that must stay empty for a run to count as valid.
inline constexpr std::size_t kEdgeGuardCells = 5;

class PdeSolver {
 public:
  /// Requires d = 1 and a velocity that does not depend on the agent's label.
  PdeSolver(ModelSpec spec, Grid1D grid);

  const ModelSpec& spec() const { return spec_; }
  const Grid1D& grid() const { return grid_; }

  /// Sum_k (K^k * mu^k) at the faces by midpoint convolution; outer faces zeroed.
  std::vector<double> face_velocities(const GriddedDensities& rho) const;
  /// Same field at the cell centers.
  std::vector<double> center_velocities(const GriddedDensities& rho) const;
  /// Q(x_j, mu) at cell center j with mollified densities by midpoint quadrature.
  RateMatrix cell_rate_matrix(const GriddedDensities& rho, std::size_t j) const;

  /// Largest dt satisfying both CFL conditions at the given state.
  double max_stable_dt(const GriddedDensities& rho) const;
  /// Upwind transport of every species followed by exp(dt Q)^T per cell.
  GriddedDensities step(const GriddedDensities& rho, double dt, PdeStepStats* stats = nullptr) const;
  /// Semi-discrete right-hand side: upwind flux divergence plus Q^T rho per cell.
  GriddedDensities rhs(const GriddedDensities& rho) const;
  /// Q(x_j, mu)^T rho_j in every cell.
  GriddedDensities reaction_rhs(const GriddedDensities& rho) const;

 private:
  void check(const GriddedDensities& rho) const;
  Eigen::VectorXd field(const std::vector<Eigen::MatrixXd>& mats, const GriddedDensities& rho) const;
  void features(const GriddedDensities& rho, std::vector<Eigen::VectorXd>& out) const;
  RateMatrix rate_at(std::size_t j, const std::vector<Eigen::VectorXd>& feats) const;

  ModelSpec spec_;
  Grid1D grid_;
  std::vector<Eigen::MatrixXd> face_kernel_;
  std::vector<Eigen::MatrixXd> center_kernel_;
  std::vector<Eigen::MatrixXd> mollifier_;
  bool has_rates_ = false;
};

GriddedDensities pde_step(const ModelSpec& spec, const GriddedDensities& rho, double dt);

struct PdeSolution {
  std::vector<double> times;
  std::vector<GriddedDensities> snapshots;
  std::size_t steps = 0;
  /// False when mass reached the outer kEdgeGuardCells cells.
  bool valid = true;
  std::vector<std::string> warnings;
  double max_mass_defect = 0.0;
};

/// Iterates step from 0 to T with the particle engine's recording rule.
PdeSolution solve_pde(const ModelSpec& spec, const GriddedDensities& rho0, double T, double dt,
                      std::size_t record_every = 1);
PdeSolution solve_pde(const PdeSolver& solver, const GriddedDensities& rho0, double T, double dt,
                      std::size_t record_every = 1);

/// True when the guard cells at either edge carry more than tol of mass.
/// Upwind diffusion leaves exponentially small tails everywhere, so tol
/// sits well above them.
bool touches_edge(const GriddedDensities& rho, double tol = 1e-6);

/// Weighted labeled states: weight_i at (x_i, lambda_i). cell_width > 0 marks
/// states standing for uniform mass over a cell centered at x_i.
struct LiftedDatum {
  std::vector<AgentState> states;
  std::vector<double> weights;
  double cell_width = 0.0;
};

/// lambda_x = (d mu^h / d mu)(x) with mu = sum_h mu^h. Atoms at equal
/// positions are merged; empty cells are skipped.
LiftedDatum lift_initial_datum(const std::vector<DiscreteSpatialMeasure>& mu_bars);
LiftedDatum lift_initial_datum(const GriddedDensities& rho);

/// N i.i.d. agents with positions drawn from mu and labels lambda_x.
EmpiricalMeasure sample_lifted(const LiftedDatum& datum, std::size_t n, std::mt19937_64& rng);
/// N agents at the (i + 1/2) / N quantiles of mu.
EmpiricalMeasure quantile_lifted(const LiftedDatum& datum, std::size_t n);

/// phi(x) = cos^2(pi (x - c) / (2 w)) on |x - c| < w.
struct BumpTest {
  double center = 0.0;
  double half_width = 1.0;
  double value(double x) const;
  double derivative(double x) const;
};

std::vector<BumpTest> default_bumps(const Grid1D& grid, std::size_t count);

struct WeakFormReport {
  double max_residual = 0.0;
  std::vector<double> times;
  std::vector<double> residual;
};

/// Central differences of int phi d mu^h across snapshots against the
/// weak-form right-hand side evaluated by midpoint quadrature.
WeakFormReport weak_form_residual(const PdeSolution& sol, const PdeSolver& solver, const std::vector<BumpTest>& tests);

}  // namespace mflab
