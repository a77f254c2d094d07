#include "mflab/macroscopic_pde.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mflab {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

Grid1D::Grid1D(double lo, double hi, std::size_t n) : x_min(lo), x_max(hi), n_cells(n) {
  if (!(std::isfinite(lo) && std::isfinite(hi) && hi > lo)) throw std::invalid_argument("grid needs x_min < x_max");
  if (n < 2) throw std::invalid_argument("grid needs at least two cells");
}

GriddedDensities::GriddedDensities(Grid1D g, std::size_t labels)
    : grid(g), rho(labels, std::vector<double>(g.n_cells, 0.0)) {
  if (labels == 0) throw std::invalid_argument("gridded densities need at least one label");
}

double GriddedDensities::mass(std::size_t h) const {
  double s = 0.0;
  for (double v : rho[h]) s += v;
  return s * grid.dx();
}

double GriddedDensities::total_mass() const {
  double s = 0.0;
  for (std::size_t h = 0; h < labels(); ++h) s += mass(h);
  return s;
}

double GriddedDensities::min_value() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : rho)
    for (double v : r) m = std::min(m, v);
  return m;
}

DiscreteSpatialMeasure GriddedDensities::as_measure(std::size_t h) const {
  DiscreteSpatialMeasure mu(1);
  const double dx = grid.dx();
  for (std::size_t j = 0; j < cells(); ++j) {
    const double x = grid.center(j);
    mu.add(std::span<const double>(&x, 1), rho[h][j] * dx);
  }
  return mu;
}

GriddedDensities GriddedDensities::from_function(const Grid1D& g, std::size_t labels,
                                                 const std::function<std::vector<double>(double)>& density) {
  GriddedDensities out(g, labels);
  const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
  const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
  const double wa = (18.0 + std::sqrt(30.0)) / 36.0, wb = (18.0 - std::sqrt(30.0)) / 36.0;
  const double nodes[4] = {-b, -a, a, b};
  const double weights[4] = {wb, wa, wa, wb};
  const double half = 0.5 * g.dx();
  for (std::size_t j = 0; j < g.n_cells; ++j)
    for (int q = 0; q < 4; ++q) {
      const auto v = density(g.center(j) + half * nodes[q]);
      if (v.size() != labels) throw std::invalid_argument("density function returned the wrong label count");
      for (std::size_t h = 0; h < labels; ++h) {
        if (!(v[h] >= 0.0)) throw std::invalid_argument("density function returned a negative value");
        out.rho[h][j] += 0.5 * weights[q] * v[h];
      }
    }
  return out;
}

void write_csv(std::ostream& os, const GriddedDensities& rho) {
  os << "x_center";
  for (std::size_t h = 0; h < rho.labels(); ++h) os << ",mu_" << h + 1;
  os << "\n";
  for (std::size_t j = 0; j < rho.cells(); ++j) {
    os << format_real(rho.grid.center(j));
    for (std::size_t h = 0; h < rho.labels(); ++h) os << "," << format_real(rho.rho[h][j]);
    os << "\n";
  }
}

GriddedDensities read_gridded_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("gridded CSV is empty");
  const auto header = split_line(line);
  if (header.size() < 2 || header[0] != "x_center") throw std::invalid_argument("gridded CSV header must start with x_center");
  const std::size_t H = header.size() - 1;
  std::vector<double> xs;
  std::vector<std::vector<double>> cols(H);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != H + 1) throw std::invalid_argument("gridded CSV row has the wrong column count");
    xs.push_back(std::stod(cells[0]));
    for (std::size_t h = 0; h < H; ++h) cols[h].push_back(std::stod(cells[h + 1]));
  }
  if (xs.size() < 2) throw std::invalid_argument("gridded CSV needs at least two cells");
  const double dx = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
  GriddedDensities out(Grid1D(xs.front() - 0.5 * dx, xs.back() + 0.5 * dx, xs.size()), H);
  for (std::size_t j = 0; j < xs.size(); ++j)
    if (std::abs(xs[j] - out.grid.center(j)) > 1e-9 * std::max(1.0, std::abs(xs[j])))
      throw std::invalid_argument("gridded CSV cell centers are not uniformly spaced");
  out.rho = std::move(cols);
  return out;
}

std::vector<double> upwind_transport(const std::vector<double>& r, const std::vector<double>& v, double lam) {
  const std::size_t n = r.size();
  if (v.size() != n + 1) throw std::invalid_argument("upwind_transport: need one velocity per face");
  std::vector<double> o(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double in_left = j > 0 ? std::max(v[j], 0.0) : 0.0;
    const double out_left = j > 0 ? std::max(-v[j], 0.0) : 0.0;
    const double out_right = j + 1 < n ? std::max(v[j + 1], 0.0) : 0.0;
    const double in_right = j + 1 < n ? std::max(-v[j + 1], 0.0) : 0.0;
    double val = (1.0 - lam * (out_right + out_left)) * r[j];
    if (j > 0) val += lam * in_left * r[j - 1];
    if (j + 1 < n) val += lam * in_right * r[j + 1];
    o[j] = val;
  }
  return o;
}

PdeSolver::PdeSolver(ModelSpec spec, Grid1D grid) : spec_(std::move(spec)), grid_(grid) {
  if (spec_.d != 1) throw std::invalid_argument("the macroscopic solver is one-dimensional (model.dim = 1)");
  spec_.validate();
  if (!KernelDynamics(spec_).velocity_label_independent())
    throw std::invalid_argument("the macroscopic system requires label-independent kernels K^{hk} = K^h");
  const std::size_t n = grid_.n_cells, H = spec_.H;
  const double dx = grid_.dx();
  const auto N = static_cast<Eigen::Index>(n);

  face_kernel_.resize(H);
  center_kernel_.resize(H);
  for (std::size_t h = 0; h < H; ++h) {
    const auto& K = spec_.kernel(h, 0);
    if (K.is_zero()) continue;
    auto& F = face_kernel_[h];
    auto& C = center_kernel_[h];
    F.setZero(N + 1, N);
    C.setZero(N, N);
    double z = 0.0, out = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t f = 0; f <= n; ++f) {
        z = grid_.face(f) - grid_.center(j);
        out = 0.0;
        K.accumulate(std::span<const double>(&z, 1), dx, std::span<double>(&out, 1));
        F(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(j)) = out;
      }
      for (std::size_t i = 0; i < n; ++i) {
        z = grid_.center(i) - grid_.center(j);
        out = 0.0;
        K.accumulate(std::span<const double>(&z, 1), dx, std::span<double>(&out, 1));
        C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = out;
      }
    }
  }

  const auto& widths = spec_.rates.widths();
  mollifier_.resize(widths.size());
  for (std::size_t w = 0; w < widths.size(); ++w) {
    auto& M = mollifier_[w];
    M.resize(N, N);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double z = grid_.center(i) - grid_.center(j);
        M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = dx * mollifier(widths[w], std::span<const double>(&z, 1));
      }
  }
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t k = 0; k < H; ++k)
      if (h != k && (spec_.rates.pair(h, k).a0 != 0.0 || spec_.rates.pair(h, k).has_influence())) has_rates_ = true;
}

void PdeSolver::check(const GriddedDensities& rho) const {
  if (!(rho.grid == grid_)) throw std::invalid_argument("densities live on a different grid");
  if (rho.labels() != spec_.H) throw std::invalid_argument("densities have the wrong label count");
}

Eigen::VectorXd PdeSolver::field(const std::vector<Eigen::MatrixXd>& mats, const GriddedDensities& rho) const {
  Eigen::Index rows = 0;
  for (const auto& m : mats) rows = std::max(rows, m.rows());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(rows);
  for (std::size_t h = 0; h < mats.size(); ++h) {
    if (mats[h].size() == 0) continue;
    v.noalias() += mats[h] * Eigen::Map<const Eigen::VectorXd>(rho.rho[h].data(), static_cast<Eigen::Index>(rho.cells()));
  }
  return v;
}

std::vector<double> PdeSolver::face_velocities(const GriddedDensities& rho) const {
  check(rho);
  std::vector<double> v(grid_.n_cells + 1, 0.0);
  const auto f = field(face_kernel_, rho);
  for (Eigen::Index i = 0; i < f.size(); ++i) v[static_cast<std::size_t>(i)] = f(i);
  v.front() = 0.0;
  v.back() = 0.0;
  return v;
}

std::vector<double> PdeSolver::center_velocities(const GriddedDensities& rho) const {
  check(rho);
  std::vector<double> v(grid_.n_cells, 0.0);
  const auto f = field(center_kernel_, rho);
  for (Eigen::Index i = 0; i < f.size(); ++i) v[static_cast<std::size_t>(i)] = f(i);
  return v;
}

void PdeSolver::features(const GriddedDensities& rho, std::vector<Eigen::VectorXd>& out) const {
  const std::size_t H = spec_.H;
  out.assign(mollifier_.size() * H, Eigen::VectorXd());
  for (std::size_t w = 0; w < mollifier_.size(); ++w)
    for (std::size_t l = 0; l < H; ++l)
      if (spec_.rates.feature_used(w, l))
        out[w * H + l] = mollifier_[w] * Eigen::Map<const Eigen::VectorXd>(rho.rho[l].data(), static_cast<Eigen::Index>(rho.cells()));
}

RateMatrix PdeSolver::rate_at(std::size_t j, const std::vector<Eigen::VectorXd>& feats) const {
  std::vector<double> f(feats.size(), 0.0);
  for (std::size_t i = 0; i < feats.size(); ++i)
    if (feats[i].size() > 0) f[i] = feats[i](static_cast<Eigen::Index>(j));
  const double x = grid_.center(j);
  Eigen::MatrixXd q;
  spec_.rates.assemble(std::span<const double>(&x, 1), f, q);
  return RateMatrix::from_off_diagonal(std::move(q));
}

RateMatrix PdeSolver::cell_rate_matrix(const GriddedDensities& rho, std::size_t j) const {
  check(rho);
  std::vector<Eigen::VectorXd> feats;
  features(rho, feats);
  return rate_at(j, feats);
}

double PdeSolver::max_stable_dt(const GriddedDensities& rho) const {
  const auto v = face_velocities(rho);
  double worst = 0.0;
  for (std::size_t j = 0; j < grid_.n_cells; ++j) {
    worst = std::max(worst, std::max(v[j + 1], 0.0) + std::max(-v[j], 0.0));
    worst = std::max(worst, std::abs(v[j]));
  }
  return worst > 0.0 ? kCflLimit * grid_.dx() / worst : std::numeric_limits<double>::infinity();
}

GriddedDensities PdeSolver::step(const GriddedDensities& rho, double dt, PdeStepStats* stats) const {
  check(rho);
  if (!(dt > 0.0)) throw std::invalid_argument("pde step: dt must be positive");
  const std::size_t n = grid_.n_cells, H = spec_.H;
  const double lam = dt / grid_.dx();
  const auto v = face_velocities(rho);

  double cfl = 0.0, outflow = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    cfl = std::max(cfl, lam * std::abs(v[j]));
    outflow = std::max(outflow, lam * (std::max(v[j + 1], 0.0) + std::max(-v[j], 0.0)));
  }
  if (cfl > kCflLimit + 1e-12 || outflow > kCflLimit + 1e-12) {
    std::ostringstream os;
    os << "CFL violation: dt max|v|/dx = " << format_real(cfl) << ", max outflow number = " << format_real(outflow)
       << " (limit " << kCflLimit << "); suggested dt <= " << format_real(max_stable_dt(rho));
    throw std::runtime_error(os.str());
  }
  if (stats) {
    stats->max_cfl = std::max(stats->max_cfl, cfl);
    stats->max_outflow_cfl = std::max(stats->max_outflow_cfl, outflow);
  }

  GriddedDensities out(grid_, H);
  for (std::size_t h = 0; h < H; ++h) out.rho[h] = upwind_transport(rho.rho[h], v, lam);
  if (!has_rates_) return out;

  std::vector<Eigen::VectorXd> feats;
  features(out, feats);
  std::vector<double> cell(H), next(H);
  for (std::size_t j = 0; j < n; ++j) {
    const RateMatrix q = rate_at(j, feats);
    if (q.max_exit_rate() == 0.0) continue;
    ExpStats es;
    const Eigen::MatrixXd p = transition_matrix(q, dt, &es);
    if (stats) stats->min_reaction_entry = std::min(stats->min_reaction_entry, es.min_entry);
    for (std::size_t h = 0; h < H; ++h) cell[h] = out.rho[h][j];
    for (std::size_t h = 0; h < H; ++h) {
      double s = 0.0;
      for (std::size_t k = 0; k < H; ++k) s += p(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(h)) * cell[k];
      next[h] = std::max(s, 0.0);
    }
    for (std::size_t h = 0; h < H; ++h) out.rho[h][j] = next[h];
  }
  return out;
}

GriddedDensities PdeSolver::rhs(const GriddedDensities& rho) const {
  check(rho);
  const std::size_t n = grid_.n_cells, H = spec_.H;
  const double dx = grid_.dx();
  const auto v = face_velocities(rho);
  GriddedDensities out(grid_, H);
  for (std::size_t h = 0; h < H; ++h) {
    const auto& r = rho.rho[h];
    auto flux = [&](std::size_t f) {
      if (f == 0 || f == n) return 0.0;
      return v[f] > 0.0 ? v[f] * r[f - 1] : v[f] * r[f];
    };
    for (std::size_t j = 0; j < n; ++j) out.rho[h][j] = -(flux(j + 1) - flux(j)) / dx;
  }
  if (!has_rates_) return out;
  const auto r = reaction_rhs(rho);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t j = 0; j < n; ++j) out.rho[h][j] += r.rho[h][j];
  return out;
}

GriddedDensities PdeSolver::reaction_rhs(const GriddedDensities& rho) const {
  check(rho);
  const std::size_t n = grid_.n_cells, H = spec_.H;
  GriddedDensities out(grid_, H);
  if (!has_rates_) return out;
  std::vector<Eigen::VectorXd> feats;
  features(rho, feats);
  for (std::size_t j = 0; j < n; ++j) {
    const RateMatrix q = rate_at(j, feats);
    for (std::size_t h = 0; h < H; ++h) {
      double s = 0.0;
      for (std::size_t k = 0; k < H; ++k) s += q(k, h) * rho.rho[k][j];
      out.rho[h][j] = s;
    }
  }
  return out;
}

GriddedDensities pde_step(const ModelSpec& spec, const GriddedDensities& rho, double dt) {
  return PdeSolver(spec, rho.grid).step(rho, dt);
}

bool touches_edge(const GriddedDensities& rho, double tol) {
  const std::size_t n = rho.cells(), g = std::min(kEdgeGuardCells, n / 2);
  const double dx = rho.grid.dx();
  double left = 0.0, right = 0.0;
  for (const auto& r : rho.rho)
    for (std::size_t j = 0; j < g; ++j) {
      left += r[j] * dx;
      right += r[n - 1 - j] * dx;
    }
  return left > tol || right > tol;
}

PdeSolution solve_pde(const PdeSolver& solver, const GriddedDensities& rho0, double T, double dt,
                      std::size_t record_every) {
  if (!(T >= 0.0)) throw std::invalid_argument("solve_pde: T must be nonnegative");
  if (!(dt > 0.0)) throw std::invalid_argument("solve_pde: dt must be positive");
  if (record_every == 0) throw std::invalid_argument("solve_pde: record_every must be positive");
  if (rho0.min_value() < 0.0) throw std::invalid_argument("solve_pde: initial densities must be nonnegative");
  if (std::abs(rho0.total_mass() - 1.0) > 1e-10)
    throw std::invalid_argument("solve_pde: initial densities must have total mass 1, got " +
                                format_real(rho0.total_mass()));
  PdeSolution sol;
  sol.times.push_back(0.0);
  sol.snapshots.push_back(rho0);
  auto flag_edge = [&](const GriddedDensities& r, double t) {
    if (sol.valid && touches_edge(r)) {
      sol.valid = false;
      sol.warnings.push_back("mass reached the outer " + std::to_string(kEdgeGuardCells) + " cells at t = " +
                             format_real(t) + "; enlarge the grid");
    }
  };
  flag_edge(rho0, 0.0);
  const std::size_t steps = T > 0.0 ? static_cast<std::size_t>(std::ceil(T / dt - 1e-9)) : 0;
  GriddedDensities rho = rho0;
  for (std::size_t s = 1; s <= steps; ++s) {
    const double t0 = static_cast<double>(s - 1) * dt;
    const double h = s == steps ? T - t0 : dt;
    rho = solver.step(rho, h);
    const double t = s == steps ? T : static_cast<double>(s) * dt;
    sol.max_mass_defect = std::max(sol.max_mass_defect, std::abs(rho.total_mass() - 1.0));
    flag_edge(rho, t);
    if (s % record_every == 0 || s == steps) {
      sol.times.push_back(t);
      sol.snapshots.push_back(rho);
    }
  }
  sol.steps = steps;
  return sol;
}

PdeSolution solve_pde(const ModelSpec& spec, const GriddedDensities& rho0, double T, double dt,
                      std::size_t record_every) {
  return solve_pde(PdeSolver(spec, rho0.grid), rho0, T, dt, record_every);
}

LiftedDatum lift_initial_datum(const std::vector<DiscreteSpatialMeasure>& mu_bars) {
  if (mu_bars.empty()) throw std::invalid_argument("lift_initial_datum: need at least one label measure");
  const std::size_t H = mu_bars.size(), d = mu_bars[0].dim();
  std::map<std::vector<double>, std::vector<double>> merged;
  double total = 0.0;
  for (std::size_t h = 0; h < H; ++h) {
    if (mu_bars[h].dim() != d) throw std::invalid_argument("lift_initial_datum: label measures differ in dimension");
    for (std::size_t i = 0; i < mu_bars[h].size(); ++i) {
      auto x = mu_bars[h].position(i);
      auto& w = merged[std::vector<double>(x.begin(), x.end())];
      w.resize(H, 0.0);
      w[h] += mu_bars[h].weight(i);
      total += mu_bars[h].weight(i);
    }
  }
  if (std::abs(total - 1.0) > 1e-10)
    throw std::invalid_argument("lift_initial_datum: label measures must have total mass 1, got " + format_real(total));
  LiftedDatum out;
  for (auto& [x, w] : merged) {
    double s = 0.0;
    for (double v : w) s += v;
    if (s <= 0.0) continue;
    for (double& v : w) v /= s;
    out.states.push_back(AgentState{x, SimplexVector(w)});
    out.weights.push_back(s);
  }
  return out;
}

LiftedDatum lift_initial_datum(const GriddedDensities& rho) {
  if (std::abs(rho.total_mass() - 1.0) > 1e-10)
    throw std::invalid_argument("lift_initial_datum: densities must have total mass 1, got " +
                                format_real(rho.total_mass()));
  const std::size_t H = rho.labels();
  LiftedDatum out;
  out.cell_width = rho.grid.dx();
  std::vector<double> w(H);
  for (std::size_t j = 0; j < rho.cells(); ++j) {
    double s = 0.0;
    for (std::size_t h = 0; h < H; ++h) s += (w[h] = rho.rho[h][j]);
    if (s <= 0.0) continue;
    for (double& v : w) v /= s;
    out.states.push_back(AgentState{{rho.grid.center(j)}, SimplexVector(w)});
    out.weights.push_back(s * rho.grid.dx());
  }
  return out;
}

namespace {

EmpiricalMeasure empty_like(const LiftedDatum& datum) {
  if (datum.states.empty()) throw std::invalid_argument("lifted datum has no states");
  return EmpiricalMeasure(datum.states[0].x.size(), datum.states[0].lambda.size());
}

}  // namespace

EmpiricalMeasure sample_lifted(const LiftedDatum& datum, std::size_t n, std::mt19937_64& rng) {
  EmpiricalMeasure p = empty_like(datum);
  std::discrete_distribution<std::size_t> pick(datum.weights.begin(), datum.weights.end());
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = datum.states[pick(rng)];
    AgentState a = s;
    if (datum.cell_width > 0.0) a.x[0] += datum.cell_width * u(rng);
    p.push_back(a);
  }
  return p;
}

EmpiricalMeasure quantile_lifted(const LiftedDatum& datum, std::size_t n) {
  EmpiricalMeasure p = empty_like(datum);
  double total = 0.0;
  for (double w : datum.weights) total += w;
  std::size_t s = 0;
  double below = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(n) * total;
    while (s + 1 < datum.states.size() && below + datum.weights[s] < q) below += datum.weights[s++];
    AgentState a = datum.states[s];
    if (datum.cell_width > 0.0) {
      const double frac = std::clamp((q - below) / datum.weights[s], 0.0, 1.0);
      a.x[0] += datum.cell_width * (frac - 0.5);
    }
    p.push_back(a);
  }
  return p;
}

double BumpTest::value(double x) const {
  const double r = (x - center) / half_width;
  if (std::abs(r) >= 1.0) return 0.0;
  const double c = std::cos(0.5 * std::numbers::pi * r);
  return c * c;
}

double BumpTest::derivative(double x) const {
  const double r = (x - center) / half_width;
  if (std::abs(r) >= 1.0) return 0.0;
  return -0.5 * std::numbers::pi / half_width * std::sin(std::numbers::pi * r);
}

std::vector<BumpTest> default_bumps(const Grid1D& grid, std::size_t count) {
  std::vector<BumpTest> out;
  const double L = grid.x_max - grid.x_min;
  const double w = L / static_cast<double>(count + 1);
  for (std::size_t i = 0; i < count; ++i) out.push_back({grid.x_min + static_cast<double>(i + 1) * w, w});
  return out;
}

WeakFormReport weak_form_residual(const PdeSolution& sol, const PdeSolver& solver, const std::vector<BumpTest>& tests) {
  if (sol.snapshots.size() < 3) throw std::invalid_argument("weak_form_residual: need at least three snapshots");
  const auto& grid = solver.grid();
  const std::size_t n = grid.n_cells, H = solver.spec().H;
  const double dx = grid.dx();
  std::vector<std::vector<double>> phi(tests.size(), std::vector<double>(n)), dphi = phi;
  for (std::size_t t = 0; t < tests.size(); ++t)
    for (std::size_t j = 0; j < n; ++j) {
      phi[t][j] = tests[t].value(grid.center(j));
      dphi[t][j] = tests[t].derivative(grid.center(j));
    }
  auto integral = [&](const std::vector<double>& f, const std::vector<double>& r) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += f[j] * r[j];
    return s * dx;
  };

  WeakFormReport rep;
  for (std::size_t s = 1; s + 1 < sol.snapshots.size(); ++s) {
    const auto& prev = sol.snapshots[s - 1];
    const auto& cur = sol.snapshots[s];
    const auto& next = sol.snapshots[s + 1];
    const double span = sol.times[s + 1] - sol.times[s - 1];
    const auto v = solver.center_velocities(cur);
    const auto react = solver.reaction_rhs(cur).rho;
    double worst = 0.0;
    std::vector<double> flux(n);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t j = 0; j < n; ++j) flux[j] = v[j] * cur.rho[h][j];
      for (std::size_t t = 0; t < tests.size(); ++t) {
        const double lhs = (integral(phi[t], next.rho[h]) - integral(phi[t], prev.rho[h])) / span;
        const double rhs = integral(dphi[t], flux) + integral(phi[t], react[h]);
        worst = std::max(worst, std::abs(lhs - rhs));
      }
    }
    rep.times.push_back(sol.times[s]);
    rep.residual.push_back(worst);
    rep.max_residual = std::max(rep.max_residual, worst);
  }
  return rep;
}

}  // namespace mflab
