#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mflab/macroscopic_pde.hpp"
#include "mflab/metrics.hpp"

using namespace mflab;

namespace {

double gauss(double x, double m, double s) {
  return std::exp(-(x - m) * (x - m) / (2.0 * s * s)) / (s * std::sqrt(2.0 * std::numbers::pi));
}

GriddedDensities normalized(GriddedDensities r) {
  const double m = r.total_mass();
  for (auto& v : r.rho)
    for (auto& x : v) x /= m;
  return r;
}

GriddedDensities two_species(const Grid1D& g) {
  return normalized(GriddedDensities::from_function(g, 2, [](double x) {
    return std::vector<double>{0.4 * gauss(x, -0.7, 0.3) + 0.4 * gauss(x, 0.7, 0.3), 0.2 * gauss(x, 0.2, 0.25)};
  }));
}

ModelSpec leader_follower() {
  ModelSpec spec(1, 2);
  spec.set_species_kernel(0, KernelSpec::gaussian(1.0, 0.7));
  spec.set_species_kernel(1, KernelSpec::gaussian(2.0, 1.0));
  PairRate fl;
  fl.a0 = 0.2;
  fl.c = {0.0, 1.5};
  fl.sigma = 0.4;
  fl.gain = Gain::Decay;
  PairRate lf;
  lf.a0 = 0.1;
  lf.c = {0.5, 0.0};
  lf.sigma = 0.6;
  spec.rates.set(0, 1, fl);
  spec.rates.set(1, 0, lf);
  return spec;
}

double l1(const std::vector<double>& a, const std::vector<double>& b, double dx) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::abs(a[j] - b[j]);
  return s * dx;
}

// Cell averages of a 2n-cell field on the n-cell grid.
std::vector<double> restrict_pairs(const std::vector<double>& fine) {
  std::vector<double> out(fine.size() / 2);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = 0.5 * (fine[2 * j] + fine[2 * j + 1]);
  return out;
}

}  // namespace

TEST_CASE("grid geometry and validation") {
  const Grid1D g(-1.0, 1.0, 4);
  CHECK(g.dx() == 0.5);
  CHECK(g.center(0) == -0.75);
  CHECK(g.face(4) == 1.0);
  CHECK_THROWS(Grid1D(1.0, 1.0, 4));
  CHECK_THROWS(Grid1D(0.0, 1.0, 1));
}

TEST_CASE("CSV round trip") {
  const Grid1D g(-2.0, 3.0, 7);
  auto r = two_species(g);
  std::stringstream ss;
  write_csv(ss, r);
  CHECK(ss.str().rfind("x_center,mu_1,mu_2\n", 0) == 0);
  const auto back = read_gridded_csv(ss);
  CHECK(back.grid.n_cells == 7);
  CHECK(back.grid.x_min == doctest::Approx(-2.0));
  CHECK(back.grid.x_max == doctest::Approx(3.0));
  CHECK(back.rho == r.rho);
}

TEST_CASE("zero dynamics leave densities unchanged") {
  const Grid1D g(-2.5, 2.5, 50);
  const auto r = two_species(g);
  const auto out = pde_step(ModelSpec(1, 2), r, 0.3);
  CHECK(out.rho == r.rho);
  const auto sol = solve_pde(ModelSpec(1, 2), r, 0.0, 0.1);
  REQUIRE(sol.snapshots.size() == 1);
  CHECK(sol.snapshots[0].rho == r.rho);
}

TEST_CASE("constant transport converges at first order to the exact shift") {
  const double c = 0.8, T = 1.0;
  std::vector<double> err;
  for (std::size_t n : {100, 200, 400}) {
    const Grid1D g(-3.0, 3.0, n);
    const auto r0 = GriddedDensities::from_function(g, 1, [](double x) { return std::vector<double>{gauss(x, -0.5, 0.3)}; });
    const auto exact = GriddedDensities::from_function(g, 1, [&](double x) { return std::vector<double>{gauss(x - c * T, -0.5, 0.3)}; });
    std::vector<double> v(n + 1, c);
    v.front() = v.back() = 0.0;
    const double dt = 0.5 * g.dx() / c;
    const auto steps = static_cast<std::size_t>(std::lround(T / dt));
    auto r = r0.rho[0];
    for (std::size_t s = 0; s < steps; ++s) r = upwind_transport(r, v, dt / g.dx());
    err.push_back(l1(r, exact.rho[0], g.dx()));
  }
  for (std::size_t i = 0; i + 1 < err.size(); ++i) {
    const double ratio = err[i] / err[i + 1];
    INFO(ratio);
    CHECK(ratio > 1.5);
    CHECK(ratio < 2.5);
  }
}

TEST_CASE("constant rates over ln 2 halve the follower mass in every cell") {
  const Grid1D g(-2.5, 2.5, 40);
  const auto r = two_species(g);
  ModelSpec spec(1, 2);
  PairRate fl;
  fl.a0 = 1.0;
  spec.rates.set(0, 1, fl);
  const auto out = pde_step(spec, r, std::log(2.0));
  for (std::size_t j = 0; j < g.n_cells; ++j) {
    CHECK(out.rho[0][j] == doctest::Approx(0.5 * r.rho[0][j]).epsilon(1e-13));
    CHECK(out.rho[1][j] == doctest::Approx(r.rho[1][j] + 0.5 * r.rho[0][j]).epsilon(1e-13));
  }
  CHECK(out.total_mass() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("reaction commutes with cell permutations") {
  const Grid1D g(-1.0, 1.0, 12);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GriddedDensities r(g, 3);
  for (auto& f : r.rho)
    for (auto& v : f) v = u(rng);
  r = normalized(r);
  ModelSpec spec(1, 3);
  for (std::size_t h = 0; h < 3; ++h)
    for (std::size_t k = 0; k < 3; ++k)
      if (h != k) {
        PairRate p;
        p.a0 = u(rng);
        spec.rates.set(h, k, p);
      }
  std::vector<std::size_t> perm(g.n_cells);
  for (std::size_t j = 0; j < perm.size(); ++j) perm[j] = j;
  std::shuffle(perm.begin(), perm.end(), rng);
  auto permute = [&](const GriddedDensities& a) {
    GriddedDensities b(g, 3);
    for (std::size_t h = 0; h < 3; ++h)
      for (std::size_t j = 0; j < perm.size(); ++j) b.rho[h][j] = a.rho[h][perm[j]];
    return b;
  };
  const auto a = permute(pde_step(spec, r, 0.7));
  const auto b = pde_step(spec, permute(r), 0.7);
  CHECK(a.rho == b.rho);
}

TEST_CASE("mass, positivity and species conservation") {
  const Grid1D g(-2.5, 2.5, 200);
  const auto r0 = two_species(g);
  const PdeSolver solver(leader_follower(), g);
  GriddedDensities r = r0;
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    r = solver.step(r, 0.002);
    worst = std::max(worst, std::abs(r.total_mass() - 1.0));
    REQUIRE(r.min_value() >= 0.0);
  }
  CHECK(worst <= 1e-10);

  ModelSpec transport_only = leader_follower();
  transport_only.rates = RateSpec(2);
  const PdeSolver t(transport_only, g);
  auto q = r0;
  for (int s = 0; s < 200; ++s) q = t.step(q, 0.005);
  CHECK(q.mass(0) == doctest::Approx(r0.mass(0)).epsilon(1e-13));
  CHECK(q.mass(1) == doctest::Approx(r0.mass(1)).epsilon(1e-13));
}

TEST_CASE("CFL violations report a usable dt") {
  const Grid1D g(-2.5, 2.5, 100);
  const auto r = two_species(g);
  const PdeSolver solver(leader_follower(), g);
  const double safe = solver.max_stable_dt(r);
  CHECK_NOTHROW(solver.step(r, safe));
  try {
    solver.step(r, 3.0 * safe);
    FAIL("expected a CFL error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("suggested dt") != std::string::npos);
  }
}

TEST_CASE("label-dependent kernels are rejected") {
  ModelSpec spec(1, 2);
  spec.mode = VelocityMode::LabelWeighted;
  spec.set_kernel(0, 1, KernelSpec::linear_attraction(1.0));
  CHECK_THROWS(PdeSolver(spec, Grid1D(-1.0, 1.0, 10)));
  CHECK_THROWS(PdeSolver(ModelSpec(2, 2), Grid1D(-1.0, 1.0, 10)));
}

TEST_CASE("solve_pde bookkeeping and edge guard") {
  const Grid1D g(-2.5, 2.5, 100);
  const auto r0 = two_species(g);
  const auto sol = solve_pde(leader_follower(), r0, 1.0, 0.01, 10);
  CHECK(sol.times.size() == 11);
  CHECK(sol.times.back() == 1.0);
  CHECK(sol.valid);
  for (const auto& s : sol.snapshots) CHECK(std::abs(s.total_mass() - 1.0) <= 1e-10);

  const Grid1D tight(-1.0, 1.0, 40);
  const auto wide = normalized(GriddedDensities::from_function(tight, 2, [](double x) {
    return std::vector<double>{gauss(x, 0.0, 0.5), gauss(x, 0.0, 0.5)};
  }));
  const auto bad = solve_pde(ModelSpec(1, 2), wide, 0.1, 0.05);
  CHECK_FALSE(bad.valid);
  CHECK(bad.warnings.size() == 1);

  auto heavy = r0;
  heavy.rho[0][50] += 1.0;
  CHECK_THROWS(solve_pde(leader_follower(), heavy, 1.0, 0.01));
}

TEST_CASE("grid self-convergence") {
  std::vector<double> gaps;
  for (std::size_t n : {100, 200, 400}) {
    const Grid1D gc(-2.5, 2.5, n), gf(-2.5, 2.5, 2 * n);
    const double dt = 1.0 / static_cast<double>(n);
    const auto a = solve_pde(leader_follower(), two_species(gc), 1.0, dt).snapshots.back();
    const auto b = solve_pde(leader_follower(), two_species(gf), 1.0, dt / 2.0).snapshots.back();
    double gap = 0.0;
    for (std::size_t h = 0; h < 2; ++h) gap += l1(a.rho[h], restrict_pairs(b.rho[h]), gc.dx());
    gaps.push_back(gap);
  }
  INFO(gaps[0] << " " << gaps[1] << " " << gaps[2]);
  CHECK(gaps[0] > gaps[1]);
  CHECK(gaps[1] > gaps[2]);
}

TEST_CASE("semi-discrete right-hand side matches the two-species system") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Grid1D g(-2.0, 2.0, 30);
  const auto spec = leader_follower();
  const PdeSolver solver(spec, g);
  for (int t = 0; t < 20; ++t) {
    GriddedDensities r(g, 2);
    for (auto& f : r.rho)
      for (auto& v : f) v = u(rng);
    const auto out = solver.rhs(r);
    const double dx = g.dx();
    const std::size_t n = g.n_cells;
    // v = K^F * mu^F + K^L * mu^L at faces; outer faces closed.
    std::vector<double> v(n + 1, 0.0);
    for (std::size_t f = 1; f < n; ++f)
      for (std::size_t j = 0; j < n; ++j) {
        const double z = g.face(f) - g.center(j);
        v[f] += -1.0 * z * std::exp(-z * z / (2 * 0.49)) * r.rho[0][j] * dx;
        v[f] += -2.0 * z * std::exp(-z * z / 2.0) * r.rho[1][j] * dx;
      }
    for (std::size_t j = 0; j < n; ++j) {
      const double x = g.center(j);
      double eF = 0.0, eL = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double z = x - g.center(i);
        eL += std::exp(-z * z / (2 * 0.16)) * r.rho[1][i] * dx;
        eF += std::exp(-z * z / (2 * 0.36)) * r.rho[0][i] * dx;
      }
      const double aF = (0.2 + 1.5 * eL) / (1.0 + x * x);
      const double aL = 0.1 + 0.5 * eF;
      for (std::size_t h = 0; h < 2; ++h) {
        auto flux = [&](std::size_t f) {
          if (f == 0 || f == n) return 0.0;
          return v[f] > 0 ? v[f] * r.rho[h][f - 1] : v[f] * r.rho[h][f];
        };
        double ref = -(flux(j + 1) - flux(j)) / dx;
        ref += h == 0 ? -aF * r.rho[0][j] + aL * r.rho[1][j] : aF * r.rho[0][j] - aL * r.rho[1][j];
        CHECK(out.rho[h][j] == doctest::Approx(ref).epsilon(1e-13).scale(1.0));
      }
    }
  }
}

TEST_CASE("lift_initial_datum examples") {
  DiscreteSpatialMeasure f(1), l(1);
  const double zero = 0.0;
  f.add(std::span<const double>(&zero, 1), 0.3);
  l.add(std::span<const double>(&zero, 1), 0.7);
  const auto lifted = lift_initial_datum({f, l});
  REQUIRE(lifted.states.size() == 1);
  CHECK(lifted.states[0].x[0] == 0.0);
  CHECK(lifted.states[0].lambda[0] == doctest::Approx(0.3));
  CHECK(lifted.weights[0] == doctest::Approx(1.0));

  const Grid1D g(-2.5, 2.5, 50);
  auto only_f = two_species(g);
  for (std::size_t j = 0; j < g.n_cells; ++j) {
    only_f.rho[0][j] += only_f.rho[1][j];
    only_f.rho[1][j] = 0.0;
  }
  for (const auto& s : lift_initial_datum(only_f).states) CHECK(s.lambda[0] == 1.0);

  CHECK_THROWS(lift_initial_datum({f}));
}

TEST_CASE("sampled lifted measure reproduces the label marginals") {
  const Grid1D g(-2.5, 2.5, 100);
  const auto r = two_species(g);
  const auto lifted = lift_initial_datum(r);
  std::mt19937_64 rng(11);
  const std::size_t N = 10000;
  const auto p = sample_lifted(lifted, N, rng);
  const auto m = label_marginals(p);
  for (std::size_t h = 0; h < 2; ++h) {
    const double target = r.mass(h);
    // lambda_x in [0,1] per agent, so the sample mean has sd <= 0.5 / sqrt(N).
    CHECK(std::abs(m[h].mass() - target) <= 4.0 * 0.5 / std::sqrt(static_cast<double>(N)));
    double mean = 0.0, tmean = 0.0;
    for (std::size_t i = 0; i < m[h].size(); ++i) mean += m[h].weight(i) * m[h].position(i)[0];
    for (std::size_t j = 0; j < g.n_cells; ++j) tmean += r.rho[h][j] * g.dx() * g.center(j);
    CHECK(std::abs(mean - tmean) <= 4.0 * 2.5 / std::sqrt(static_cast<double>(N)));
  }

  const auto q = quantile_lifted(lifted, 512);
  const auto mq = label_marginals(q);
  for (std::size_t h = 0; h < 2; ++h) {
    const auto mu = r.as_measure(h);
    CHECK(bl_distance(mq[h], mu) < 0.02);
  }
}

TEST_CASE("weak-form residual") {
  const Grid1D g0(-2.5, 2.5, 100);
  const PdeSolver frozen(ModelSpec(1, 2), g0);
  const auto still = solve_pde(frozen, two_species(g0), 0.5, 0.05);
  CHECK(weak_form_residual(still, frozen, default_bumps(g0, 6)).max_residual <= 1e-13);

  std::vector<double> res;
  for (std::size_t n : {100, 200, 400}) {
    const Grid1D g(-2.5, 2.5, n);
    const PdeSolver solver(leader_follower(), g);
    const auto sol = solve_pde(solver, two_species(g), 1.0, 1.0 / static_cast<double>(n));
    res.push_back(weak_form_residual(sol, solver, default_bumps(g, 6)).max_residual);
  }
  for (std::size_t i = 0; i + 1 < res.size(); ++i) {
    const double ratio = res[i + 1] / res[i];
    INFO(ratio);
    CHECK(ratio >= 0.35);
    CHECK(ratio <= 0.65);
  }

  BumpTest b{0.5, 0.25};
  CHECK(b.value(0.5) == 1.0);
  CHECK(b.value(0.75) == 0.0);
  const double h = 1e-6;
  CHECK(b.derivative(0.6) == doctest::Approx((b.value(0.6 + h) - b.value(0.6 - h)) / (2 * h)).epsilon(1e-6));
}
