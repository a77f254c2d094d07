#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "mflab/experiments.hpp"
#include "mflab/metrics.hpp"

using namespace mflab;

namespace {

const std::filesystem::path kConfigs = MFLAB_CONFIG_DIR;

Config b1() { return Config::load(kConfigs / "b1_leader_follower.cfg"); }

std::string csv_of(const Config& cfg, const Report& r) {
  std::ostringstream os;
  write_report_csv(os, cfg, r);
  return os.str();
}

double phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

TEST_CASE("config parsing") {
  const auto c = Config::parse_string(
      "# comment\n"
      "model.H = 3   # trailing\n"
      "\n"
      "sim.dt=0.5\n"
      "experiment.N = 1, 2,4\n"
      "experiment.frozen = true\n");
  CHECK(c.get_size("model.H", 0) == 3);
  CHECK(c.get_double("sim.dt") == 0.5);
  CHECK(c.get_size_list("experiment.N") == std::vector<std::size_t>{1, 2, 4});
  CHECK(c.get_bool("experiment.frozen", false));
  CHECK(c.get_double("sim.T", 7.0) == 7.0);
  CHECK_THROWS(c.get("sim.T"));
  CHECK_THROWS(Config::parse_string("model.H = 1\nmodel.H = 2\n"));
  CHECK_THROWS(Config::parse_string("solver.dt = 1\n"));
  CHECK_THROWS(Config::parse_string("model.H\n"));
  CHECK_THROWS(Config::parse_string("sim.dt = fast\n").get_double("sim.dt"));
  CHECK_THROWS(Config::parse_string("model.H = 2.5\n").get_size("model.H", 0));
}

TEST_CASE("config hash ignores order and formatting") {
  const auto a = Config::parse_string("model.H = 2\nsim.dt = 0.1\n");
  const auto b = Config::parse_string("sim.dt   =   0.1\n# x\nmodel.H=2\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != Config::parse_string("model.H = 2\nsim.dt = 0.2\n").hash());
}

TEST_CASE("FNV-1a reference vectors") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);
  CHECK(hex64(0xabcull) == "0000000000000abc");
}

TEST_CASE("B1 config builds the leader-follower model") {
  const auto spec = model_from_config(b1());
  CHECK(spec.H == 2);
  CHECK(spec.mode == VelocityMode::LabelIndependent);
  CHECK(spec.kernel(0, 1) == KernelSpec::gaussian(1.0, 0.7));
  CHECK(spec.kernel(1, 0) == KernelSpec::gaussian(2.0, 1.0));
  const auto& fl = spec.rates.pair(0, 1);
  CHECK(fl.a0 == 0.2);
  CHECK(fl.c == std::vector<double>{0.0, 1.5});
  CHECK(fl.sigma == 0.4);
  CHECK(fl.gain == Gain::Decay);
  CHECK(spec.rates.pair(1, 0).gain == Gain::Constant);
}

TEST_CASE("model config errors") {
  auto c = b1();
  c.set("model.kernel.F.family", "coulomb");
  CHECK_THROWS(model_from_config(c));
  auto d = b1();
  d.set("model.kernel.F.sigmaa", "1");
  CHECK_THROWS_WITH(model_from_config(d), doctest::Contains("unrecognized"));
  auto e = b1();
  e.set("model.rate.F.L.c", "1");
  CHECK_THROWS(model_from_config(e));
  auto f = b1();
  f.set("model.labels", "F,F");
  CHECK_THROWS(model_from_config(f));
  auto g = b1();
  g.set("experiment.N", "64, 64, 128");
  CHECK_THROWS_WITH(cmd_converge(g), doctest::Contains("strictly increasing"));
}

TEST_CASE("game config") {
  const auto c = Config::load(kConfigs / "b3_continuum_game.cfg");
  CHECK(is_game_model(c));
  const auto s = game_from_config(c);
  CHECK(s.nodes == 16);
  CHECK(s.J.family == JFamily::Separable);
  CHECK(s.J.c == 1.5);
  CHECK(s.J.c0 == 0.2);
  CHECK(s.V.family == VFamily::Separable);
  CHECK_THROWS(model_from_config(c));
}

TEST_CASE("mixture law: lifted labels and truncation") {
  const auto law = init_from_config(b1());
  REQUIRE(law.kind == InitialLaw::Kind::Mixture);
  const double x = 0.3;
  auto g = [](double y, double m, double s) { return std::exp(-(y - m) * (y - m) / (2 * s * s)) / s; };
  const double f = 0.4 * g(x, -0.7, 0.3) + 0.4 * g(x, 0.7, 0.3), l = 0.2 * g(x, 0.2, 0.25);
  const auto lam = law.label_vector(std::span<const double>(&x, 1));
  CHECK(lam[0] == doctest::Approx(f / (f + l)).epsilon(1e-13));

  std::mt19937_64 rng(5);
  const auto p = sample_initial(law, 4000, rng);
  double mass_l = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(std::abs(p.position(i)[0]) <= 2.0);
    mass_l += p.lambda(i)[1] / 4000.0;
  }
  CHECK(std::abs(mass_l - 0.2) < 4.0 * 0.5 / std::sqrt(4000.0));
  CHECK(law.state_radius(LabelSpace::indexed(2)) == doctest::Approx(3.0));
}

TEST_CASE("quantile initialization follows the truncated CDF") {
  auto c = Config::parse_string(
      "model.H = 2\ninit.kind = fixed\ninit.mean = 0.5\ninit.std = 1\ninit.radius = 1.5\ninit.lambda = 0.25, 0.75\n");
  const auto law = init_from_config(c);
  const auto p = quantile_initial(law, 100);
  const double lo = phi(-1.5 - 0.5), hi = phi(1.5 - 0.5);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double u = (phi(p.position(i)[0] - 0.5) - lo) / (hi - lo);
    CHECK(u == doctest::Approx((i + 0.5) / 100.0).epsilon(1e-10));
    CHECK(p.lambda(i)[1] == 0.75);
  }
}

TEST_CASE("gridded initial densities carry the component weights") {
  const auto cfg = b1();
  const auto law = init_from_config(cfg);
  const auto rho = initial_densities(law, grid_from_config(cfg));
  CHECK(rho.total_mass() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rho.mass(1) == doctest::Approx(0.2).epsilon(1e-3));
}

TEST_CASE("profile and dirichlet laws") {
  const auto law = init_from_config(Config::load(kConfigs / "b3_continuum_game.cfg"));
  const double x = 1.0;
  const auto lam = law.label_vector(std::span<const double>(&x, 1));
  const auto want = cell_integrated_gaussian(16, 0.5 + 0.3 * std::tanh(1.0), 0.2);
  for (std::size_t h = 0; h < 16; ++h) CHECK(lam[h] == want[h]);

  const auto d = init_from_config(Config::parse_string("model.H = 3\ninit.kind = dirichlet\ninit.alpha = 1, 2, 3\n"));
  std::mt19937_64 rng(3);
  const auto p = sample_initial(d, 5000, rng);
  double m2 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) m2 += p.lambda(i)[2] / 5000.0;
  // Var(lambda_3) = (3 * 3) / (36 * 7).
  CHECK(std::abs(m2 - 0.5) < 4.0 * std::sqrt(9.0 / 252.0 / 5000.0));
  CHECK_THROWS(init_from_config(Config::parse_string("init.kind = histogram\n")));
}

TEST_CASE("perturbation and subsampling") {
  const auto law = init_from_config(b1());
  std::mt19937_64 rng(1);
  const auto p = sample_initial(law, 50, rng);
  const auto q = perturb_positions(p, 1e-3, rng);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(std::abs(q.position(i)[0] - p.position(i)[0]) == doctest::Approx(1e-3).epsilon(1e-9));
    CHECK(std::equal(p.lambda(i).begin(), p.lambda(i).end(), q.lambda(i).begin()));
  }
  const auto s = subsample(p, 20, rng);
  CHECK(s.size() == 20);
  std::set<double> xs;
  for (std::size_t i = 0; i < s.size(); ++i) xs.insert(s.position(i)[0]);
  CHECK(xs.size() == 20);
}

TEST_CASE("log-log slope") {
  CHECK(loglog_slope({1, 2, 4, 8}, {3, 3 / std::sqrt(2.0), 1.5, 3 / std::sqrt(8.0)}) == doctest::Approx(-0.5));
  CHECK_THROWS(loglog_slope({1}, {1}));
}

TEST_CASE("SVG rendering") {
  Plot p{"a < b", "N", "e", true, true, {{"s", {1, 10, 100}, {1, 0.1, 0.01}}, {"zero", {1, 2}, {0, 0}}}};
  const auto svg = render_svg(p);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("a &lt; b") != std::string::npos);
  CHECK(std::count(svg.begin(), svg.end(), '\n') > 10);
}

TEST_CASE("reports are reproducible and carry hash and constants") {
  auto cfg = b1();
  cfg.set("sim.N", "64");
  cfg.set("experiment.seeds", "2");
  const auto a = cmd_stability(cfg, {std::nullopt, 1});
  const auto b = cmd_stability(cfg, {std::nullopt, 2});
  CHECK(csv_of(cfg, a) == csv_of(cfg, b));
  const auto c = cmd_stability(cfg, {7, 1});
  CHECK(csv_of(with_overrides(cfg, {7, 1}), c) != csv_of(cfg, a));
  const auto text = csv_of(cfg, a);
  CHECK(text.find("# config_hash = " + hex64(cfg.hash())) != std::string::npos);
  CHECK(text.find("# L_R = ") != std::string::npos);
  CHECK(text.find("# delta_R = ") != std::string::npos);

  const auto dir = std::filesystem::temp_directory_path() / "mflab_report_test";
  std::filesystem::remove_all(dir);
  write_report(dir, cfg, a);
  for (const char* f : {"report.csv", "report.svg", "manifest.txt"}) CHECK(std::filesystem::exists(dir / f));
  std::ifstream m(dir / "manifest.txt");
  std::stringstream ms;
  ms << m.rdbuf();
  CHECK(ms.str().find("report_csv_fnv1a = " + hex64(fnv1a(text))) != std::string::npos);
  CHECK(ms.str().find("[config]\n" + cfg.canonical()) != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("stability: identical inputs give a zero curve") {
  auto cfg = b1();
  cfg.set("sim.N", "64");
  cfg.set("experiment.seeds", "1");
  cfg.set("experiment.epsilon", "0");
  const auto r = cmd_stability(cfg);
  CHECK(r.passed);
  for (const auto& row : r.rows) CHECK(std::stod(row[2]) == 0.0);
}

TEST_CASE("converge: independent seeds differ and the atom cap is enforced") {
  auto cfg = b1();
  cfg.set("experiment.N", "32");
  cfg.set("experiment.seeds", "2");
  cfg.set("experiment.n_ref", "256");
  const auto r = cmd_converge(cfg);
  REQUIRE(r.rows.size() == 1);
  CHECK(std::stod(r.rows[0][3]) > 0.0);
  CHECK(std::stod(r.rows[0][3]) != std::stod(r.rows[0][4]));

  cfg.set("experiment.n_ref", "2040");
  cfg.set("experiment.subsample", "0");
  cfg.set("sim.T", "0.05");
  CHECK_THROWS_WITH(cmd_converge(cfg), doctest::Contains("subsample"));
  cfg.set("experiment.subsample", "128");
  const auto s = cmd_converge(cfg);
  CHECK(std::find(s.notes.begin(), s.notes.end(), std::pair<std::string, std::string>{"subsampled", "128"}) !=
        s.notes.end());
}

TEST_CASE("consistency rejects label-weighted kernels") {
  CHECK_THROWS_WITH(cmd_consistency(Config::load(kConfigs / "b2_label_chain.cfg")),
                    doctest::Contains("label-independent"));
  CHECK_THROWS(cmd_pde(Config::load(kConfigs / "b3_continuum_game.cfg")));
}

TEST_CASE("validate and simulate on the shipped configs") {
  for (const char* name : {"b1_leader_follower.cfg", "b2_label_chain.cfg", "b3_continuum_game.cfg"}) {
    auto cfg = Config::load(kConfigs / name);
    cfg.set("experiment.samples", "300");
    INFO(name);
    CHECK(cmd_validate(cfg).passed);
    CHECK(cmd_simulate(cfg).passed);
  }
}

TEST_CASE("particle and PDE references agree on the B1 monotonicity verdict") {
  auto a = b1();
  auto b = b1();
  b.set("experiment.reference", "pde");
  const auto ra = cmd_converge(a);
  const auto rb = cmd_converge(b);
  CHECK(ra.passed == rb.passed);
}
