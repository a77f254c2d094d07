#include "mflab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mflab/metrics.hpp"

namespace mflab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw std::invalid_argument("config key '" + key + "': '" + v + "' is not a number");
  return x;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x < 0.0 || x != std::floor(x)) throw std::invalid_argument("config key '" + key + "': expected a nonnegative integer");
  return static_cast<std::size_t>(x);
}

const std::set<std::string> kSections = {"model", "init", "sim", "grid", "pde", "experiment"};

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

// ---------------------------------------------------------------- config

Config Config::parse(std::istream& is) {
  Config c;
  std::string line;
  std::size_t no = 0;
  while (std::getline(is, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(no) + ": empty key");
    if (c.has(key)) throw std::invalid_argument("config line " + std::to_string(no) + ": duplicate key '" + key + "'");
    c.set(key, value);
  }
  return c;
}

Config Config::parse_string(const std::string& text) {
  std::istringstream is(text);
  return parse(is);
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  return parse(is);
}

const std::string& Config::get(const std::string& key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) throw std::invalid_argument("missing config key '" + key + "'");
  return it->second;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

double Config::get_double(const std::string& key) const { return to_double(key, get(key)); }

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
  return has(key) ? to_size(key, get(key)) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config key '" + key + "': expected true or false");
}

std::vector<double> Config::get_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split(get(key), ',')) out.push_back(to_double(key, item));
  return out;
}

std::vector<std::size_t> Config::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& item : split(get(key), ',')) out.push_back(to_size(key, item));
  return out;
}

void Config::set(const std::string& key, const std::string& value) {
  const auto dot = key.find('.');
  if (dot == std::string::npos || !kSections.count(key.substr(0, dot)))
    throw std::invalid_argument("config key '" + key + "' must start with model., init., sim., grid., pde. or experiment.");
  kv_[key] = value;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : kv_) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t Config::hash() const { return fnv1a(canonical()); }

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------- model

std::vector<std::string> label_names(const Config& cfg, std::size_t H) {
  std::vector<std::string> names;
  if (cfg.has("model.labels")) {
    names = split(cfg.get("model.labels"), ',');
    if (names.size() != H) throw std::invalid_argument("model.labels must name exactly model.H labels");
    if (std::set<std::string>(names.begin(), names.end()).size() != H)
      throw std::invalid_argument("model.labels must be distinct");
  } else {
    for (std::size_t h = 0; h < H; ++h) names.push_back(std::to_string(h + 1));
  }
  return names;
}

bool is_game_model(const Config& cfg) {
  const auto t = cfg.get("model.type", "kernel");
  if (t == "game") return true;
  if (t == "kernel") return false;
  throw std::invalid_argument("unknown model.type '" + t + "' (expected kernel or game)");
}

namespace {

KernelSpec kernel_at(const Config& cfg, const std::string& prefix, std::set<std::string>& used) {
  used.insert(prefix + "family");
  const auto fam = parse_kernel_family(cfg.get(prefix + "family"));
  auto num = [&](const std::string& name, double fallback) {
    used.insert(prefix + name);
    return cfg.get_double(prefix + name, fallback);
  };
  switch (fam) {
    case KernelFamily::Zero: return KernelSpec::zero();
    case KernelFamily::LinearAttraction: return KernelSpec::linear_attraction(num("a", 1.0));
    case KernelFamily::Gaussian: return KernelSpec::gaussian(num("a", 1.0), num("sigma", 1.0));
  }
  return KernelSpec::zero();
}

void reject_unused(const Config& cfg, const std::string& section, const std::set<std::string>& used) {
  for (const auto& [k, v] : cfg.entries())
    if (k.rfind(section, 0) == 0 && !used.count(k)) throw std::invalid_argument("unrecognized config key '" + k + "'");
}

}  // namespace

ModelSpec model_from_config(const Config& cfg) {
  if (is_game_model(cfg)) throw std::invalid_argument("model.type = game has no kernel ModelSpec");
  std::set<std::string> used = {"model.type", "model.d", "model.H", "model.labels", "model.mode"};
  const std::size_t d = cfg.get_size("model.d", 1);
  const std::size_t H = cfg.get_size("model.H", 2);
  if (H == 0) throw std::invalid_argument("model.H must be positive");
  const auto names = label_names(cfg, H);
  ModelSpec spec(d, H);
  spec.mode = parse_velocity_mode(cfg.get("model.mode", "label_independent"));
  for (std::size_t h = 0; h < H; ++h) {
    const std::string p = "model.kernel." + names[h] + ".";
    if (cfg.has(p + "family")) spec.set_species_kernel(h, kernel_at(cfg, p, used));
  }
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t k = 0; k < H; ++k) {
      const std::string p = "model.kernel." + names[h] + "." + names[k] + ".";
      if (cfg.has(p + "family")) spec.set_kernel(h, k, kernel_at(cfg, p, used));
    }
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t k = 0; k < H; ++k) {
      if (h == k) continue;
      const std::string p = "model.rate." + names[h] + "." + names[k] + ".";
      bool any = false;
      for (const char* f : {"a0", "c", "sigma", "gain"})
        if (cfg.has(p + f)) {
          any = true;
          used.insert(p + f);
        }
      if (!any) continue;
      PairRate r;
      r.a0 = cfg.get_double(p + "a0", 0.0);
      if (cfg.has(p + "c")) r.c = cfg.get_list(p + "c");
      r.sigma = cfg.get_double(p + "sigma", 1.0);
      r.gain = parse_gain(cfg.get(p + "gain", "constant"));
      spec.rates.set(h, k, r);
    }
  reject_unused(cfg, "model.", used);
  spec.validate();
  return spec;
}

GameKernelSpec game_from_config(const Config& cfg) {
  if (!is_game_model(cfg)) throw std::invalid_argument("model.type must be game");
  std::set<std::string> used = {"model.type", "model.d", "model.game.nodes"};
  auto num = [&](const std::string& key, double fallback) {
    used.insert(key);
    return cfg.get_double(key, fallback);
  };
  GameKernelSpec s;
  s.d = cfg.get_size("model.d", 1);
  s.nodes = cfg.get_size("model.game.nodes", 8);
  used.insert("model.game.J.family");
  s.J.family = parse_j_family(cfg.get("model.game.J.family", "zero"));
  s.J.c = num("model.game.J.c", 0.0);
  s.J.c0 = num("model.game.J.c0", 0.0);
  s.J.sigma = num("model.game.J.sigma", 1.0);
  used.insert("model.game.V.family");
  const auto vf = parse_v_family(cfg.get("model.game.V.family", "zero"));
  const double a = num("model.game.V.a", 1.0);
  const double sigma = num("model.game.V.sigma", 1.0);
  switch (vf) {
    case VFamily::Zero: s.V = VelocityKernel::zero(); break;
    case VFamily::Attraction: s.V = VelocityKernel::attraction(a); break;
    case VFamily::Separable: s.V = VelocityKernel::separable(a); break;
    case VFamily::GaussianSpace: s.V = VelocityKernel::gaussian_space(a, sigma); break;
  }
  reject_unused(cfg, "model.", used);
  return s;
}

std::unique_ptr<Dynamics> dynamics_from_config(const Config& cfg) {
  if (is_game_model(cfg)) return std::make_unique<GameDynamics>(game_from_config(cfg));
  return std::make_unique<KernelDynamics>(model_from_config(cfg));
}

std::unique_ptr<Dynamics> frozen_dynamics_from_config(const Config& cfg) {
  if (is_game_model(cfg)) {
    auto s = game_from_config(cfg);
    s.J = TransitionKernel{};
    s.V = VelocityKernel::zero();
    return std::make_unique<GameDynamics>(s);
  }
  const auto spec = model_from_config(cfg);
  ModelSpec frozen(spec.d, spec.H);
  frozen.label_space = spec.label_space;
  return std::make_unique<KernelDynamics>(frozen);
}

SimConfig sim_from_config(const Config& cfg) {
  SimConfig s;
  s.dt = cfg.get_double("sim.dt", s.dt);
  s.T = cfg.get_double("sim.T", s.T);
  s.record_every = cfg.get_size("sim.record_every", s.record_every);
  s.seed = cfg.get_size("experiment.seed", 1);
  return s;
}

Grid1D grid_from_config(const Config& cfg) {
  return Grid1D(cfg.get_double("grid.x_min"), cfg.get_double("grid.x_max"), cfg.get_size("grid.n_cells", 200));
}

// ---------------------------------------------------------------- initial law

namespace {

std::size_t label_count(const Config& cfg) {
  return is_game_model(cfg) ? cfg.get_size("model.game.nodes", 8) : cfg.get_size("model.H", 2);
}

std::vector<double> mean_vector(const Config& cfg, const std::string& key, std::size_t d) {
  if (!cfg.has(key)) return std::vector<double>(d, 0.0);
  auto m = cfg.get_list(key);
  if (m.size() == 1 && d > 1) m.assign(d, m[0]);
  if (m.size() != d) throw std::invalid_argument("config key '" + key + "' must have model.d entries");
  return m;
}

double norm_of(std::span<const double> x) { return euclidean_norm(x); }

/// Isotropic Gaussian density in R^d.
double gauss_density(std::span<const double> x, const std::vector<double>& mean, double s) {
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - mean[i]) * (x[i] - mean[i]);
  const double d = static_cast<double>(x.size());
  return std::exp(-r2 / (2.0 * s * s)) / std::pow(s * std::sqrt(2.0 * std::numbers::pi), d);
}

void draw_truncated(const std::vector<double>& mean, double s, double radius, std::mt19937_64& rng,
                    std::span<double> out) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (int tries = 0; tries < 1000000; ++tries) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mean[i] + s * g(rng);
    if (norm_of(out) <= radius) return;
  }
  throw std::runtime_error("initial law: truncation radius leaves almost no mass");
}

}  // namespace

std::vector<double> InitialLaw::label_densities(std::span<const double> x) const {
  std::vector<double> out(H, 0.0);
  if (kind == Kind::Mixture) {
    for (const auto& c : components) out[c.label] += c.weight * gauss_density(x, c.mean, c.std);
    return out;
  }
  const double p = gauss_density(x, mean, std);
  if (kind == Kind::Dirichlet) {
    const double a = std::accumulate(lambda.begin(), lambda.end(), 0.0);
    for (std::size_t h = 0; h < H; ++h) out[h] = p * lambda[h] / a;
    return out;
  }
  const auto l = label_vector(x);
  for (std::size_t h = 0; h < H; ++h) out[h] = p * l[h];
  return out;
}

std::vector<double> InitialLaw::label_vector(std::span<const double> x, std::mt19937_64* rng) const {
  switch (kind) {
    case Kind::Mixture: {
      auto dens = label_densities(x);
      const double s = std::accumulate(dens.begin(), dens.end(), 0.0);
      if (!(s > 0.0)) {
        // Every density underflowed: use the nearest component.
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (const auto& c : components) {
          const double dd = euclidean_distance(x, c.mean) / c.std;
          if (dd < bd) {
            bd = dd;
            best = c.label;
          }
        }
        std::vector<double> e(H, 0.0);
        e[best] = 1.0;
        return e;
      }
      for (auto& v : dens) v /= s;
      return dens;
    }
    case Kind::Profile: {
      const double c = profile_center + profile_slope * std::tanh(x[0]);
      const auto v = cell_integrated_gaussian(H, c, profile_width);
      return {v.values().begin(), v.values().end()};
    }
    case Kind::Fixed: return lambda;
    case Kind::Dirichlet: {
      std::mt19937_64 local(0);
      auto& r = rng ? *rng : local;
      std::vector<double> out(H);
      double s = 0.0;
      for (std::size_t h = 0; h < H; ++h) {
        std::gamma_distribution<double> g(lambda[h], 1.0);
        out[h] = g(r);
        s += out[h];
      }
      for (auto& v : out) v /= s;
      return out;
    }
  }
  return lambda;
}

double InitialLaw::state_radius(const LabelSpace& labels) const {
  std::vector<double> e(labels.size(), 0.0);
  e[0] = 1.0;
  return radius + bl_norm(e, labels);
}

InitialLaw init_from_config(const Config& cfg) {
  InitialLaw law;
  law.d = cfg.get_size("model.d", 1);
  law.H = label_count(cfg);
  law.radius = cfg.get_double("init.radius", 3.0);
  if (!(law.radius > 0.0)) throw std::invalid_argument("init.radius must be positive");
  const auto kind = cfg.get("init.kind", "fixed");
  law.mean = mean_vector(cfg, "init.mean", law.d);
  law.std = cfg.get_double("init.std", 1.0);
  if (!(law.std > 0.0)) throw std::invalid_argument("init.std must be positive");
  if (kind == "mixture") {
    law.kind = InitialLaw::Kind::Mixture;
    const auto names = is_game_model(cfg) ? std::vector<std::string>{} : label_names(cfg, law.H);
    for (std::size_t i = 1;; ++i) {
      const std::string p = "init.component." + std::to_string(i) + ".";
      if (!cfg.has(p + "label")) break;
      InitialLaw::Component c;
      const auto& lab = cfg.get(p + "label");
      const auto it = std::find(names.begin(), names.end(), lab);
      if (it == names.end()) throw std::invalid_argument("config key '" + p + "label': unknown label '" + lab + "'");
      c.label = static_cast<std::size_t>(it - names.begin());
      c.weight = cfg.get_double(p + "weight", 1.0);
      c.mean = mean_vector(cfg, p + "mean", law.d);
      c.std = cfg.get_double(p + "std", 1.0);
      if (!(c.weight > 0.0) || !(c.std > 0.0))
        throw std::invalid_argument("init component " + std::to_string(i) + " needs positive weight and std");
      law.components.push_back(c);
    }
    if (law.components.empty()) throw std::invalid_argument("init.kind = mixture needs init.component.1.label");
    double total = 0.0;
    for (const auto& c : law.components) total += c.weight;
    for (auto& c : law.components) c.weight /= total;
  } else if (kind == "profile") {
    law.kind = InitialLaw::Kind::Profile;
    law.profile_center = cfg.get_double("init.profile.center", 0.5);
    law.profile_slope = cfg.get_double("init.profile.slope", 0.0);
    law.profile_width = cfg.get_double("init.profile.width", 0.2);
  } else if (kind == "fixed") {
    law.kind = InitialLaw::Kind::Fixed;
    law.lambda = cfg.has("init.lambda") ? cfg.get_list("init.lambda") : std::vector<double>(law.H, 1.0 / law.H);
    if (law.lambda.size() != law.H) throw std::invalid_argument("init.lambda must have one entry per label");
    const SimplexVector l(law.lambda);
    law.lambda.assign(l.values().begin(), l.values().end());
  } else if (kind == "dirichlet") {
    law.kind = InitialLaw::Kind::Dirichlet;
    law.lambda = cfg.has("init.alpha") ? cfg.get_list("init.alpha") : std::vector<double>(law.H, 1.0);
    if (law.lambda.size() != law.H) throw std::invalid_argument("init.alpha must have one entry per label");
    for (double a : law.lambda)
      if (!(a > 0.0)) throw std::invalid_argument("init.alpha entries must be positive");
  } else {
    throw std::invalid_argument("unknown init.kind '" + kind + "' (expected mixture, profile, fixed or dirichlet)");
  }
  return law;
}

EmpiricalMeasure sample_initial(const InitialLaw& law, std::size_t n, std::mt19937_64& rng) {
  EmpiricalMeasure p(law.d, law.H);
  std::vector<double> x(law.d);
  std::vector<double> w;
  for (const auto& c : law.components) w.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (law.kind == InitialLaw::Kind::Mixture) {
      // Rejection redraws the component as well as the position.
      for (int tries = 0;; ++tries) {
        if (tries == 1000000) throw std::runtime_error("initial law: truncation radius leaves almost no mass");
        const auto& c = law.components[pick(rng)];
        for (std::size_t k = 0; k < law.d; ++k) x[k] = c.mean[k] + c.std * g(rng);
        if (norm_of(x) <= law.radius) break;
      }
    } else {
      draw_truncated(law.mean, law.std, law.radius, rng, x);
    }
    const auto l = law.label_vector(x, &rng);
    p.push_back_unchecked(x, SimplexVector(l).values());
  }
  return p;
}

EmpiricalMeasure quantile_initial(const InitialLaw& law, std::size_t n) {
  if (law.d != 1) throw std::invalid_argument("quantile initialization needs d = 1");
  const double r = law.radius;
  std::vector<std::pair<double, std::pair<double, double>>> comps;  // weight, (mean, std)
  if (law.kind == InitialLaw::Kind::Mixture) {
    for (const auto& c : law.components) comps.push_back({c.weight, {c.mean[0], c.std}});
  } else {
    comps.push_back({1.0, {law.mean[0], law.std}});
  }
  auto cdf = [&](double x) {
    double s = 0.0;
    for (const auto& [w, ms] : comps)
      s += w * (normal_cdf((x - ms.first) / ms.second) - normal_cdf((-r - ms.first) / ms.second));
    return s;
  };
  const double total = cdf(r);
  if (!(total > 0.0)) throw std::runtime_error("initial law: truncation radius leaves almost no mass");
  EmpiricalMeasure p(1, law.H);
  std::mt19937_64 rng(0);
  double lo_prev = -r;
  for (std::size_t i = 0; i < n; ++i) {
    const double target = (static_cast<double>(i) + 0.5) / static_cast<double>(n) * total;
    double lo = lo_prev, hi = r;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) < target ? lo : hi) = mid;
    }
    const double x = 0.5 * (lo + hi);
    lo_prev = lo;
    const auto l = law.label_vector(std::span<const double>(&x, 1), &rng);
    p.push_back_unchecked(std::span<const double>(&x, 1), SimplexVector(l).values());
  }
  return p;
}

GriddedDensities initial_densities(const InitialLaw& law, const Grid1D& grid) {
  if (law.d != 1) throw std::invalid_argument("gridded initial densities need d = 1");
  auto rho = GriddedDensities::from_function(grid, law.H, [&](double x) {
    if (std::abs(x) > law.radius) return std::vector<double>(law.H, 0.0);
    return law.label_densities(std::span<const double>(&x, 1));
  });
  const double m = rho.total_mass();
  if (!(m > 0.0)) throw std::runtime_error("initial law puts no mass on the grid");
  for (auto& f : rho.rho)
    for (auto& v : f) v /= m;
  return rho;
}

EmpiricalMeasure perturb_positions(const EmpiricalMeasure& p, double eps, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  EmpiricalMeasure out(p.dim(), p.labels());
  std::vector<double> x(p.dim()), e(p.dim());
  for (std::size_t i = 0; i < p.size(); ++i) {
    double n = 0.0;
    do {
      n = 0.0;
      for (auto& v : e) {
        v = g(rng);
        n += v * v;
      }
    } while (n == 0.0);
    n = std::sqrt(n);
    const auto xi = p.position(i);
    for (std::size_t k = 0; k < p.dim(); ++k) x[k] = xi[k] + eps * e[k] / n;
    out.push_back_unchecked(x, p.lambda(i));
  }
  return out;
}

EmpiricalMeasure subsample(const EmpiricalMeasure& p, std::size_t m, std::mt19937_64& rng) {
  if (m >= p.size()) return p;
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> u(i, idx.size() - 1);
    std::swap(idx[i], idx[u(rng)]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  EmpiricalMeasure out(p.dim(), p.labels());
  for (auto i : idx) out.push_back_unchecked(p.position(i), p.lambda(i));
  return out;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& f) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------- reports

void Report::add_row(const std::vector<double>& values) {
  std::vector<std::string> row;
  for (double v : values) row.push_back(format_real(v));
  rows.push_back(std::move(row));
}

void Report::note(const std::string& key, double value) { notes.emplace_back(key, format_real(value)); }

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string render_svg(const Plot& plot) {
  const double W = 720, Hh = 440, left = 80, right = 180, top = 40, bottom = 60;
  const double pw = W - left - right, ph = Hh - top - bottom;
  auto tx = [&](double v) { return plot.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return plot.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!plot.log_x || x > 0.0) && (!plot.log_y || y > 0.0);
  };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : plot.series)
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (usable(s.x[i], s.y[i])) {
        x0 = std::min(x0, tx(s.x[i]));
        x1 = std::max(x1, tx(s.x[i]));
        y0 = std::min(y0, ty(s.y[i]));
        y1 = std::max(y1, ty(s.y[i]));
      }
  if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (x1 - x0 < 1e-300) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-300) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto sx = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * pw; };
  auto sy = [&](double v) { return top + ph - (ty(v) - y0) / (y1 - y0) * ph; };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hh << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(plot.title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    const double X = left + pw * i / 4.0, Y = top + ph - ph * i / 4.0;
    const double vx = plot.log_x ? std::pow(10.0, fx) : fx, vy = plot.log_y ? std::pow(10.0, fy) : fy;
    os << "<line x1=\"" << px(X) << "\" y1=\"" << px(top + ph) << "\" x2=\"" << px(X) << "\" y2=\"" << px(top + ph + 5)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px(X) << "\" y=\"" << px(top + ph + 18) << "\" text-anchor=\"middle\">" << fmt(vx) << "</text>\n";
    os << "<line x1=\"" << px(left - 5) << "\" y1=\"" << px(Y) << "\" x2=\"" << px(left) << "\" y2=\"" << px(Y)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px(left - 8) << "\" y=\"" << px(Y + 4) << "\" text-anchor=\"end\">" << fmt(vy) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << Hh - 15 << "\" text-anchor=\"middle\">" << xml_escape(plot.x_label)
     << (plot.log_x ? " (log)" : "") << "</text>\n";
  os << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << xml_escape(plot.y_label) << (plot.log_y ? " (log)" : "") << "</text>\n";
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* col = colors[k % 8];
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (usable(s.x[i], s.y[i])) os << px(sx(s.x[i])) << "," << px(sy(s.y[i])) << " ";
    os << "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << px(left + pw + 10) << "\" y1=\"" << px(ly - 4) << "\" x2=\"" << px(left + pw + 30) << "\" y2=\""
       << px(ly - 4) << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << px(left + pw + 35) << "\" y=\"" << px(ly) << "\">" << xml_escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_report_csv(std::ostream& os, const Config& cfg, const Report& r) {
  os << "# command = " << r.command << "\n";
  os << "# config_hash = " << hex64(cfg.hash()) << "\n";
  os << "# M = " << format_real(r.constants.M) << "\n";
  os << "# L_R = " << format_real(r.constants.L_R) << "\n";
  os << "# delta_R = " << format_real(r.constants.delta_R) << "\n";
  os << "# R = " << format_real(r.constants.R) << "\n";
  for (const auto& [k, v] : r.notes) os << "# " << k << " = " << v << "\n";
  for (std::size_t i = 0; i < r.columns.size(); ++i) os << (i ? "," : "") << r.columns[i];
  os << "\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
}

void write_report(const std::filesystem::path& dir, const Config& cfg, const Report& r) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  write_report_csv(csv, cfg, r);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
    os << text;
  };
  put("report.csv", csv.str());
  put("report.svg", render_svg(r.plot));
  std::ostringstream m;
  m << "command = " << r.command << "\n";
  m << "verdict = " << (r.passed ? "pass" : "fail") << "\n";
  if (!r.verdict.empty()) m << "detail = " << r.verdict << "\n";
  m << "config_hash = " << hex64(cfg.hash()) << "\n";
  m << "report_csv_fnv1a = " << hex64(fnv1a(csv.str())) << "\n";
  m << "\n[constants]\n";
  m << "R = " << format_real(r.constants.R) << "\n";
  m << "M_v = " << format_real(r.constants.M_v) << "\n";
  m << "M_T = " << format_real(r.constants.M_T) << "\n";
  m << "M = " << format_real(r.constants.M) << "\n";
  m << "L_v = " << format_real(r.constants.L_v) << "\n";
  m << "L_T = " << format_real(r.constants.L_T) << "\n";
  m << "L_R = " << format_real(r.constants.L_R) << "\n";
  m << "delta_R = " << format_real(r.constants.delta_R) << "\n";
  m << "\n[notes]\n";
  for (const auto& [k, v] : r.notes) m << k << " = " << v << "\n";
  m << "\n[config]\n" << cfg.canonical();
  put("manifest.txt", m.str());
  for (const auto& [name, text] : r.files) put(name, text);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs at least two points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("slope fit needs positive values");
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

Config with_overrides(Config cfg, const RunOptions& opt) {
  if (opt.seed) cfg.set("experiment.seed", std::to_string(*opt.seed));
  return cfg;
}

}  // namespace mflab
