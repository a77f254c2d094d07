#include "mflab/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "mflab/metrics.hpp"

namespace mflab {

namespace {

constexpr double kFlagSlack = 1.01;

using Rng = std::mt19937_64;

struct Sampler {
  Rng rng;
  std::size_t d, H;

  std::vector<double> direction() {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(d);
    double n = 0.0;
    for (auto& e : v) {
      e = g(rng);
      n += e * e;
    }
    n = std::sqrt(n);
    for (auto& e : v) e /= n;
    return v;
  }

  std::vector<double> simplex() {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> w(H);
    if (u(rng) < 0.3) {
      w[static_cast<std::size_t>(u(rng) * static_cast<double>(H)) % H] = 1.0;
      return w;
    }
    std::exponential_distribution<double> e(1.0);
    double s = 0.0;
    for (auto& v : w) s += (v = e(rng));
    for (auto& v : w) v /= s;
    return w;
  }

  std::vector<double> point(double radius) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto v = direction();
    const double r = radius * u(rng);
    for (auto& e : v) e *= r;
    return v;
  }

  // Agents in B_R^Y: ||lambda||_BL = 1, so |x| <= R - 1.
  AgentState agent(double R) {
    return AgentState{point(std::max(R - 1.0, 0.0)), SimplexVector(simplex())};
  }

  EmpiricalMeasure measure(double R, std::size_t n) {
    EmpiricalMeasure p(d, H);
    for (std::size_t i = 0; i < n; ++i) p.push_back(agent(R));
    return p;
  }

  double small() {
    std::uniform_real_distribution<double> u(-4.0, -1.0);
    return std::pow(10.0, u(rng));
  }

  // Nearby agent staying inside B_R^Y.
  AgentState perturb(const AgentState& y, double R, bool move_x, bool move_lambda) {
    AgentState z = y;
    if (move_x) {
      auto dir = direction();
      const double eps = small();
      for (std::size_t i = 0; i < d; ++i) z.x[i] += eps * dir[i];
      const double n = euclidean_norm(z.x), cap = std::max(R - 1.0, 0.0);
      if (n > cap && n > 0.0)
        for (auto& e : z.x) e *= cap / n;
    }
    if (move_lambda) {
      auto target = simplex();
      const double t = small();
      std::vector<double> w(H);
      for (std::size_t h = 0; h < H; ++h) w[h] = (1.0 - t) * y.lambda[h] + t * target[h];
      z.lambda = SimplexVector(w);
    }
    return z;
  }

  EmpiricalMeasure perturb(const EmpiricalMeasure& p, double R) {
    EmpiricalMeasure q(d, H);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto a = p.agent(i);
      q.push_back(u(rng) < 0.5 ? perturb(a, R, true, u(rng) < 0.5) : a);
    }
    return q;
  }
};

struct Field {
  std::vector<double> v;
  SignedLabelMeasure tl;
};

Field field(const Dynamics& dyn, const AgentState& y, const Marginals& m) {
  Field f;
  f.v.assign(dyn.dim(), 0.0);
  dyn.velocity(y.x, y.lambda.values(), m, f.v);
  f.tl = apply_adjoint(dyn.rate_matrix(y.x, m), y.lambda);
  return f;
}

double vdiff(const std::vector<double>& a, const std::vector<double>& b) { return euclidean_distance(a, b); }

double tdiff(const SignedLabelMeasure& a, const SignedLabelMeasure& b, const LabelSpace& labels) {
  SignedLabelMeasure d(a.size());
  for (std::size_t h = 0; h < a.size(); ++h) d[h] = a[h] - b[h];
  return bl_norm(d, labels);
}

double state_distance(const AgentState& a, const AgentState& b, const LabelSpace& labels) {
  SignedLabelMeasure d(a.lambda.size());
  for (std::size_t h = 0; h < d.size(); ++h) d[h] = a.lambda[h] - b.lambda[h];
  return euclidean_distance(a.x, b.x) + bl_norm(d, labels);
}

void add(AssumptionReport& r, const std::string& name, double empirical, double analytic) {
  r.checks.push_back({name, empirical, analytic, empirical > analytic * kFlagSlack + 1e-12});
}

}  // namespace

bool AssumptionReport::any_flagged() const {
  return std::any_of(checks.begin(), checks.end(), [](const auto& c) { return c.flagged; });
}

const AssumptionCheck& AssumptionReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw std::out_of_range("no assumption check named '" + name + "'");
}

AssumptionReport validate_assumptions(const Dynamics& dyn, double R, std::size_t samples, std::uint64_t seed) {
  if (!(R > 0.0)) throw std::invalid_argument("validate_assumptions: R must be positive");
  if (samples == 0) throw std::invalid_argument("validate_assumptions: need at least one sample");
  const auto& labels = dyn.label_space();
  const auto c = dyn.constants(R);
  Sampler s{Rng(seed), dyn.dim(), dyn.labels()};
  constexpr std::size_t kAgents = 6;

  double v1 = 0.0, v2 = 0.0, v3 = 0.0, t1 = 0.0, t2 = 0.0, t3 = 0.0, b1 = 0.0, b2 = 0.0, b3 = 0.0;
  for (std::size_t n = 0; n < samples; ++n) {
    const auto psi = s.measure(R, kAgents);
    const auto m = label_marginals(psi);

    // Lipschitz in y.
    const auto y1 = s.agent(R);
    const auto y2 = s.perturb(y1, R, n % 3 != 1, n % 3 != 0);
    const double dy = state_distance(y1, y2, labels);
    const auto f1 = field(dyn, y1, m), f2 = field(dyn, y2, m);
    if (dy > 0.0) {
      v1 = std::max(v1, vdiff(f1.v, f2.v) / dy);
      b1 = std::max(b1, (vdiff(f1.v, f2.v) + tdiff(f1.tl, f2.tl, labels)) / dy);
    }

    // Lipschitz in Psi.
    const auto psi2 = n % 2 ? s.perturb(psi, R) : s.measure(R, kAgents);
    const double w = w1_product(psi, psi2, labels);
    const auto m2 = label_marginals(psi2);
    const auto g2 = field(dyn, y1, m2);
    if (w > 0.0) {
      v2 = std::max(v2, vdiff(f1.v, g2.v) / w);
      b2 = std::max(b2, (vdiff(f1.v, g2.v) + tdiff(f1.tl, g2.tl, labels)) / w);
    }
    const auto y3 = s.perturb(y1, R, true, false);
    const double dxw = euclidean_distance(y1.x, y3.x) + w;
    if (dxw > 0.0) {
      AgentState y3l{y3.x, y1.lambda};
      const auto g3 = field(dyn, y3l, m2);
      t2 = std::max(t2, tdiff(f1.tl, g3.tl, labels) / dxw);
    }

    // Sublinearity, sampled on a much larger ball as well.
    const double big = (n % 2 ? 1.0 : 10.0) * std::max(R, 2.0);
    const auto yb = s.agent(big);
    const auto psib = s.measure(big, kAgents);
    const auto mb = label_marginals(psib);
    const auto fb = field(dyn, yb, mb);
    const double denom = 1.0 + state_norm(yb, labels) + first_moment(psib, labels);
    v3 = std::max(v3, euclidean_norm(fb.v) / denom);
    t1 = std::max(t1, bl_norm(fb.tl, labels) / (1.0 + euclidean_norm(yb.x) + first_moment(psib, labels)));
    b3 = std::max(b3, (euclidean_norm(fb.v) + bl_norm(fb.tl, labels)) / denom);

    t3 = std::max(t3, dyn.rate_matrix(y1.x, m).max_exit_rate());
  }

  AssumptionReport r;
  r.R = R;
  r.samples = samples;
  r.constants = c;
  add(r, "v1_lipschitz_y", v1, c.L_v);
  add(r, "v2_lipschitz_psi", v2, c.L_v);
  add(r, "v3_sublinear", v3, c.M_v);
  add(r, "T1_sublinear", t1, c.M_T);
  add(r, "T2_lipschitz", t2, c.L_T);
  add(r, "T3_exit_rate", t3, c.delta_R);
  add(r, "b_lipschitz_y", b1, c.L_R);
  add(r, "b_lipschitz_psi", b2, c.L_R);
  add(r, "b_sublinear", b3, c.M);
  return r;
}

AssumptionReport validate_assumptions(const ModelSpec& spec, double R, std::size_t samples, std::uint64_t seed) {
  KernelDynamics dyn(spec);
  auto r = validate_assumptions(dyn, R, samples, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Sampler s{Rng(seed + 17), spec.d, spec.H};

  auto kernel_name = [&](std::size_t h, std::size_t k) {
    return "kernel_" + std::to_string(h + 1) + "_" + std::to_string(k + 1);
  };
  for (std::size_t h = 0; h < spec.H; ++h)
    for (std::size_t k = 0; k < spec.H; ++k) {
      if (spec.mode == VelocityMode::LabelIndependent && k > 0) continue;
      const auto& K = spec.kernel(h, k);
      double sub = 0.0, lip = 0.0;
      std::vector<double> a(spec.d), b(spec.d), za(spec.d), zb(spec.d);
      for (std::size_t n = 0; n < std::max<std::size_t>(samples, 200); ++n) {
        // Radii on a log grid reach both the origin and the far field.
        const double r = std::pow(10.0, -3.0 + 9.0 * u(rng)) * (K.family == KernelFamily::Gaussian ? K.sigma : 1.0);
        auto dir = s.direction();
        for (std::size_t i = 0; i < spec.d; ++i) za[i] = r * dir[i];
        std::fill(a.begin(), a.end(), 0.0);
        K.accumulate(za, 1.0, a);
        sub = std::max(sub, euclidean_norm(a) / (1.0 + r));
        auto dir2 = s.direction();
        const double eps = s.small() * std::max(r, 1e-3);
        for (std::size_t i = 0; i < spec.d; ++i) zb[i] = za[i] + eps * dir2[i];
        std::fill(b.begin(), b.end(), 0.0);
        K.accumulate(zb, 1.0, b);
        const double dz = euclidean_distance(za, zb);
        if (dz > 0.0) lip = std::max(lip, euclidean_distance(a, b) / dz);
      }
      const std::string base = spec.mode == VelocityMode::LabelIndependent ? "kernel_" + std::to_string(h + 1)
                                                                           : kernel_name(h, k);
      add(r, base + "_sublinear", sub, K.sublinear_constant());
      add(r, base + "_lipschitz", lip, K.lipschitz());
    }

  for (std::size_t h = 0; h < spec.H; ++h)
    for (std::size_t k = 0; k < spec.H; ++k) {
      if (h == k) continue;
      const auto& p = spec.rates.pair(h, k);
      if (p.a0 == 0.0 && !p.has_influence()) continue;
      double top = 0.0;
      for (std::size_t n = 0; n < samples; ++n) {
        const auto psi = s.measure(R, 6);
        const auto y = s.agent(R);
        top = std::max(top, dyn.rate_matrix(y.x, label_marginals(psi))(h, k));
      }
      add(r, "rate_" + std::to_string(h + 1) + "_" + std::to_string(k + 1) + "_bound", top,
          spec.rates.rate_bound(h, k));
    }
  return r;
}

}  // namespace mflab
