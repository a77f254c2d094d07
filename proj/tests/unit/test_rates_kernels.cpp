#include <cmath>
#include <random>

#include "doctest.h"
#include "mflab/assumptions.hpp"
#include "mflab/model.hpp"

using namespace mflab;

namespace {

EmpiricalMeasure random_measure(std::mt19937_64& rng, std::size_t n, std::size_t d, std::size_t H) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::exponential_distribution<double> e(1.0);
  EmpiricalMeasure p(d, H);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(d), l(H);
    for (auto& v : x) v = g(rng);
    double s = 0.0;
    for (auto& v : l) s += (v = e(rng));
    for (auto& v : l) v /= s;
    p.push_back(AgentState{x, SimplexVector(l)});
  }
  return p;
}

KernelSpec random_kernel(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 2.0);
  switch (rng() % 3) {
    case 0: return KernelSpec::zero();
    case 1: return KernelSpec::linear_attraction(u(rng));
    default: return KernelSpec::gaussian(u(rng), u(rng));
  }
}

// K(z) written out directly from the family formulas.
std::vector<double> kernel_direct(const KernelSpec& k, const std::vector<double>& z) {
  std::vector<double> out(z.size(), 0.0);
  double r2 = 0.0;
  for (double v : z) r2 += v * v;
  double f = 0.0;
  if (k.family == KernelFamily::LinearAttraction) f = -k.a;
  if (k.family == KernelFamily::Gaussian) f = -k.a * std::exp(-r2 / (2.0 * k.sigma * k.sigma));
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = f * z[i];
  return out;
}

// sum_{h,k} lambda_k (1/N) sum_j K^{hk}(x - x_j) lambda_{j,h}.
std::vector<double> velocity_double_sum(const ModelSpec& spec, const AgentState& y, const EmpiricalMeasure& p) {
  std::vector<double> v(spec.d, 0.0), z(spec.d);
  for (std::size_t h = 0; h < spec.H; ++h)
    for (std::size_t k = 0; k < spec.H; ++k)
      for (std::size_t j = 0; j < p.size(); ++j) {
        for (std::size_t i = 0; i < spec.d; ++i) z[i] = y.x[i] - p.position(j)[i];
        const auto kz = kernel_direct(spec.kernel(h, k), z);
        const double w = y.lambda[k] * p.lambda(j)[h] / static_cast<double>(p.size());
        for (std::size_t i = 0; i < spec.d; ++i) v[i] += w * kz[i];
      }
  return v;
}

ModelSpec random_rates(std::mt19937_64& rng, std::size_t d, std::size_t H) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  ModelSpec spec(d, H);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t k = 0; k < H; ++k) {
      if (h == k) continue;
      PairRate p;
      p.a0 = u(rng);
      p.c.resize(H);
      for (auto& c : p.c) c = rng() % 2 ? u(rng) : 0.0;
      p.sigma = 0.3 + u(rng);
      p.gain = rng() % 2 ? Gain::Decay : Gain::Constant;
      spec.rates.set(h, k, p);
    }
  return spec;
}

Eigen::MatrixXd random_q(std::mt19937_64& rng, std::size_t H, double scale) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(H, H);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t k = 0; k < H; ++k)
      if (h != k && u(rng) < 0.7) q(h, k) = scale * u(rng);
  return q;
}

}  // namespace

TEST_CASE("kernel families match their formulas") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    const auto k = random_kernel(rng);
    std::vector<double> z{g(rng), g(rng)}, out{0.5, -0.25};
    k.accumulate(z, 0.75, out);
    const auto ref = kernel_direct(k, z);
    CHECK(out[0] == doctest::Approx(0.5 + 0.75 * ref[0]).epsilon(1e-14));
    CHECK(out[1] == doctest::Approx(-0.25 + 0.75 * ref[1]).epsilon(1e-14));
  }
  CHECK(parse_kernel_family("gaussian") == KernelFamily::Gaussian);
  CHECK(kernel_family_name(KernelFamily::LinearAttraction) == "linear_attraction");
  CHECK_THROWS(parse_kernel_family("coulomb"));
  CHECK_THROWS(KernelSpec::gaussian(1.0, 0.0));
}

TEST_CASE("Gaussian kernel constants against a dense radial grid") {
  for (double sigma : {0.3, 1.0, 2.5}) {
    const auto k = KernelSpec::gaussian(1.7, sigma);
    double sup_r = 0.0, lip = 0.0, prev = 0.0;
    const double h = 1e-4;
    for (int i = 0; i <= 200000; ++i) {
      const double r = i * h;
      const double f = 1.7 * r * std::exp(-r * r / (2.0 * sigma * sigma));
      sup_r = std::max(sup_r, f);
      if (i > 0) lip = std::max(lip, std::abs(f - prev) / h);
      prev = f;
      if (r <= 3.0) CHECK(k.sup_on_ball(3.0) >= f - 1e-12);
    }
    CHECK(k.growth_intercept() == doctest::Approx(sup_r).epsilon(1e-6));
    CHECK(k.lipschitz() >= lip - 1e-9);
    CHECK(k.lipschitz() == doctest::Approx(lip).epsilon(1e-3));
  }
}

TEST_CASE("eval_velocity examples") {
  ModelSpec spec(1, 2);
  spec.set_species_kernel(0, KernelSpec::linear_attraction(1.0));
  spec.set_species_kernel(1, KernelSpec::zero());
  EmpiricalMeasure p(1, 2);
  p.push_back(AgentState{{-1.0}, SimplexVector::point_mass(2, 0)});
  p.push_back(AgentState{{1.0}, SimplexVector::point_mass(2, 0)});
  const auto lam = SimplexVector::point_mass(2, 0);
  CHECK(eval_velocity(spec, AgentState{{0.0}, lam}, p)[0] == 0.0);
  CHECK(eval_velocity(spec, AgentState{{1.0}, lam}, p)[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK_THROWS(eval_velocity(spec, AgentState{{0.0, 0.0}, lam}, p));
}

TEST_CASE("label-weighted and label-independent modes agree with the double sum") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const std::size_t H = 1 + rng() % 4, d = 1 + rng() % 3;
    ModelSpec indep(d, H);
    for (std::size_t h = 0; h < H; ++h) indep.set_species_kernel(h, random_kernel(rng));
    ModelSpec weighted = indep;
    weighted.mode = VelocityMode::LabelWeighted;
    const auto p = random_measure(rng, 1 + rng() % 12, d, H);
    const auto y = random_measure(rng, 1, d, H).agent(0);
    const auto a = eval_velocity(indep, y, p), b = eval_velocity(weighted, y, p);
    const auto ref = velocity_double_sum(indep, y, p);
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(a[i] == doctest::Approx(ref[i]).epsilon(1e-12));
      CHECK(b[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }

    ModelSpec general(d, H);
    general.mode = VelocityMode::LabelWeighted;
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t k = 0; k < H; ++k) general.set_kernel(h, k, random_kernel(rng));
    const auto c = eval_velocity(general, y, p);
    const auto ref2 = velocity_double_sum(general, y, p);
    for (std::size_t i = 0; i < d; ++i) CHECK(c[i] == doctest::Approx(ref2[i]).epsilon(1e-12));
  }
}

TEST_CASE("label-independent mode rejects a varying kernel grid") {
  ModelSpec spec(1, 2);
  spec.set_kernel(0, 1, KernelSpec::linear_attraction(1.0));
  CHECK_THROWS(KernelDynamics{spec});
  spec.mode = VelocityMode::LabelWeighted;
  CHECK_NOTHROW(KernelDynamics{spec});
}

TEST_CASE("velocity is translation equivariant") {
  std::mt19937_64 rng(5);
  ModelSpec spec(2, 3);
  spec.mode = VelocityMode::LabelWeighted;
  for (std::size_t h = 0; h < 3; ++h)
    for (std::size_t k = 0; k < 3; ++k) spec.set_kernel(h, k, random_kernel(rng));
  const auto p = random_measure(rng, 9, 2, 3);
  const auto y = p.agent(4);
  EmpiricalMeasure q(2, 3);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto a = p.agent(i);
    a.x[0] += 3.5;
    a.x[1] -= 1.25;
    q.push_back(a);
  }
  auto ys = y;
  ys.x[0] += 3.5;
  ys.x[1] -= 1.25;
  const auto a = eval_velocity(spec, y, p), b = eval_velocity(spec, ys, q);
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-12));
}

TEST_CASE("eval_rate_matrix examples") {
  ModelSpec spec(1, 2);
  PairRate fl;
  fl.a0 = 1.0;
  spec.rates.set(0, 1, fl);
  const Marginals m(2, DiscreteSpatialMeasure(1));
  const std::vector<double> x{0.3};
  const auto q = eval_rate_matrix(spec, x, m);
  CHECK(q(0, 0) == -1.0);
  CHECK(q(0, 1) == 1.0);
  CHECK(q(1, 0) == 0.0);
  CHECK(q(1, 1) == 0.0);

  const auto z = eval_rate_matrix(ModelSpec(1, 3), x, Marginals(3, DiscreteSpatialMeasure(1)));
  CHECK(z.matrix().isZero(0.0));
}

TEST_CASE("rate law against a direct evaluation") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 100; ++t) {
    const std::size_t H = 2 + rng() % 4, d = 1 + rng() % 2;
    const auto spec = random_rates(rng, d, H);
    const auto p = random_measure(rng, 1 + rng() % 10, d, H);
    const auto m = label_marginals(p);
    const auto y = random_measure(rng, 1, d, H).agent(0);
    const auto q = eval_rate_matrix(spec, y.x, m);
    for (std::size_t h = 0; h < H; ++h) {
      double row = 0.0, rates = 0.0;
      for (std::size_t k = 0; k < H; ++k) {
        row += q(h, k);
        if (h == k) continue;
        const auto& pr = spec.rates.pair(h, k);
        double s = pr.a0;
        for (std::size_t l = 0; l < H; ++l)
          for (std::size_t j = 0; j < p.size(); ++j) {
            double r2 = 0.0;
            for (std::size_t i = 0; i < d; ++i) r2 += std::pow(y.x[i] - p.position(j)[i], 2);
            s += pr.c[l] * p.lambda(j)[l] / static_cast<double>(p.size()) * std::exp(-r2 / (2 * pr.sigma * pr.sigma));
          }
        double x2 = 0.0;
        for (double v : y.x) x2 += v * v;
        if (pr.gain == Gain::Decay) s /= 1.0 + x2;
        CHECK(q(h, k) == doctest::Approx(s).epsilon(1e-12));
        CHECK(q(h, k) >= 0.0);
        CHECK(q(h, k) <= spec.rates.rate_bound(h, k) + 1e-12);
        rates += q(h, k);
      }
      CHECK(std::abs(row) <= 1e-12 * std::max(1.0, rates));
    }
  }
}

TEST_CASE("RateMatrix validation") {
  Eigen::MatrixXd bad(2, 2);
  bad << -1.0, 1.0, -0.5, 0.5;
  CHECK_THROWS(RateMatrix{bad});
  Eigen::MatrixXd unbalanced(2, 2);
  unbalanced << -1.0, 0.9, 0.0, 0.0;
  CHECK_THROWS(RateMatrix{unbalanced});
  Eigen::MatrixXd ok(2, 2);
  ok << -2.0, 2.0, 3.0, -3.0;
  CHECK(RateMatrix(ok).max_exit_rate() == 3.0);
  PairRate neg;
  neg.a0 = -1.0;
  RateSpec rs(2);
  CHECK_THROWS(rs.set(0, 1, neg));
  CHECK_THROWS(rs.set(1, 1, PairRate{}));
}

TEST_CASE("apply_adjoint examples") {
  Eigen::MatrixXd m(2, 2);
  m << -1.0, 1.0, 0.0, 0.0;
  const RateMatrix q(m);
  const auto r = apply_adjoint(q, SimplexVector::point_mass(2, 0));
  CHECK(r[0] == -1.0);
  CHECK(r[1] == 1.0);
  const auto z = apply_adjoint(RateMatrix::zero(3), SimplexVector::uniform(3));
  for (double v : z) CHECK(v == 0.0);

  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t H = 1 + rng() % 8;
    const auto qq = RateMatrix::from_off_diagonal(random_q(rng, H, 5.0));
    const auto lam = random_measure(rng, 1, 1, H).agent(0).lambda;
    const auto a = apply_adjoint(qq, lam);
    double s = 0.0;
    for (double v : a) s += v;
    CHECK(std::abs(s) <= 1e-12);
    for (std::size_t h = 0; h < H; ++h) {
      double ref = 0.0;
      for (std::size_t k = 0; k < H; ++k) ref += qq(k, h) * lam[k];
      CHECK(a[h] == doctest::Approx(ref).epsilon(1e-14));
    }
  }
}

TEST_CASE("transition_matrix closed forms") {
  Eigen::MatrixXd m(2, 2);
  m << -1.0, 1.0, 0.0, 0.0;
  const auto e = transition_matrix(RateMatrix(m), std::log(2.0));
  CHECK(e(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(e(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(e(1, 0) == 0.0);
  CHECK(e(1, 1) == 1.0);

  // Two-state chain: exp(tQ) with rates a, b has e^{-(a+b)t} relaxation.
  for (double t : {0.01, 0.7, 3.0, 10.0}) {
    const double a = 2.3, b = 0.4;
    Eigen::MatrixXd q(2, 2);
    q << -a, a, b, -b;
    const auto p = transition_matrix(RateMatrix(q), t);
    const double s = a + b, decay = std::exp(-s * t);
    CHECK(p(0, 0) == doctest::Approx(b / s + a / s * decay).epsilon(1e-13));
    CHECK(p(1, 0) == doctest::Approx(b / s - b / s * decay).epsilon(1e-13));
  }

  CHECK(transition_matrix(RateMatrix::zero(4), 3.0).isIdentity(0.0));
  CHECK_THROWS(transition_matrix(RateMatrix::zero(2), 0.0));
}

TEST_CASE("transition_matrix is stochastic and satisfies the semigroup law") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_sum = 0.0, worst_semi = 0.0, worst_min = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t H = 1 + rng() % 8;
    const auto q = RateMatrix::from_off_diagonal(random_q(rng, H, std::pow(10.0, -2.0 + 4.0 * u(rng))));
    const double dt = 10.0 * (1.0 - u(rng));
    ExpStats st;
    const auto p = transition_matrix(q, dt, &st);
    worst_min = std::min(worst_min, st.min_entry);
    for (Eigen::Index h = 0; h < p.rows(); ++h) {
      worst_sum = std::max(worst_sum, std::abs(p.row(h).sum() - 1.0));
      for (Eigen::Index k = 0; k < p.cols(); ++k) {
        CHECK(p(h, k) >= 0.0);
        CHECK(p(h, k) <= 1.0 + 1e-15);
      }
    }
    const auto half = transition_matrix(q, dt / 2.0);
    worst_semi = std::max(worst_semi, (half * half - p).cwiseAbs().maxCoeff());
  }
  CHECK(worst_sum <= 1e-12);
  CHECK(worst_semi <= 1e-10);
  CHECK(worst_min >= -1e-13);
}

TEST_CASE("validate_assumptions examples") {
  SUBCASE("linear attraction") {
    ModelSpec spec(2, 1);
    spec.set_species_kernel(0, KernelSpec::linear_attraction(1.5));
    const auto r = validate_assumptions(spec, 3.0, 300);
    CHECK(r.find("kernel_1_lipschitz").empirical <= 1.5 * 1.01);
    CHECK(r.find("kernel_1_lipschitz").empirical >= 1.5 * 0.99);
    CHECK(r.find("v1_lipschitz_y").empirical <= 1.5 * 1.01);
    CHECK_FALSE(r.any_flagged());
  }
  SUBCASE("zero kernel") {
    ModelSpec spec(1, 2);
    const auto r = validate_assumptions(spec, 2.0, 100);
    for (const auto& c : r.checks) {
      CHECK(c.empirical == 0.0);
      CHECK_FALSE(c.flagged);
    }
  }
  SUBCASE("Gaussian sublinearity against a dense grid") {
    const double a = 2.0, sigma = 0.8;
    double sup = 0.0;
    for (int i = 0; i <= 100000; ++i) {
      const double r = i * 1e-4;
      sup = std::max(sup, r * std::exp(-r * r / (2.0 * sigma * sigma)));
    }
    ModelSpec spec(1, 2);
    spec.set_species_kernel(0, KernelSpec::gaussian(a, sigma));
    spec.set_species_kernel(1, KernelSpec::gaussian(0.5, 1.5));
    const auto r = validate_assumptions(spec, 2.0, 300);
    CHECK(r.find("kernel_1_sublinear").empirical <= a * std::max(1.0, sup) + 1e-9);
    CHECK_FALSE(r.any_flagged());
  }
  SUBCASE("full model with rates stays within the analytic constants") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 6; ++t) {
      const std::size_t H = 2 + rng() % 3;
      auto spec = random_rates(rng, 1 + rng() % 2, H);
      spec.mode = t % 2 ? VelocityMode::LabelWeighted : VelocityMode::LabelIndependent;
      for (std::size_t h = 0; h < H; ++h) {
        if (spec.mode == VelocityMode::LabelIndependent)
          spec.set_species_kernel(h, random_kernel(rng));
        else
          for (std::size_t k = 0; k < H; ++k) spec.set_kernel(h, k, random_kernel(rng));
      }
      const auto r = validate_assumptions(spec, 2.5, 400, 100 + t);
      for (const auto& c : r.checks) {
        INFO(c.name << " empirical " << c.empirical << " analytic " << c.analytic);
        CHECK_FALSE(c.flagged);
      }
    }
  }
  CHECK_THROWS(validate_assumptions(ModelSpec(1, 1), 0.0, 10));
  CHECK_THROWS(validate_assumptions(ModelSpec(1, 1), 1.0, 0));
}
