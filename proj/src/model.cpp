#include "mflab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mflab {

namespace {

/// True when every marginal sits on the same atoms, as for label marginals of
/// one empirical measure.
bool shared_support(const Marginals& m) {
  for (std::size_t l = 1; l < m.size(); ++l) {
    if (m[l].size() != m[0].size()) return false;
    const auto a = m[l].positions(), b = m[0].positions();
    if (a.data() != b.data() && !std::equal(a.begin(), a.end(), b.begin())) return false;
  }
  return true;
}

/// Kernels with equal profile share one evaluation per atom:
/// K(z) = -a z f(|z|^2) with f = 1 or exp(-|z|^2 / (2 sigma^2)).
struct KernelGroups {
  std::vector<double> inv;        // 0 for the linear profile
  std::vector<int> group_of;      // per (h, k), -1 for zero kernels
  std::vector<double> coef;
};

void group_kernels(const ModelSpec& spec, KernelGroups& g) {
  g.inv.clear();
  g.group_of.assign(spec.H * spec.H, -1);
  for (std::size_t hk = 0; hk < spec.kernels.size(); ++hk) {
    const auto& k = spec.kernels[hk];
    if (k.is_zero()) continue;
    const double inv = k.family == KernelFamily::Gaussian ? 1.0 / (2.0 * k.sigma * k.sigma) : 0.0;
    auto it = std::find(g.inv.begin(), g.inv.end(), inv);
    if (it == g.inv.end()) it = g.inv.insert(g.inv.end(), inv);
    g.group_of[hk] = static_cast<int>(it - g.inv.begin());
  }
  g.coef.assign(g.inv.size(), 0.0);
}

void velocity_impl(const ModelSpec& spec, std::span<const double> x, std::span<const double> lambda,
                   const Marginals& m, std::span<double> out) {
  if (x.size() != spec.d || out.size() != spec.d) throw std::invalid_argument("velocity: dimension mismatch");
  if (lambda.size() != spec.H || m.size() != spec.H) throw std::invalid_argument("velocity: label count mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  thread_local std::vector<double> z;
  z.resize(spec.d);
  const bool independent = spec.mode == VelocityMode::LabelIndependent;
  if (shared_support(m)) {
    thread_local KernelGroups g;
    group_kernels(spec, g);
    if (g.inv.empty()) return;
    for (std::size_t j = 0; j < m[0].size(); ++j) {
      std::fill(g.coef.begin(), g.coef.end(), 0.0);
      bool any = false;
      for (std::size_t h = 0; h < spec.H; ++h) {
        const double w = m[h].weight(j);
        if (w == 0.0) continue;
        for (std::size_t k = 0; k < (independent ? 1 : spec.H); ++k) {
          const int gi = g.group_of[h * spec.H + k];
          const double lk = independent ? 1.0 : lambda[k];
          if (gi < 0 || lk == 0.0) continue;
          g.coef[gi] += w * lk * spec.kernels[h * spec.H + k].a;
          any = true;
        }
      }
      if (!any) continue;
      auto xj = m[0].position(j);
      double r2 = 0.0;
      for (std::size_t i = 0; i < spec.d; ++i) {
        z[i] = x[i] - xj[i];
        r2 += z[i] * z[i];
      }
      double s = 0.0;
      for (std::size_t q = 0; q < g.inv.size(); ++q)
        if (g.coef[q] != 0.0) s += g.coef[q] * (g.inv[q] == 0.0 ? 1.0 : std::exp(-r2 * g.inv[q]));
      for (std::size_t i = 0; i < spec.d; ++i) out[i] -= s * z[i];
    }
    return;
  }
  for (std::size_t h = 0; h < spec.H; ++h) {
    const auto& mu = m[h];
    if (independent && spec.kernel(h, 0).is_zero()) continue;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      const double w = mu.weight(j);
      if (w == 0.0) continue;
      auto xj = mu.position(j);
      for (std::size_t i = 0; i < spec.d; ++i) z[i] = x[i] - xj[i];
      if (independent) {
        spec.kernel(h, 0).accumulate(z, w, out);
      } else {
        for (std::size_t k = 0; k < spec.H; ++k)
          if (lambda[k] != 0.0) spec.kernel(h, k).accumulate(z, w * lambda[k], out);
      }
    }
  }
}

void features_impl(const ModelSpec& spec, std::span<const double> x, const Marginals& m,
                   std::span<double> features) {
  const auto& widths = spec.rates.widths();
  std::fill(features.begin(), features.end(), 0.0);
  thread_local std::vector<double> inv;
  inv.resize(widths.size());
  for (std::size_t w = 0; w < widths.size(); ++w) inv[w] = 1.0 / (2.0 * widths[w] * widths[w]);
  auto r2_to = [&](std::span<const double> xj) {
    double r2 = 0.0;
    for (std::size_t i = 0; i < spec.d; ++i) {
      const double dz = x[i] - xj[i];
      r2 += dz * dz;
    }
    return r2;
  };
  if (shared_support(m)) {
    for (std::size_t j = 0; j < m[0].size(); ++j) {
      const double r2 = r2_to(m[0].position(j));
      for (std::size_t w = 0; w < widths.size(); ++w) {
        double e = -1.0;
        for (std::size_t l = 0; l < spec.H; ++l) {
          const double wt = m[l].weight(j);
          if (wt == 0.0 || !spec.rates.feature_used(w, l)) continue;
          if (e < 0.0) e = std::exp(-r2 * inv[w]);
          features[w * spec.H + l] += wt * e;
        }
      }
    }
    return;
  }
  for (std::size_t w = 0; w < widths.size(); ++w) {
    for (std::size_t l = 0; l < spec.H; ++l) {
      if (!spec.rates.feature_used(w, l)) continue;
      const auto& mu = m[l];
      double acc = 0.0;
      for (std::size_t j = 0; j < mu.size(); ++j) {
        const double wt = mu.weight(j);
        if (wt == 0.0) continue;
        acc += wt * std::exp(-r2_to(mu.position(j)) * inv[w]);
      }
      features[w * spec.H + l] = acc;
    }
  }
}

RateMatrix rate_matrix_impl(const ModelSpec& spec, std::span<const double> x, const Marginals& m) {
  if (x.size() != spec.d) throw std::invalid_argument("rate matrix: dimension mismatch");
  if (m.size() != spec.H) throw std::invalid_argument("rate matrix: marginal count mismatch");
  thread_local std::vector<double> features;
  features.resize(spec.rates.widths().size() * spec.H);
  features_impl(spec, x, m, features);
  Eigen::MatrixXd q;
  spec.rates.assemble(x, features, q);
  return RateMatrix::from_off_diagonal(std::move(q));
}

}  // namespace

VelocityMode parse_velocity_mode(const std::string& name) {
  if (name == "label_independent") return VelocityMode::LabelIndependent;
  if (name == "label_weighted") return VelocityMode::LabelWeighted;
  throw std::invalid_argument("unknown velocity mode '" + name + "' (expected label_independent or label_weighted)");
}

std::string velocity_mode_name(VelocityMode m) {
  return m == VelocityMode::LabelIndependent ? "label_independent" : "label_weighted";
}

ModelSpec::ModelSpec(std::size_t dim, std::size_t labels)
    : d(dim), H(labels), label_space(LabelSpace::indexed(labels)), kernels(labels * labels), rates(labels) {
  if (dim == 0) throw std::invalid_argument("model dimension must be positive");
}

void ModelSpec::set_species_kernel(std::size_t h, const KernelSpec& k) {
  for (std::size_t j = 0; j < H; ++j) set_kernel(h, j, k);
}

void ModelSpec::set_kernel(std::size_t h, std::size_t k, const KernelSpec& kernel) {
  if (h >= H || k >= H) throw std::invalid_argument("kernel index out of range");
  kernels[h * H + k] = kernel;
}

void ModelSpec::validate() const {
  if (label_space.size() != H) throw std::invalid_argument("label space size differs from H");
  if (rates.labels() != H) throw std::invalid_argument("rate spec label count differs from H");
  if (kernels.size() != H * H) throw std::invalid_argument("kernel grid has the wrong size");
  if (mode == VelocityMode::LabelIndependent)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t k = 1; k < H; ++k)
        if (!(kernel(h, k) == kernel(h, 0)))
          throw std::invalid_argument("label-independent mode requires K^{hk} = K^h for every k");
}

KernelDynamics::KernelDynamics(ModelSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

void KernelDynamics::velocity(std::span<const double> x, std::span<const double> lambda, const Marginals& m,
                              std::span<double> out) const {
  velocity_impl(spec_, x, lambda, m, out);
}

RateMatrix KernelDynamics::rate_matrix(std::span<const double> x, const Marginals& m) const {
  return rate_matrix_impl(spec_, x, m);
}

void KernelDynamics::rate_features(std::span<const double> x, const Marginals& m, std::span<double> features) const {
  features_impl(spec_, x, m, features);
}

bool KernelDynamics::velocity_label_independent() const {
  if (spec_.mode == VelocityMode::LabelIndependent) return true;
  for (std::size_t h = 0; h < spec_.H; ++h)
    for (std::size_t k = 1; k < spec_.H; ++k)
      if (!(spec_.kernel(h, k) == spec_.kernel(h, 0))) return false;
  return true;
}

AnalyticConstants KernelDynamics::constants(double R) const {
  const std::size_t H = spec_.H;
  const auto& labels = spec_.label_space;
  double gmin = std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h + 1 < H; ++h) gmin = std::min(gmin, labels.gap(h));
  auto dcap = [&](std::size_t h, std::size_t k) { return std::min(labels.distance(h, k), 2.0); };
  // Dual-norm factor of a label function with oscillation 2s and slopes
  // bounded by 2s / gmin, tested against zero-mass measures.
  auto label_factor = [&](double s) { return H > 1 ? std::max(s, 2.0 * s / gmin) : 0.0; };

  double M_v = 0.0, L_K = 0.0, S = 0.0;
  for (const auto& k : spec_.kernels) {
    M_v = std::max(M_v, k.sublinear_constant());
    L_K = std::max(L_K, k.lipschitz());
    S = std::max(S, k.sup_on_ball(2.0 * R));
  }
  bool own_dep = false, other_dep = false;
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t k = 0; k < H; ++k) {
      if (!(spec_.kernel(h, k) == spec_.kernel(h, 0))) own_dep = true;
      if (!(spec_.kernel(h, k) == spec_.kernel(0, k))) other_dep = true;
    }
  if (spec_.mode == VelocityMode::LabelIndependent) own_dep = false;
  const double Lv_x = L_K;
  const double Lv_lambda = own_dep ? label_factor(S) : 0.0;
  const double Lv_psi = std::max(L_K, other_dep ? label_factor(S) : 0.0);

  double M_T = 0.0, delta = 0.0, LT_x = 0.0, LT_psi = 0.0;
  for (std::size_t h = 0; h < H; ++h) {
    double mt = 0.0, dl = 0.0, lx = 0.0, lp = 0.0;
    for (std::size_t k = 0; k < H; ++k) {
      if (h == k) continue;
      const auto& p = spec_.rates.pair(h, k);
      const double qbar = spec_.rates.rate_bound(h, k);
      const double cmax = p.max_influence();
      const double eta_lip = std::exp(-0.5) / p.sigma;
      double rx = gain_lipschitz(p.gain) * qbar;
      double rp = 0.0;
      if (p.has_influence()) {
        rx += cmax * eta_lip;
        rp = std::max({cmax * eta_lip, 0.5 * cmax, H > 1 ? cmax / gmin : 0.0});
      }
      mt += dcap(h, k) * qbar;
      dl += qbar;
      lx += dcap(h, k) * rx;
      lp += dcap(h, k) * rp;
    }
    M_T = std::max(M_T, mt);
    delta = std::max(delta, dl);
    LT_x = std::max(LT_x, lx);
    LT_psi = std::max(LT_psi, lp);
  }
  const double rho = label_factor(M_T);

  AnalyticConstants c;
  c.R = R;
  c.M_v = M_v;
  c.M_T = M_T;
  c.M = M_v + M_T;
  c.L_v = std::max({Lv_x, Lv_lambda, Lv_psi});
  c.L_T = std::max(LT_x, LT_psi);
  c.L_R = std::max({Lv_x + LT_x, Lv_lambda + rho, Lv_psi + LT_psi});
  c.delta_R = delta;
  return c;
}

std::string KernelDynamics::describe() const {
  std::ostringstream os;
  os << "kernel model d=" << spec_.d << " H=" << spec_.H << " mode=" << velocity_mode_name(spec_.mode);
  return os.str();
}

std::vector<double> eval_velocity(const ModelSpec& spec, const AgentState& y, const EmpiricalMeasure& p) {
  if (y.x.size() != spec.d || p.dim() != spec.d) throw std::invalid_argument("eval_velocity: dimension mismatch");
  if (y.lambda.size() != spec.H || p.labels() != spec.H)
    throw std::invalid_argument("eval_velocity: label count mismatch");
  std::vector<double> out(spec.d);
  velocity_impl(spec, y.x, y.lambda.values(), label_marginals(p), out);
  return out;
}

RateMatrix eval_rate_matrix(const ModelSpec& spec, std::span<const double> x, const Marginals& marginals) {
  return rate_matrix_impl(spec, x, marginals);
}

}  // namespace mflab
