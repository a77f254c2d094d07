#include "mflab/continuum_labels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mflab {

JFamily parse_j_family(const std::string& name) {
  if (name == "zero") return JFamily::Zero;
  if (name == "constant") return JFamily::Constant;
  if (name == "separable") return JFamily::Separable;
  if (name == "gaussian_space") return JFamily::GaussianSpace;
  throw std::invalid_argument("unknown J family '" + name + "' (expected zero, constant, separable, gaussian_space)");
}

VFamily parse_v_family(const std::string& name) {
  if (name == "zero") return VFamily::Zero;
  if (name == "attraction") return VFamily::Attraction;
  if (name == "separable") return VFamily::Separable;
  if (name == "gaussian_space") return VFamily::GaussianSpace;
  throw std::invalid_argument("unknown V family '" + name + "' (expected zero, attraction, separable, gaussian_space)");
}

std::string j_family_name(JFamily f) {
  switch (f) {
    case JFamily::Zero: return "zero";
    case JFamily::Constant: return "constant";
    case JFamily::Separable: return "separable";
    case JFamily::GaussianSpace: return "gaussian_space";
  }
  return "zero";
}

std::string v_family_name(VFamily f) {
  switch (f) {
    case VFamily::Zero: return "zero";
    case VFamily::Attraction: return "attraction";
    case VFamily::Separable: return "separable";
    case VFamily::GaussianSpace: return "gaussian_space";
  }
  return "zero";
}

double TransitionKernel::label_factor(double u, double up) const {
  switch (family) {
    case JFamily::Zero: return 0.0;
    case JFamily::Constant: return c;
    case JFamily::Separable:
    case JFamily::GaussianSpace: return c * (1.0 - u) * up + c0;
  }
  return 0.0;
}

double TransitionKernel::spatial_factor(std::span<const double> z) const {
  if (family != JFamily::GaussianSpace) return 1.0;
  double r2 = 0.0;
  for (double v : z) r2 += v * v;
  return std::exp(-r2 / (2.0 * sigma * sigma));
}

double TransitionKernel::operator()(std::span<const double> x, double u, std::span<const double> xp,
                                    double up) const {
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] - xp[i];
  return label_factor(u, up) * spatial_factor(z);
}

double TransitionKernel::label_sup() const {
  switch (family) {
    case JFamily::Zero: return 0.0;
    case JFamily::Constant: return std::abs(c);
    default: return std::abs(c) + std::abs(c0);
  }
}

double TransitionKernel::label_lipschitz() const {
  return family == JFamily::Separable || family == JFamily::GaussianSpace ? std::abs(c) : 0.0;
}

double TransitionKernel::spatial_lipschitz() const {
  return family == JFamily::GaussianSpace ? std::exp(-0.5) / sigma : 0.0;
}

VelocityKernel VelocityKernel::attraction(double a) {
  return {VFamily::Attraction, 1.0, 0.0, KernelSpec::linear_attraction(a)};
}

VelocityKernel VelocityKernel::separable(double a) {
  return {VFamily::Separable, 0.0, 1.0, KernelSpec::linear_attraction(a)};
}

VelocityKernel VelocityKernel::gaussian_space(double a, double sigma) {
  return {VFamily::GaussianSpace, 1.0, 0.0, KernelSpec::gaussian(a, sigma)};
}

std::vector<double> VelocityKernel::operator()(std::span<const double> x, double u, std::span<const double> xp,
                                               double up) const {
  std::vector<double> z(x.size()), out(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] - xp[i];
  kernel.accumulate(z, label_factor(u, up), out);
  return out;
}

double VelocityKernel::label_sup() const { return std::abs(b0) + std::abs(b); }

std::vector<double> GameKernelSpec::node_coordinates() const {
  if (nodes == 0) throw std::invalid_argument("game model needs at least one quadrature node");
  std::vector<double> u(nodes);
  for (std::size_t m = 0; m < nodes; ++m) u[m] = (static_cast<double>(m) + 0.5) / static_cast<double>(nodes);
  return u;
}

LabelSpace GameKernelSpec::label_space() const { return LabelSpace::with_coordinates(node_coordinates()); }

GameDynamics::GameDynamics(GameKernelSpec spec)
    : spec_(std::move(spec)), labels_(spec_.label_space()), u_(spec_.node_coordinates()) {
  if (spec_.d == 0) throw std::invalid_argument("game model dimension must be positive");
  if (spec_.J.family == JFamily::GaussianSpace && !(spec_.J.sigma > 0.0))
    throw std::invalid_argument("gaussian_space J needs a positive width");
  const std::size_t H = spec_.nodes;
  f_j_.resize(H * H);
  f_v_.resize(H * H);
  min_j_ = 0.0;
  for (std::size_t m = 0; m < H; ++m)
    for (std::size_t k = 0; k < H; ++k) {
      f_j_[m * H + k] = spec_.J.label_factor(u_[m], u_[k]);
      f_v_[m * H + k] = spec_.V.label_factor(u_[m], u_[k]);
      if (m != k) min_j_ = std::min(min_j_, f_j_[m * H + k]);
    }
}

void GameDynamics::velocity(std::span<const double> x, std::span<const double> lambda, const Marginals& m,
                            std::span<double> out) const {
  const std::size_t H = spec_.nodes, d = spec_.d;
  if (x.size() != d || out.size() != d) throw std::invalid_argument("game velocity: dimension mismatch");
  if (lambda.size() != H || m.size() != H) throw std::invalid_argument("game velocity: node count mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  if (spec_.V.kernel.is_zero()) return;
  thread_local std::vector<double> z;
  z.resize(d);
  for (std::size_t k = 0; k < H; ++k) {
    // sum_m lambda_m V-label factor against opponent node k.
    double w = 0.0;
    for (std::size_t mm = 0; mm < H; ++mm) w += lambda[mm] * f_v_[mm * H + k];
    if (w == 0.0) continue;
    const auto& mu = m[k];
    for (std::size_t j = 0; j < mu.size(); ++j) {
      const double wt = mu.weight(j);
      if (wt == 0.0) continue;
      auto xj = mu.position(j);
      for (std::size_t i = 0; i < d; ++i) z[i] = x[i] - xj[i];
      spec_.V.kernel.accumulate(z, w * wt, out);
    }
  }
}

RateMatrix GameDynamics::rate_matrix(std::span<const double> x, const Marginals& m) const {
  const std::size_t H = spec_.nodes, d = spec_.d;
  if (x.size() != d) throw std::invalid_argument("game generator: dimension mismatch");
  if (m.size() != H) throw std::invalid_argument("game generator: node count mismatch");
  if (min_j_ < 0.0) {
    for (std::size_t a = 0; a < H; ++a)
      for (std::size_t b = 0; b < H; ++b)
        if (a != b && f_j_[a * H + b] < 0.0) {
          std::ostringstream os;
          os << "negative J sample " << format_real(f_j_[a * H + b]) << " at u=" << format_real(u_[a])
             << ", u'=" << format_real(u_[b]);
          throw std::invalid_argument(os.str());
        }
  }
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(H), static_cast<Eigen::Index>(H));
  if (spec_.J.family == JFamily::Zero) return RateMatrix::from_off_diagonal(std::move(q));
  thread_local std::vector<double> z;
  z.resize(d);
  for (std::size_t k = 0; k < H; ++k) {
    const auto& mu = m[k];
    double a = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      const double wt = mu.weight(j);
      if (wt == 0.0) continue;
      if (spec_.J.family == JFamily::GaussianSpace) {
        auto xj = mu.position(j);
        for (std::size_t i = 0; i < d; ++i) z[i] = x[i] - xj[i];
        a += wt * spec_.J.spatial_factor(z);
      } else {
        a += wt;
      }
    }
    for (std::size_t mm = 0; mm < H; ++mm)
      if (mm != k) q(static_cast<Eigen::Index>(mm), static_cast<Eigen::Index>(k)) = f_j_[mm * H + k] * a;
  }
  return RateMatrix::from_off_diagonal(std::move(q));
}

AnalyticConstants GameDynamics::constants(double R) const {
  const auto& K = spec_.V.kernel;
  const double fv = spec_.V.label_sup();
  const double jmax = spec_.J.label_sup();
  const double jlip = spec_.J.label_lipschitz();
  const double ls = spec_.J.spatial_lipschitz();
  const double S = K.sup_on_ball(2.0 * R);
  const double LK = K.lipschitz();
  const bool vdep = spec_.V.label_dependent();

  // Label differences on U = [0,1] are at most 1, so the BL dual factor of a
  // label function is max(sup, Lipschitz constant).
  const double Lv_x = fv * LK;
  const double Lv_lambda = vdep ? fv * S : 0.0;
  const double Lv_psi = vdep ? fv * std::max(LK, S) : fv * LK;
  const double LT_x = jmax * ls;
  const double rho = jmax + jlip;
  const double LT_psi = std::max(jmax * ls, jmax + jlip);

  AnalyticConstants c;
  c.R = R;
  c.M_v = fv * K.sublinear_constant();
  c.M_T = jmax;
  c.M = c.M_v + c.M_T;
  c.L_v = std::max({Lv_x, Lv_lambda, Lv_psi});
  c.L_T = std::max(LT_x, LT_psi);
  c.L_R = std::max({Lv_x + LT_x, Lv_lambda + rho, Lv_psi + LT_psi});
  c.delta_R = jmax;
  return c;
}

std::string GameDynamics::describe() const {
  std::ostringstream os;
  os << "game model d=" << spec_.d << " nodes=" << spec_.nodes << " J=" << j_family_name(spec_.J.family)
     << " V=" << v_family_name(spec_.V.family);
  return os.str();
}

RateMatrix discretize_generator(const GameKernelSpec& spec, std::span<const double> x, const EmpiricalMeasure& p) {
  if (p.labels() != spec.nodes) throw std::invalid_argument("discretize_generator: node count mismatch");
  if (p.dim() != spec.d) throw std::invalid_argument("discretize_generator: dimension mismatch");
  return GameDynamics(spec).rate_matrix(x, label_marginals(p));
}

std::vector<double> game_velocity(const GameKernelSpec& spec, const AgentState& y, const EmpiricalMeasure& p) {
  if (p.labels() != spec.nodes || y.lambda.size() != spec.nodes)
    throw std::invalid_argument("game_velocity: node count mismatch");
  if (p.dim() != spec.d) throw std::invalid_argument("game_velocity: dimension mismatch");
  std::vector<double> out(spec.d);
  GameDynamics(spec).velocity(y.x, y.lambda.values(), label_marginals(p), out);
  return out;
}

std::vector<double> coarsen(std::span<const double> lambda, std::size_t factor) {
  if (factor == 0 || lambda.size() % factor != 0)
    throw std::invalid_argument("coarsen: node count is not a multiple of the factor");
  std::vector<double> out(lambda.size() / factor, 0.0);
  for (std::size_t m = 0; m < lambda.size(); ++m) out[m / factor] += lambda[m];
  return out;
}

EmpiricalMeasure coarsen(const EmpiricalMeasure& p, std::size_t factor) {
  EmpiricalMeasure out(p.dim(), p.labels() / factor);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto l = coarsen(p.lambda(i), factor);
    out.push_back_unchecked(p.position(i), l);
  }
  return out;
}

SimplexVector cell_integrated_gaussian(std::size_t H, double center, double width) {
  if (H == 0) throw std::invalid_argument("cell_integrated_gaussian: H must be positive");
  if (!(width > 0.0)) throw std::invalid_argument("cell_integrated_gaussian: width must be positive");
  auto cdf = [&](double u) { return 0.5 * std::erfc(-(u - center) / (width * std::sqrt(2.0))); };
  const double total = cdf(1.0) - cdf(0.0);
  if (!(total > 0.0)) throw std::invalid_argument("cell_integrated_gaussian: profile has no mass on [0,1]");
  std::vector<double> w(H);
  for (std::size_t m = 0; m < H; ++m) {
    const double a = static_cast<double>(m) / static_cast<double>(H);
    const double b = static_cast<double>(m + 1) / static_cast<double>(H);
    w[m] = (cdf(b) - cdf(a)) / total;
  }
  return SimplexVector(w);
}

}  // namespace mflab
