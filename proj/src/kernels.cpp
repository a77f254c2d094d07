#include "mflab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mflab/core_measures.hpp"

namespace mflab {

KernelSpec KernelSpec::linear_attraction(double a) {
  if (!(a >= 0.0)) throw std::invalid_argument("linear attraction strength must be nonnegative");
  return {KernelFamily::LinearAttraction, a, 1.0};
}

KernelSpec KernelSpec::gaussian(double a, double sigma) {
  if (!(a >= 0.0)) throw std::invalid_argument("gaussian kernel strength must be nonnegative");
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian kernel width must be positive");
  return {KernelFamily::Gaussian, a, sigma};
}

void KernelSpec::accumulate(std::span<const double> z, double weight, std::span<double> out) const {
  switch (family) {
    case KernelFamily::Zero:
      return;
    case KernelFamily::LinearAttraction: {
      const double s = -a * weight;
      for (std::size_t i = 0; i < z.size(); ++i) out[i] += s * z[i];
      return;
    }
    case KernelFamily::Gaussian: {
      double r2 = 0.0;
      for (double v : z) r2 += v * v;
      const double s = -a * weight * std::exp(-r2 / (2.0 * sigma * sigma));
      for (std::size_t i = 0; i < z.size(); ++i) out[i] += s * z[i];
      return;
    }
  }
}

double KernelSpec::growth_intercept() const {
  // max_r r exp(-r^2 / 2 sigma^2) = sigma e^{-1/2}
  return family == KernelFamily::Gaussian ? a * sigma * std::exp(-0.5) : 0.0;
}

double KernelSpec::growth_slope() const {
  return family == KernelFamily::LinearAttraction ? a : 0.0;
}

double KernelSpec::sublinear_constant() const {
  return std::max(growth_intercept(), growth_slope());
}

double KernelSpec::lipschitz() const {
  // For the Gaussian family the Jacobian eigenvalues are
  // a e^{-r^2/2s^2} and a e^{-r^2/2s^2} (1 - r^2/s^2), both bounded by a.
  return family == KernelFamily::Zero ? 0.0 : a;
}

double KernelSpec::sup_on_ball(double r) const {
  switch (family) {
    case KernelFamily::Zero:
      return 0.0;
    case KernelFamily::LinearAttraction:
      return a * r;
    case KernelFamily::Gaussian: {
      const double rr = std::min(r, sigma);
      return a * rr * std::exp(-rr * rr / (2.0 * sigma * sigma));
    }
  }
  return 0.0;
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  os << kernel_family_name(family);
  if (family == KernelFamily::LinearAttraction) os << "(a=" << format_real(a) << ")";
  if (family == KernelFamily::Gaussian) os << "(a=" << format_real(a) << ",sigma=" << format_real(sigma) << ")";
  return os.str();
}

KernelFamily parse_kernel_family(const std::string& name) {
  if (name == "zero") return KernelFamily::Zero;
  if (name == "linear_attraction") return KernelFamily::LinearAttraction;
  if (name == "gaussian") return KernelFamily::Gaussian;
  throw std::invalid_argument("unknown kernel family '" + name + "' (expected zero, linear_attraction or gaussian)");
}

std::string kernel_family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::Zero:
      return "zero";
    case KernelFamily::LinearAttraction:
      return "linear_attraction";
    case KernelFamily::Gaussian:
      return "gaussian";
  }
  return "?";
}

}  // namespace mflab
