#pragma once

#include <span>
#include <string>

namespace mflab {

enum class KernelFamily { Zero, LinearAttraction, Gaussian };

/// Interaction kernel K: R^d -> R^d.
///   LinearAttraction(a): K(z) = -a z
///   Gaussian(a, sigma):  K(z) = -a z exp(-|z|^2 / (2 sigma^2))
struct KernelSpec {
  KernelFamily family = KernelFamily::Zero;
  double a = 0.0;
  double sigma = 1.0;

  static KernelSpec zero() { return {}; }
  static KernelSpec linear_attraction(double a);
  static KernelSpec gaussian(double a, double sigma);

  /// out += weight * K(z).
  void accumulate(std::span<const double> z, double weight, std::span<double> out) const;

  /// Constants of the bound |K(z)| <= intercept + slope |z|.
  double growth_intercept() const;
  double growth_slope() const;
  /// M with |K(z)| <= M (1 + |z|).
  double sublinear_constant() const;
  /// Global Lipschitz constant.
  double lipschitz() const;
  /// sup of |K(z)| over |z| <= r.
  double sup_on_ball(double r) const;

  bool is_zero() const { return family == KernelFamily::Zero || a == 0.0; }
  bool operator==(const KernelSpec&) const = default;
  std::string describe() const;
};

KernelFamily parse_kernel_family(const std::string& name);
std::string kernel_family_name(KernelFamily f);

}  // namespace mflab
