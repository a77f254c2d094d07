#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mflab/core_measures.hpp"
#include "mflab/kernels.hpp"
#include "mflab/model.hpp"

namespace mflab {

enum class JFamily { Zero, Constant, Separable, GaussianSpace };
enum class VFamily { Zero, Attraction, Separable, GaussianSpace };

JFamily parse_j_family(const std::string& name);
VFamily parse_v_family(const std::string& name);
std::string j_family_name(JFamily f);
std::string v_family_name(VFamily f);

/// Transition game kernel
///   constant:       J = c
///   separable:      J = c (1 - u) u' + c0
///   gaussian_space: J = (c (1 - u) u' + c0) exp(-|x - x'|^2 / (2 sigma^2))
struct TransitionKernel {
  JFamily family = JFamily::Zero;
  double c = 0.0;
  double c0 = 0.0;
  double sigma = 1.0;

  /// Label factor F(u, u') and spatial factor s(z) with J = F(u, u') s(x - x').
  double label_factor(double u, double up) const;
  double spatial_factor(std::span<const double> z) const;
  double operator()(std::span<const double> x, double u, std::span<const double> xp, double up) const;
  /// sup |F| over [0,1]^2 and the Lipschitz constant of F in each label.
  double label_sup() const;
  double label_lipschitz() const;
  /// Lipschitz constant of s.
  double spatial_lipschitz() const;
};

/// Velocity game kernel V = (b0 + b u u') K(x - x')
///   attraction:     b0 = 1, b = 0, K = linear attraction
///   separable:      b0 = 0, b = 1, K = linear attraction, so V = a u u' (x' - x)
///   gaussian_space: b0 = 1, b = 0, K = Gaussian interaction
struct VelocityKernel {
  VFamily family = VFamily::Zero;
  double b0 = 0.0;
  double b = 0.0;
  KernelSpec kernel;

  static VelocityKernel zero() { return {}; }
  static VelocityKernel attraction(double a);
  static VelocityKernel separable(double a);
  static VelocityKernel gaussian_space(double a, double sigma);

  double label_factor(double u, double up) const { return b0 + b * u * up; }
  std::vector<double> operator()(std::span<const double> x, double u, std::span<const double> xp, double up) const;
  double label_sup() const;
  bool label_dependent() const { return b != 0.0; }
};

/// Game-kernel model on U = [0,1] discretized by the midpoint rule with
/// nodes u_m = (m - 1/2) / H and weights 1/H.
struct GameKernelSpec {
  std::size_t d = 1;
  std::size_t nodes = 8;
  TransitionKernel J;
  VelocityKernel V;

  std::vector<double> node_coordinates() const;
  LabelSpace label_space() const;
};

/// Finite-label image of the game model, consumable by the particle engine.
///   q_mk = sum_j (1/N) J(x, u_m, x_j, u_k) lambda_{j,k},  m != k
///   v    = sum_m lambda_m sum_j (1/N) sum_k V(x, u_m, x_j, u_k) lambda_{j,k}
class GameDynamics : public Dynamics {
 public:
  explicit GameDynamics(GameKernelSpec spec);

  const GameKernelSpec& spec() const { return spec_; }
  std::size_t dim() const override { return spec_.d; }
  const LabelSpace& label_space() const override { return labels_; }
  void velocity(std::span<const double> x, std::span<const double> lambda, const Marginals& m,
                std::span<double> out) const override;
  /// Throws when some J sample on the node grid is negative.
  RateMatrix rate_matrix(std::span<const double> x, const Marginals& m) const override;
  bool velocity_label_independent() const override { return !spec_.V.label_dependent(); }
  AnalyticConstants constants(double R) const override;
  std::string describe() const override;

 private:
  GameKernelSpec spec_;
  LabelSpace labels_;
  std::vector<double> u_;
  std::vector<double> f_j_;
  std::vector<double> f_v_;
  double min_j_ = 0.0;
};

RateMatrix discretize_generator(const GameKernelSpec& spec, std::span<const double> x, const EmpiricalMeasure& p);
std::vector<double> game_velocity(const GameKernelSpec& spec, const AgentState& y, const EmpiricalMeasure& p);

/// Sums groups of `factor` consecutive nodes.
std::vector<double> coarsen(std::span<const double> lambda, std::size_t factor);
EmpiricalMeasure coarsen(const EmpiricalMeasure& p, std::size_t factor);

/// Masses of a Gaussian profile on [0,1] integrated over the H midpoint
/// cells, normalized. Coarsening the 2H vector gives the H vector.
SimplexVector cell_integrated_gaussian(std::size_t H, double center, double width);

}  // namespace mflab
