#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mflab/core_measures.hpp"
#include "mflab/kernels.hpp"
#include "mflab/rates.hpp"

namespace mflab {

enum class VelocityMode { LabelIndependent, LabelWeighted };

VelocityMode parse_velocity_mode(const std::string& name);
std::string velocity_mode_name(VelocityMode m);

/// Full closure of the kernel-driven dynamics:
///   v(x, lambda) = sum_{h,k} lambda_k (K^{hk} * mu^h)(x),
///   q_hk(x)      = alpha_hk(x, mu^1..mu^H).
/// In label-independent mode K^{hk} = K^h for every k.
struct ModelSpec {
  ModelSpec(std::size_t dim, std::size_t labels);

  std::size_t d;
  std::size_t H;
  LabelSpace label_space;
  VelocityMode mode = VelocityMode::LabelIndependent;
  /// kernels[h * H + k] = K^{hk}.
  std::vector<KernelSpec> kernels;
  RateSpec rates;

  const KernelSpec& kernel(std::size_t h, std::size_t k) const { return kernels[h * H + k]; }
  /// Sets K^{hk} for every k (label-independent form).
  void set_species_kernel(std::size_t h, const KernelSpec& k);
  void set_kernel(std::size_t h, std::size_t k, const KernelSpec& kernel);
  /// Throws when the kernel grid is inconsistent with the velocity mode.
  void validate() const;
};

using Marginals = std::vector<DiscreteSpatialMeasure>;

/// Constants of the structural assumptions, all with respect to the product
/// norm |x| + ||lambda||_BL.
struct AnalyticConstants {
  double R = 0.0;
  /// |v_Psi(y)| <= M_v (1 + ||y|| + m_1(Psi)).
  double M_v = 0.0;
  /// ||T*(x, Psi) lambda||_BL <= M_T for probability vectors lambda.
  double M_T = 0.0;
  /// ||b_Psi(y)|| <= M (1 + ||y|| + m_1(Psi)).
  double M = 0.0;
  /// Lipschitz constant of v on B_R in y and in Psi (W1).
  double L_v = 0.0;
  /// Lipschitz constant of T* lambda on B_R in x and in Psi.
  double L_T = 0.0;
  /// Lipschitz constant of b on B_R in y and in Psi.
  double L_R = 0.0;
  /// max_h |q_hh| over B_R.
  double delta_R = 0.0;
};

/// Interface consumed by the particle engine: everything is evaluated
/// against the frozen label marginals of the current empirical measure.
class Dynamics {
 public:
  virtual ~Dynamics() = default;

  virtual std::size_t dim() const = 0;
  virtual const LabelSpace& label_space() const = 0;
  std::size_t labels() const { return label_space().size(); }

  /// out = v(x, lambda); out has length dim().
  virtual void velocity(std::span<const double> x, std::span<const double> lambda, const Marginals& m,
                        std::span<double> out) const = 0;
  virtual RateMatrix rate_matrix(std::span<const double> x, const Marginals& m) const = 0;
  /// True when v does not depend on the agent's own label vector.
  virtual bool velocity_label_independent() const = 0;
  virtual AnalyticConstants constants(double R) const = 0;
  virtual std::string describe() const = 0;
};

class KernelDynamics : public Dynamics {
 public:
  explicit KernelDynamics(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  std::size_t dim() const override { return spec_.d; }
  const LabelSpace& label_space() const override { return spec_.label_space; }
  void velocity(std::span<const double> x, std::span<const double> lambda, const Marginals& m,
                std::span<double> out) const override;
  RateMatrix rate_matrix(std::span<const double> x, const Marginals& m) const override;
  bool velocity_label_independent() const override;
  AnalyticConstants constants(double R) const override;
  std::string describe() const override;

  /// Mollified densities features[w * H + l] = (eta_{w} * mu^l)(x).
  void rate_features(std::span<const double> x, const Marginals& m, std::span<double> features) const;

 private:
  ModelSpec spec_;
};

/// v_P(y) against the marginals of P.
std::vector<double> eval_velocity(const ModelSpec& spec, const AgentState& y, const EmpiricalMeasure& p);
RateMatrix eval_rate_matrix(const ModelSpec& spec, std::span<const double> x, const Marginals& marginals);

}  // namespace mflab
