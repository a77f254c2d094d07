#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mflab/core_measures.hpp"

namespace mflab {

enum class Gain { Constant, Decay };

/// g(x) = 1 or 1 / (1 + |x|^2).
double gain_value(Gain g, std::span<const double> x);
double gain_lipschitz(Gain g);
Gain parse_gain(const std::string& name);
std::string gain_name(Gain g);

/// Mollifier eta(z) = exp(-|z|^2 / (2 sigma^2)), sup eta = 1.
double mollifier(double sigma, std::span<const double> z);

/// Rate law for one ordered pair h != k:
///   alpha_hk(x, mu^1..mu^H) = g(x) (a0 + sum_l c_l (eta_sigma * mu^l)(x)).
struct PairRate {
  double a0 = 0.0;
  std::vector<double> c;
  double sigma = 1.0;
  Gain gain = Gain::Constant;

  bool has_influence() const;
  double max_influence() const;
};

/// Collection of pair rates over H labels. Every distinct mollifier width
/// is registered once so that mollified densities can be shared.
class RateSpec {
 public:
  explicit RateSpec(std::size_t labels);

  void set(std::size_t h, std::size_t k, PairRate rate);
  const PairRate& pair(std::size_t h, std::size_t k) const { return pairs_[h * H_ + k]; }
  std::size_t labels() const { return H_; }

  const std::vector<double>& widths() const { return widths_; }
  std::size_t width_index(std::size_t h, std::size_t k) const { return width_of_[h * H_ + k]; }
  /// True when (eta_{widths[w]} * mu^l) enters some rate.
  bool feature_used(std::size_t w, std::size_t l) const { return used_[w * H_ + l]; }

  /// Writes q_hk for h != k and the diagonal into q, given
  /// features[w * H + l] = (eta_{widths[w]} * mu^l)(x).
  void assemble(std::span<const double> x, std::span<const double> features, Eigen::MatrixXd& q) const;

  /// Upper bound of alpha_hk when the measures have total mass at most one.
  double rate_bound(std::size_t h, std::size_t k) const;

 private:
  std::size_t H_;
  std::vector<PairRate> pairs_;
  std::vector<double> widths_;
  std::vector<std::size_t> width_of_;
  std::vector<bool> used_;
};

/// Generator of a continuous-time Markov chain on the labels: nonnegative
/// off-diagonal entries and zero row sums.
class RateMatrix {
 public:
  /// Validates an explicit matrix (row sums within 1e-12 relative to the rates).
  explicit RateMatrix(Eigen::MatrixXd q);
  /// Uses the off-diagonal part of q and sets q_hh = -sum_{k != h} q_hk.
  static RateMatrix from_off_diagonal(Eigen::MatrixXd q);
  static RateMatrix zero(std::size_t labels);

  std::size_t size() const { return static_cast<std::size_t>(q_.rows()); }
  double operator()(std::size_t h, std::size_t k) const {
    return q_(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(k));
  }
  const Eigen::MatrixXd& matrix() const { return q_; }
  /// max_h |q_hh|.
  double max_exit_rate() const;

 private:
  struct Trusted {};
  RateMatrix(Eigen::MatrixXd q, Trusted) : q_(std::move(q)) {}
  Eigen::MatrixXd q_;
};

/// Q^T lambda: the adjoint action on label distributions.
SignedLabelMeasure apply_adjoint(const RateMatrix& q, std::span<const double> lambda);
SignedLabelMeasure apply_adjoint(const RateMatrix& q, const SimplexVector& lambda);

struct ExpStats {
  /// Smallest entry before clamping.
  double min_entry = 0.0;
  /// Largest |row sum - 1| before the final renormalization.
  double max_row_defect = 0.0;
  int squarings = 0;
  int taylor_terms = 0;
};

/// exp(dt Q) by scaling and squaring. Each scaled factor is evaluated as
/// e^{-c} sum_j (B + cI)^j / j! with B + cI entrywise nonnegative, so the
/// result is nonnegative up to round-off; entries are clamped at zero and
/// rows renormalized. Throws on non-finite entries.
Eigen::MatrixXd transition_matrix(const RateMatrix& q, double dt, ExpStats* stats = nullptr);

}  // namespace mflab
