#pragma once

// State-space types for agents that carry a position in R^d together with a
// probability vector over a finite label set, plus the norms and metrics used
// to compare them.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mflab {

/// Finite label set embedded in the real line. Distances between labels are
/// |coord_h - coord_k|; the default coordinates 1..H give the index metric.
class LabelSpace {
 public:
  static LabelSpace indexed(std::size_t count);
  static LabelSpace with_coordinates(std::vector<double> coords);

  std::size_t size() const { return coords_.size(); }
  double coordinate(std::size_t h) const { return coords_[h]; }
  double distance(std::size_t h, std::size_t k) const;
  /// Gap between consecutive labels h and h+1.
  double gap(std::size_t h) const { return coords_[h + 1] - coords_[h]; }

  bool operator==(const LabelSpace&) const = default;

 private:
  explicit LabelSpace(std::vector<double> coords) : coords_(std::move(coords)) {}
  std::vector<double> coords_;
};

/// Probability vector over H labels. Construction renormalizes sums within
/// 1e-9 of one and rejects anything further away.
class SimplexVector {
 public:
  static constexpr double kSumTolerance = 1e-9;

  explicit SimplexVector(std::vector<double> weights);
  static SimplexVector point_mass(std::size_t size, std::size_t label);
  static SimplexVector uniform(std::size_t size);

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t h) const { return w_[h]; }
  std::span<const double> values() const { return w_; }

 private:
  std::vector<double> w_;
};

/// Element of the H-dimensional space of signed measures on the labels.
using SignedLabelMeasure = std::vector<double>;

struct AgentState {
  std::vector<double> x;
  SimplexVector lambda;
};

/// Uniform-weight atomic probability measure on R^d x P(U), stored as
/// structure-of-arrays so that hot loops stay allocation free.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::size_t dim, std::size_t labels);
  explicit EmpiricalMeasure(std::span<const AgentState> agents);

  void push_back(const AgentState& agent);
  /// Appends without re-validating; the caller guarantees a valid simplex row.
  void push_back_unchecked(std::span<const double> x, std::span<const double> lambda);

  std::size_t size() const { return n_; }
  std::size_t dim() const { return dim_; }
  std::size_t labels() const { return labels_; }
  double weight() const { return 1.0 / static_cast<double>(n_); }

  std::span<const double> position(std::size_t i) const {
    return {x_.data() + i * dim_, dim_};
  }
  std::span<const double> lambda(std::size_t i) const {
    return {lambda_.data() + i * labels_, labels_};
  }
  AgentState agent(std::size_t i) const;

  bool operator==(const EmpiricalMeasure&) const = default;

 private:
  std::size_t dim_;
  std::size_t labels_;
  std::size_t n_ = 0;
  std::vector<double> x_;
  std::vector<double> lambda_;
};

/// Finitely supported nonnegative measure on R^d.
class DiscreteSpatialMeasure {
 public:
  explicit DiscreteSpatialMeasure(std::size_t dim) : dim_(dim) {}

  void add(std::span<const double> x, double weight);

  std::size_t size() const { return w_.size(); }
  std::size_t dim() const { return dim_; }
  std::span<const double> position(std::size_t i) const {
    return {x_.data() + i * dim_, dim_};
  }
  double weight(std::size_t i) const { return w_[i]; }
  std::span<const double> weights() const { return w_; }
  std::span<const double> positions() const { return x_; }
  double mass() const;

 private:
  std::size_t dim_;
  std::vector<double> x_;
  std::vector<double> w_;
};

double euclidean_norm(std::span<const double> x);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Exact bounded-Lipschitz norm: sup of <xi, phi> over |phi| <= 1 with
/// Lipschitz constant <= 1 for the label metric. Because the labels sit on a
/// line, adjacent constraints imply all pairwise ones and the LP is solved by
/// dynamic programming over concave piecewise-linear value functions.
double bl_norm(std::span<const double> xi, const LabelSpace& labels);
double bl_norm(std::span<const double> xi);

/// |x| + ||lambda||_BL.
double state_norm(const AgentState& y, const LabelSpace& labels);
double state_norm(const AgentState& y);
double state_norm(std::span<const double> x, std::span<const double> lambda,
                  const LabelSpace& labels);

/// Atoms x_i with weights lambda_{i,h} / N (h is zero based).
DiscreteSpatialMeasure label_marginal(const EmpiricalMeasure& p, std::size_t h);
std::vector<DiscreteSpatialMeasure> label_marginals(const EmpiricalMeasure& p);

/// First moment of P with respect to the product norm.
double first_moment(const EmpiricalMeasure& p, const LabelSpace& labels);
double first_moment(const EmpiricalMeasure& p);
/// First moment int |x| dmu of a spatial measure.
double first_moment(const DiscreteSpatialMeasure& mu);

// CSV serialization: one row per atom, 17 significant digits.
void write_csv(std::ostream& os, const EmpiricalMeasure& p);
void write_csv(std::ostream& os, const DiscreteSpatialMeasure& mu);
EmpiricalMeasure read_empirical_csv(std::istream& is);
DiscreteSpatialMeasure read_spatial_csv(std::istream& is);

/// Fixed 17-significant-digit rendering used by every CSV writer.
std::string format_real(double v);

}  // namespace mflab
