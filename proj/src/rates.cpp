#include "mflab/rates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mflab {

double gain_value(Gain g, std::span<const double> x) {
  if (g == Gain::Constant) return 1.0;
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return 1.0 / (1.0 + r2);
}

double gain_lipschitz(Gain g) {
  // sup_r 2r / (1 + r^2)^2 is attained at r = 1/sqrt(3).
  return g == Gain::Constant ? 0.0 : 3.0 * std::sqrt(3.0) / 8.0;
}

Gain parse_gain(const std::string& name) {
  if (name == "constant") return Gain::Constant;
  if (name == "decay") return Gain::Decay;
  throw std::invalid_argument("unknown rate gain '" + name + "' (expected constant or decay)");
}

std::string gain_name(Gain g) { return g == Gain::Constant ? "constant" : "decay"; }

double mollifier(double sigma, std::span<const double> z) {
  double r2 = 0.0;
  for (double v : z) r2 += v * v;
  return std::exp(-r2 / (2.0 * sigma * sigma));
}

bool PairRate::has_influence() const {
  return std::any_of(c.begin(), c.end(), [](double v) { return v != 0.0; });
}

double PairRate::max_influence() const {
  double m = 0.0;
  for (double v : c) m = std::max(m, v);
  return m;
}

RateSpec::RateSpec(std::size_t labels)
    : H_(labels), pairs_(labels * labels), width_of_(labels * labels, 0) {
  if (labels == 0) throw std::invalid_argument("rate spec needs at least one label");
  for (auto& p : pairs_) p.c.assign(labels, 0.0);
}

void RateSpec::set(std::size_t h, std::size_t k, PairRate rate) {
  if (h >= H_ || k >= H_) throw std::invalid_argument("rate pair index out of range");
  if (h == k) throw std::invalid_argument("rates are defined only for h != k");
  if (rate.c.empty()) rate.c.assign(H_, 0.0);
  if (rate.c.size() != H_) throw std::invalid_argument("rate influence vector must have one entry per label");
  if (!(rate.a0 >= 0.0)) throw std::invalid_argument("base rate must be nonnegative");
  for (double v : rate.c)
    if (!(v >= 0.0)) throw std::invalid_argument("influence coefficients must be nonnegative");
  if (!(rate.sigma > 0.0)) throw std::invalid_argument("mollifier width must be positive");
  pairs_[h * H_ + k] = std::move(rate);

  widths_.clear();
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto& p = pairs_[i];
    if (!p.has_influence()) continue;
    auto it = std::find(widths_.begin(), widths_.end(), p.sigma);
    if (it == widths_.end()) {
      widths_.push_back(p.sigma);
      it = widths_.end() - 1;
    }
    width_of_[i] = static_cast<std::size_t>(it - widths_.begin());
  }
  used_.assign(widths_.size() * H_, false);
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto& p = pairs_[i];
    if (!p.has_influence()) continue;
    for (std::size_t l = 0; l < H_; ++l)
      if (p.c[l] != 0.0) used_[width_of_[i] * H_ + l] = true;
  }
}

void RateSpec::assemble(std::span<const double> x, std::span<const double> features, Eigen::MatrixXd& q) const {
  const auto H = static_cast<Eigen::Index>(H_);
  q.setZero(H, H);
  for (std::size_t h = 0; h < H_; ++h) {
    double row = 0.0;
    for (std::size_t k = 0; k < H_; ++k) {
      if (h == k) continue;
      const auto& p = pair(h, k);
      double v = p.a0;
      if (p.has_influence()) {
        const std::size_t w = width_of_[h * H_ + k];
        for (std::size_t l = 0; l < H_; ++l)
          if (p.c[l] != 0.0) v += p.c[l] * features[w * H_ + l];
      }
      v *= gain_value(p.gain, x);
      q(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(k)) = v;
      row += v;
    }
    q(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(h)) = -row;
  }
}

double RateSpec::rate_bound(std::size_t h, std::size_t k) const {
  if (h == k) return 0.0;
  const auto& p = pair(h, k);
  return p.a0 + p.max_influence();
}

RateMatrix::RateMatrix(Eigen::MatrixXd q) : q_(std::move(q)) {
  if (q_.rows() != q_.cols() || q_.rows() == 0) throw std::invalid_argument("rate matrix must be square and nonempty");
  for (Eigen::Index h = 0; h < q_.rows(); ++h) {
    double sum = 0.0, scale = 0.0;
    for (Eigen::Index k = 0; k < q_.cols(); ++k) {
      const double v = q_(h, k);
      if (!std::isfinite(v)) throw std::invalid_argument("rate matrix entry is not finite");
      if (h != k && v < 0.0) throw std::invalid_argument("rate matrix has a negative off-diagonal entry");
      sum += v;
      scale += std::abs(v);
    }
    if (std::abs(sum) > 1e-12 * std::max(1.0, scale))
      throw std::invalid_argument("rate matrix row does not sum to zero");
  }
}

RateMatrix RateMatrix::from_off_diagonal(Eigen::MatrixXd q) {
  if (q.rows() != q.cols() || q.rows() == 0) throw std::invalid_argument("rate matrix must be square and nonempty");
  for (Eigen::Index h = 0; h < q.rows(); ++h) {
    double row = 0.0;
    for (Eigen::Index k = 0; k < q.cols(); ++k) {
      if (h == k) continue;
      if (!std::isfinite(q(h, k))) throw std::invalid_argument("rate matrix entry is not finite");
      if (q(h, k) < 0.0) throw std::invalid_argument("rate matrix has a negative off-diagonal entry");
      row += q(h, k);
    }
    q(h, h) = -row;
  }
  return RateMatrix(std::move(q), Trusted{});
}

RateMatrix RateMatrix::zero(std::size_t labels) {
  const auto H = static_cast<Eigen::Index>(labels);
  return RateMatrix(Eigen::MatrixXd::Zero(H, H), Trusted{});
}

double RateMatrix::max_exit_rate() const { return (-q_.diagonal()).maxCoeff(); }

SignedLabelMeasure apply_adjoint(const RateMatrix& q, std::span<const double> lambda) {
  const std::size_t H = q.size();
  if (lambda.size() != H) throw std::invalid_argument("apply_adjoint: size mismatch");
  SignedLabelMeasure out(H, 0.0);
  for (std::size_t k = 0; k < H; ++k)
    for (std::size_t h = 0; h < H; ++h) out[h] += q(k, h) * lambda[k];
  return out;
}

SignedLabelMeasure apply_adjoint(const RateMatrix& q, const SimplexVector& lambda) {
  return apply_adjoint(q, lambda.values());
}

Eigen::MatrixXd transition_matrix(const RateMatrix& q, double dt, ExpStats* stats) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("transition_matrix: dt must be positive");
  const Eigen::Index H = static_cast<Eigen::Index>(q.size());
  const Eigen::MatrixXd a = dt * q.matrix();
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  if (!std::isfinite(norm)) throw std::runtime_error("transition_matrix: non-finite generator");
  int s = 0;
  if (norm > 0.5) s = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  Eigen::MatrixXd b = std::ldexp(1.0, -s) * a;
  const double c = std::max(0.0, (-b.diagonal()).maxCoeff());
  b.diagonal().array() += c;
  b = b.cwiseMax(0.0);

  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(H, H);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(H, H);
  int terms = 0;
  for (int j = 1; j <= 40; ++j) {
    term = (term * b) / static_cast<double>(j);
    sum += term;
    terms = j;
    if (j >= 6 && term.maxCoeff() < 1e-18) break;
  }
  Eigen::MatrixXd e = std::exp(-c) * sum;
  for (int i = 0; i < s; ++i) e = e * e;

  if (!e.allFinite()) throw std::runtime_error("transition_matrix: non-finite entries");
  double defect = 0.0;
  for (Eigen::Index h = 0; h < H; ++h) defect = std::max(defect, std::abs(e.row(h).sum() - 1.0));
  const double min_entry = e.minCoeff();
  e = e.cwiseMax(0.0);
  for (Eigen::Index h = 0; h < H; ++h) {
    const double rs = e.row(h).sum();
    if (!(rs > 0.0)) throw std::runtime_error("transition_matrix: degenerate row");
    if (rs != 1.0) e.row(h) /= rs;
  }
  if (stats) {
    stats->min_entry = min_entry;
    stats->max_row_defect = defect;
    stats->squarings = s;
    stats->taylor_terms = terms;
  }
  return e;
}

}  // namespace mflab
