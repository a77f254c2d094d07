#include "mflab/core_measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mflab {

namespace {

constexpr double kNegativeClamp = 1e-13;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

LabelSpace LabelSpace::indexed(std::size_t count) {
  require(count >= 1, "label space needs at least one label");
  std::vector<double> c(count);
  for (std::size_t h = 0; h < count; ++h) c[h] = static_cast<double>(h + 1);
  return LabelSpace(std::move(c));
}

LabelSpace LabelSpace::with_coordinates(std::vector<double> coords) {
  require(!coords.empty(), "label space needs at least one label");
  for (std::size_t h = 0; h + 1 < coords.size(); ++h)
    require(coords[h + 1] > coords[h], "label coordinates must be strictly increasing");
  return LabelSpace(std::move(coords));
}

double LabelSpace::distance(std::size_t h, std::size_t k) const {
  return std::abs(coords_[h] - coords_[k]);
}

SimplexVector::SimplexVector(std::vector<double> weights) : w_(std::move(weights)) {
  require(!w_.empty(), "simplex vector must be nonempty");
  double sum = 0.0;
  for (double& v : w_) {
    require(std::isfinite(v), "simplex vector entry is not finite");
    require(v >= -kNegativeClamp, "simplex vector entry is negative");
    if (v < 0.0) v = 0.0;
    sum += v;
  }
  require(std::abs(sum - 1.0) <= kSumTolerance, "simplex vector does not sum to one");
  if (std::abs(sum - 1.0) > 1e-15)
    for (double& v : w_) v /= sum;
}

SimplexVector SimplexVector::point_mass(std::size_t size, std::size_t label) {
  require(label < size, "point mass label out of range");
  std::vector<double> w(size, 0.0);
  w[label] = 1.0;
  return SimplexVector(std::move(w));
}

SimplexVector SimplexVector::uniform(std::size_t size) {
  require(size >= 1, "simplex vector must be nonempty");
  return SimplexVector(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim, std::size_t labels)
    : dim_(dim), labels_(labels) {
  require(labels >= 1, "empirical measure needs at least one label");
}

EmpiricalMeasure::EmpiricalMeasure(std::span<const AgentState> agents) : dim_(0), labels_(0) {
  require(!agents.empty(), "empirical measure needs at least one agent");
  dim_ = agents.front().x.size();
  labels_ = agents.front().lambda.size();
  for (const auto& a : agents) push_back(a);
}

void EmpiricalMeasure::push_back(const AgentState& agent) {
  require(agent.x.size() == dim_, "agent dimension mismatch");
  require(agent.lambda.size() == labels_, "agent label count mismatch");
  for (double v : agent.x) require(std::isfinite(v), "agent position is not finite");
  push_back_unchecked(agent.x, agent.lambda.values());
}

void EmpiricalMeasure::push_back_unchecked(std::span<const double> x,
                                           std::span<const double> lambda) {
  x_.insert(x_.end(), x.begin(), x.end());
  lambda_.insert(lambda_.end(), lambda.begin(), lambda.end());
  ++n_;
}

AgentState EmpiricalMeasure::agent(std::size_t i) const {
  auto x = position(i);
  auto l = lambda(i);
  return AgentState{std::vector<double>(x.begin(), x.end()),
                    SimplexVector(std::vector<double>(l.begin(), l.end()))};
}

void DiscreteSpatialMeasure::add(std::span<const double> x, double weight) {
  require(x.size() == dim_, "atom dimension mismatch");
  require(weight >= 0.0 && std::isfinite(weight), "atom weight must be finite and nonnegative");
  x_.insert(x_.end(), x.begin(), x.end());
  w_.push_back(weight);
}

double DiscreteSpatialMeasure::mass() const {
  return std::accumulate(w_.begin(), w_.end(), 0.0);
}

double euclidean_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace {

// Concave piecewise-linear function on [-1, 1] stored by its breakpoints.
struct Concave {
  std::vector<double> t;
  std::vector<double> v;

  double at(double s) const {
    if (s <= t.front()) return v.front();
    if (s >= t.back()) return v.back();
    auto it = std::upper_bound(t.begin(), t.end(), s);
    const std::size_t j = static_cast<std::size_t>(it - t.begin());
    const double a = t[j - 1], b = t[j];
    if (b == a) return std::max(v[j - 1], v[j]);
    const double w = (s - a) / (b - a);
    return v[j - 1] + w * (v[j] - v[j - 1]);
  }

  double argmax() const {
    std::size_t best = 0;
    for (std::size_t j = 1; j < v.size(); ++j)
      if (v[j] > v[best]) best = j;
    return t[best];
  }
};

// W(t) = max of V over [t-g, t+g] intersected with [-1, 1].
Concave window_max(const Concave& f, double g) {
  const double s = f.argmax();
  const double vmax = f.at(s);
  auto eval = [&](double t) {
    if (t + g <= s) return f.at(t + g);
    if (t - g >= s) return f.at(t - g);
    return vmax;
  };
  std::vector<double> cand{-1.0, 1.0, s - g, s + g};
  for (double b : f.t) {
    cand.push_back(b - g);
    cand.push_back(b + g);
  }
  std::vector<double> pts;
  for (double c : cand)
    if (c >= -1.0 && c <= 1.0) pts.push_back(c);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  Concave out;
  out.t = pts;
  out.v.reserve(pts.size());
  for (double c : pts) out.v.push_back(eval(c));
  return out;
}

}  // namespace

double bl_norm(std::span<const double> xi, const LabelSpace& labels) {
  require(xi.size() == labels.size(), "signed measure length does not match label space");
  for (double v : xi) require(std::isfinite(v), "signed measure entry is not finite");
  Concave f{{-1.0, 1.0}, {-xi[0], xi[0]}};
  for (std::size_t h = 1; h < xi.size(); ++h) {
    f = window_max(f, labels.gap(h - 1));
    for (std::size_t j = 0; j < f.t.size(); ++j) f.v[j] += xi[h] * f.t[j];
  }
  double best = *std::max_element(f.v.begin(), f.v.end());
  return std::max(best, 0.0);
}

double bl_norm(std::span<const double> xi) {
  return bl_norm(xi, LabelSpace::indexed(xi.size()));
}

double state_norm(std::span<const double> x, std::span<const double> lambda,
                  const LabelSpace& labels) {
  return euclidean_norm(x) + bl_norm(lambda, labels);
}

double state_norm(const AgentState& y, const LabelSpace& labels) {
  return state_norm(y.x, y.lambda.values(), labels);
}

double state_norm(const AgentState& y) {
  return state_norm(y, LabelSpace::indexed(y.lambda.size()));
}

DiscreteSpatialMeasure label_marginal(const EmpiricalMeasure& p, std::size_t h) {
  require(h < p.labels(), "label index out of range");
  DiscreteSpatialMeasure mu(p.dim());
  const double w = p.weight();
  for (std::size_t i = 0; i < p.size(); ++i) mu.add(p.position(i), p.lambda(i)[h] * w);
  return mu;
}

std::vector<DiscreteSpatialMeasure> label_marginals(const EmpiricalMeasure& p) {
  std::vector<DiscreteSpatialMeasure> out;
  out.reserve(p.labels());
  for (std::size_t h = 0; h < p.labels(); ++h) out.push_back(label_marginal(p, h));
  return out;
}

double first_moment(const EmpiricalMeasure& p, const LabelSpace& labels) {
  require(p.size() > 0, "first moment of an empty measure");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += state_norm(p.position(i), p.lambda(i), labels);
  return s / static_cast<double>(p.size());
}

double first_moment(const EmpiricalMeasure& p) {
  return first_moment(p, LabelSpace::indexed(p.labels()));
}

double first_moment(const DiscreteSpatialMeasure& mu) {
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += euclidean_norm(mu.position(i)) * mu.weight(i);
  return s;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& os, const EmpiricalMeasure& p) {
  for (std::size_t k = 0; k < p.dim(); ++k) os << (k ? "," : "") << "x_" << k + 1;
  for (std::size_t h = 0; h < p.labels(); ++h) os << ",lambda_" << h + 1;
  os << '\n';
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto x = p.position(i);
    auto l = p.lambda(i);
    for (std::size_t k = 0; k < x.size(); ++k) os << (k ? "," : "") << format_real(x[k]);
    for (double v : l) os << ',' << format_real(v);
    os << '\n';
  }
}

void write_csv(std::ostream& os, const DiscreteSpatialMeasure& mu) {
  for (std::size_t k = 0; k < mu.dim(); ++k) os << "x_" << k + 1 << ',';
  os << "weight\n";
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (double v : mu.position(i)) os << format_real(v) << ',';
    os << format_real(mu.weight(i)) << '\n';
  }
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::vector<double> parse_row(const std::string& line, std::size_t expected) {
  auto cells = split_commas(line);
  if (cells.size() != expected)
    throw std::runtime_error("csv row has " + std::to_string(cells.size()) + " columns, expected " +
                             std::to_string(expected));
  std::vector<double> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(std::stod(c));
  return out;
}

}  // namespace

EmpiricalMeasure read_empirical_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty csv");
  std::size_t dim = 0, labels = 0;
  for (const auto& h : split_commas(line)) {
    if (h.rfind("x_", 0) == 0) ++dim;
    else if (h.rfind("lambda_", 0) == 0) ++labels;
    else throw std::runtime_error("unexpected csv column '" + h + "'");
  }
  EmpiricalMeasure p(dim, labels);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto row = parse_row(line, dim + labels);
    AgentState a{std::vector<double>(row.begin(), row.begin() + static_cast<long>(dim)),
                 SimplexVector(std::vector<double>(row.begin() + static_cast<long>(dim), row.end()))};
    p.push_back(a);
  }
  if (p.size() == 0) throw std::runtime_error("csv contains no agents");
  return p;
}

DiscreteSpatialMeasure read_spatial_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty csv");
  auto header = split_commas(line);
  if (header.empty() || header.back() != "weight")
    throw std::runtime_error("spatial csv must end with a weight column");
  const std::size_t dim = header.size() - 1;
  DiscreteSpatialMeasure mu(dim);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto row = parse_row(line, dim + 1);
    mu.add(std::span<const double>(row.data(), dim), row.back());
  }
  return mu;
}

}  // namespace mflab
