#include "mflab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "mflab/transport.hpp"

namespace mflab {

namespace {

void check_cap(std::size_t atoms, const char* what) {
  if (atoms > kExactAtomCap)
    throw std::length_error(std::string(what) + ": " + std::to_string(atoms) +
                            " atoms exceed the exact solver cap of " + std::to_string(kExactAtomCap) +
                            "; subsample the measures before evaluating the metric");
}

std::vector<std::size_t> nonzero_atoms(const DiscreteSpatialMeasure& mu) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (mu.weight(i) > 0.0) idx.push_back(i);
  return idx;
}

}  // namespace

double w1_spatial(const DiscreteSpatialMeasure& mu, const DiscreteSpatialMeasure& nu) {
  if (mu.dim() != nu.dim()) throw std::invalid_argument("w1_spatial: dimension mismatch");
  const double mm = mu.mass(), mn = nu.mass();
  if (std::abs(mm - mn) > 1e-10)
    throw std::invalid_argument("w1_spatial: unequal masses (" + format_real(mm) + " vs " + format_real(mn) +
                                "); use bl_distance for measures of different mass");
  const auto a = nonzero_atoms(mu), b = nonzero_atoms(nu);
  check_cap(a.size() + b.size(), "w1_spatial");
  std::vector<double> supply, demand, cost(a.size() * b.size());
  for (auto i : a) supply.push_back(mu.weight(i));
  for (auto j : b) demand.push_back(nu.weight(j));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      cost[i * b.size() + j] = euclidean_distance(mu.position(a[i]), nu.position(b[j]));
  if (supply.empty() || demand.empty()) return 0.0;
  // Absorb the admissible round-off difference so the problem is balanced.
  const double sd = std::accumulate(demand.begin(), demand.end(), 0.0);
  const double ss = std::accumulate(supply.begin(), supply.end(), 0.0);
  for (double& d : demand) d *= ss / sd;
  return solve_transport(supply, demand, cost).cost;
}

double w1_product(const EmpiricalMeasure& p, const EmpiricalMeasure& q, const LabelSpace& labels) {
  if (p.size() == 0 || q.size() == 0) throw std::invalid_argument("w1_product: empty measure");
  if (p.dim() != q.dim() || p.labels() != q.labels() || p.labels() != labels.size())
    throw std::invalid_argument("w1_product: dimension or label mismatch");
  check_cap(p.size() + q.size(), "w1_product");
  const std::size_t m = p.size(), n = q.size(), H = p.labels();
  std::vector<double> supply(m, 1.0 / static_cast<double>(m));
  std::vector<double> demand(n, 1.0 / static_cast<double>(n));
  const double ss = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double sd = std::accumulate(demand.begin(), demand.end(), 0.0);
  for (double& d : demand) d *= ss / sd;
  std::vector<double> cost(m * n), diff(H);
  for (std::size_t i = 0; i < m; ++i) {
    auto li = p.lambda(i);
    for (std::size_t j = 0; j < n; ++j) {
      auto lj = q.lambda(j);
      bool same = true;
      for (std::size_t h = 0; h < H; ++h) {
        diff[h] = li[h] - lj[h];
        same = same && diff[h] == 0.0;
      }
      const double c = euclidean_distance(p.position(i), q.position(j));
      cost[i * n + j] = same ? c : c + bl_norm(diff, labels);
    }
  }
  return solve_transport(supply, demand, cost).cost;
}

double w1_product(const EmpiricalMeasure& p, const EmpiricalMeasure& q) {
  return w1_product(p, q, LabelSpace::indexed(p.labels()));
}

double bl_distance(const DiscreteSpatialMeasure& mu, const DiscreteSpatialMeasure& nu) {
  if (mu.dim() != nu.dim()) throw std::invalid_argument("bl_distance: dimension mismatch");
  const auto a = nonzero_atoms(mu), b = nonzero_atoms(nu);
  check_cap(a.size() + b.size(), "bl_distance");
  const double mm = mu.mass(), mn = nu.mass();
  // The ground point sits on the side with the smaller mass.
  const bool ground_source = mn > mm;
  const bool ground_sink = mm > mn;
  const std::size_t rows = a.size() + (ground_source ? 1 : 0);
  const std::size_t cols = b.size() + (ground_sink ? 1 : 0);
  if (rows == 0 || cols == 0) return 0.0;
  std::vector<double> supply, demand, cost(rows * cols);
  for (auto i : a) supply.push_back(mu.weight(i));
  if (ground_source) supply.push_back(mn - mm);
  for (auto j : b) demand.push_back(nu.weight(j));
  if (ground_sink) demand.push_back(mm - mn);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const bool gi = i >= a.size(), gj = j >= b.size();
      double c;
      if (gi || gj) c = (gi && gj) ? 0.0 : 1.0;
      else c = std::min(euclidean_distance(mu.position(a[i]), nu.position(b[j])), 2.0);
      cost[i * cols + j] = c;
    }
  const double ss = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double sd = std::accumulate(demand.begin(), demand.end(), 0.0);
  for (double& d : demand) d *= ss / sd;
  return solve_transport(supply, demand, cost).cost;
}

}  // namespace mflab
