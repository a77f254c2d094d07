#include "mflab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mflab {

namespace {

constexpr int kUp = 1;
constexpr int kDown = -1;
constexpr std::int8_t kStateTree = 0;
constexpr std::int8_t kStateLower = 1;

class NetworkSimplex {
 public:
  NetworkSimplex(std::span<const double> supply, std::span<const double> demand,
                 std::span<const double> cost)
      : m_(static_cast<int>(supply.size())),
        n_(static_cast<int>(demand.size())),
        node_num_(m_ + n_),
        arc_num_(m_ * n_),
        all_arc_num_(arc_num_ + node_num_),
        root_(node_num_) {
    source_.resize(all_arc_num_);
    target_.resize(all_arc_num_);
    cost_.resize(all_arc_num_);
    flow_.assign(all_arc_num_, 0.0);
    state_.assign(all_arc_num_, kStateLower);

    double max_cost = 0.0;
    for (int i = 0, e = 0; i < m_; ++i)
      for (int j = 0; j < n_; ++j, ++e) {
        source_[e] = i;
        target_[e] = m_ + j;
        cost_[e] = cost[static_cast<std::size_t>(e)];
        max_cost = std::max(max_cost, std::abs(cost_[e]));
      }
    cost_eps_ = 1e-12 * (max_cost + 1.0);

    const int nn = node_num_ + 1;
    supply_.assign(nn, 0.0);
    pi_.assign(nn, 0.0);
    parent_.assign(nn, -1);
    pred_.assign(nn, -1);
    thread_.assign(nn, 0);
    rev_thread_.assign(nn, 0);
    succ_num_.assign(nn, 0);
    last_succ_.assign(nn, 0);
    pred_dir_.assign(nn, 0);

    double sum_supply = 0.0;
    for (int i = 0; i < m_; ++i) {
      supply_[i] = supply[static_cast<std::size_t>(i)];
      sum_supply += supply_[i];
    }
    for (int j = 0; j < n_; ++j) {
      supply_[m_ + j] = -demand[static_cast<std::size_t>(j)];
      sum_supply += supply_[m_ + j];
    }

    const double art_cost = (max_cost + 1.0) * node_num_;
    parent_[root_] = -1;
    pred_[root_] = -1;
    thread_[root_] = 0;
    rev_thread_[0] = root_;
    succ_num_[root_] = node_num_ + 1;
    last_succ_[root_] = root_ - 1;
    supply_[root_] = -sum_supply;
    pi_[root_] = 0.0;

    for (int u = 0, e = arc_num_; u != node_num_; ++u, ++e) {
      parent_[u] = root_;
      pred_[u] = e;
      thread_[u] = u + 1;
      rev_thread_[u + 1] = u;
      succ_num_[u] = 1;
      last_succ_[u] = u;
      state_[e] = kStateTree;
      if (supply_[u] >= 0.0) {
        pred_dir_[u] = kUp;
        pi_[u] = 0.0;
        source_[e] = u;
        target_[e] = root_;
        flow_[e] = supply_[u];
        cost_[e] = 0.0;
      } else {
        pred_dir_[u] = kDown;
        pi_[u] = art_cost;
        source_[e] = root_;
        target_[e] = u;
        flow_[e] = -supply_[u];
        cost_[e] = art_cost;
      }
    }

    block_size_ = std::max(10, static_cast<int>(std::sqrt(static_cast<double>(arc_num_))));
  }

  std::size_t run() {
    std::size_t pivots = 0;
    const std::size_t limit = 50ull * static_cast<std::size_t>(all_arc_num_) + 100000ull;
    while (find_entering_arc()) {
      find_join_node();
      find_leaving_arc();
      change_flow();
      update_tree_structure();
      update_potential();
      if (++pivots > limit) throw std::runtime_error("network simplex did not converge");
    }
    return pivots;
  }

  double total_cost() const {
    double c = 0.0;
    for (int e = 0; e < arc_num_; ++e) c += flow_[e] * cost_[e];
    return c;
  }

  double artificial_flow() const {
    double f = 0.0;
    for (int e = arc_num_; e < all_arc_num_; ++e) f += flow_[e];
    return f;
  }

  double flow(int e) const { return flow_[e]; }

 private:
  double reduced(int e) const { return cost_[e] + pi_[source_[e]] - pi_[target_[e]]; }

  bool find_entering_arc() {
    double min = -cost_eps_;
    int cnt = block_size_;
    in_arc_ = -1;
    int e;
    for (e = next_arc_; e != arc_num_; ++e) {
      if (state_[e] == kStateLower) {
        const double c = reduced(e);
        if (c < min) {
          min = c;
          in_arc_ = e;
        }
      }
      if (--cnt == 0) {
        if (in_arc_ >= 0) {
          next_arc_ = e + 1 == arc_num_ ? 0 : e + 1;
          return true;
        }
        cnt = block_size_;
      }
    }
    for (e = 0; e != next_arc_; ++e) {
      if (state_[e] == kStateLower) {
        const double c = reduced(e);
        if (c < min) {
          min = c;
          in_arc_ = e;
        }
      }
      if (--cnt == 0) {
        if (in_arc_ >= 0) {
          next_arc_ = e + 1;
          return true;
        }
        cnt = block_size_;
      }
    }
    if (in_arc_ < 0) return false;
    next_arc_ = e == arc_num_ ? 0 : e;
    return true;
  }

  void find_join_node() {
    int u = source_[in_arc_], v = target_[in_arc_];
    while (u != v) {
      if (succ_num_[u] < succ_num_[v]) u = parent_[u];
      else v = parent_[v];
    }
    join_ = u;
  }

  void find_leaving_arc() {
    const int first = source_[in_arc_];
    const int second = target_[in_arc_];
    delta_ = std::numeric_limits<double>::infinity();
    int result = 0;
    for (int u = first; u != join_; u = parent_[u]) {
      if (pred_dir_[u] != kUp) continue;
      const double d = flow_[pred_[u]];
      if (d < delta_) {
        delta_ = d;
        u_out_ = u;
        result = 1;
      }
    }
    for (int u = second; u != join_; u = parent_[u]) {
      if (pred_dir_[u] != kDown) continue;
      const double d = flow_[pred_[u]];
      if (d <= delta_) {
        delta_ = d;
        u_out_ = u;
        result = 2;
      }
    }
    if (result == 0) throw std::runtime_error("transportation problem is unbounded");
    if (result == 1) {
      u_in_ = first;
      v_in_ = second;
    } else {
      u_in_ = second;
      v_in_ = first;
    }
  }

  void change_flow() {
    if (delta_ > 0.0) {
      const double val = delta_;
      flow_[in_arc_] += val;
      for (int u = source_[in_arc_]; u != join_; u = parent_[u]) flow_[pred_[u]] -= pred_dir_[u] * val;
      for (int u = target_[in_arc_]; u != join_; u = parent_[u]) flow_[pred_[u]] += pred_dir_[u] * val;
    }
    state_[in_arc_] = kStateTree;
    flow_[pred_[u_out_]] = 0.0;
    state_[pred_[u_out_]] = kStateLower;
  }

  void update_tree_structure() {
    const int old_rev_thread = rev_thread_[u_out_];
    const int old_succ_num = succ_num_[u_out_];
    const int old_last_succ = last_succ_[u_out_];
    v_out_ = parent_[u_out_];

    if (u_in_ == u_out_) {
      parent_[u_in_] = v_in_;
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source_[in_arc_] ? kUp : kDown;
      if (thread_[v_in_] != u_out_) {
        int after = thread_[old_last_succ];
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
        after = thread_[v_in_];
        thread_[v_in_] = u_out_;
        rev_thread_[u_out_] = v_in_;
        thread_[old_last_succ] = after;
        rev_thread_[after] = old_last_succ;
      }
    } else {
      const int thread_continue = old_rev_thread == v_in_ ? thread_[old_last_succ] : thread_[v_in_];

      int stem = u_in_;
      int par_stem = v_in_;
      int next_stem;
      int last = last_succ_[u_in_];
      int before, after = thread_[last];
      thread_[v_in_] = u_in_;
      dirty_revs_.clear();
      dirty_revs_.push_back(v_in_);
      while (stem != u_out_) {
        next_stem = parent_[stem];
        thread_[last] = next_stem;
        dirty_revs_.push_back(last);

        before = rev_thread_[stem];
        thread_[before] = after;
        rev_thread_[after] = before;

        parent_[stem] = par_stem;
        par_stem = stem;
        stem = next_stem;

        last = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
        after = thread_[last];
      }
      parent_[u_out_] = par_stem;
      thread_[last] = thread_continue;
      rev_thread_[thread_continue] = last;
      last_succ_[u_out_] = last;

      if (old_rev_thread != v_in_) {
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
      }

      for (int u : dirty_revs_) rev_thread_[thread_[u]] = u;

      int tmp_sc = 0, tmp_ls = last_succ_[u_out_];
      for (int u = u_out_, p = parent_[u]; u != u_in_; u = p, p = parent_[u]) {
        pred_[u] = pred_[p];
        pred_dir_[u] = -pred_dir_[p];
        tmp_sc += succ_num_[u] - succ_num_[p];
        succ_num_[u] = tmp_sc;
        last_succ_[p] = tmp_ls;
      }
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source_[in_arc_] ? kUp : kDown;
      succ_num_[u_in_] = old_succ_num;
    }

    const int up_limit_out = last_succ_[join_] == v_in_ ? join_ : -1;
    const int last_succ_out = last_succ_[u_out_];
    for (int u = v_in_; u != -1 && last_succ_[u] == v_in_; u = parent_[u]) last_succ_[u] = last_succ_out;

    if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
      for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u])
        last_succ_[u] = old_rev_thread;
    } else if (last_succ_out != old_last_succ) {
      for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u])
        last_succ_[u] = last_succ_out;
    }

    for (int u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
    for (int u = v_out_; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
  }

  void update_potential() {
    const double sigma = pi_[v_in_] - pi_[u_in_] - pred_dir_[u_in_] * cost_[in_arc_];
    const int end = thread_[last_succ_[u_in_]];
    for (int u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
  }

  int m_, n_;
  int node_num_, arc_num_, all_arc_num_;
  int root_;
  double cost_eps_ = 0.0;
  int block_size_ = 10;
  int next_arc_ = 0;

  std::vector<int> source_, target_;
  std::vector<double> cost_, flow_;
  std::vector<std::int8_t> state_;

  std::vector<double> supply_, pi_;
  std::vector<int> parent_, pred_, thread_, rev_thread_, succ_num_, last_succ_, pred_dir_;
  std::vector<int> dirty_revs_;

  int in_arc_ = -1, join_ = -1, u_in_ = -1, v_in_ = -1, u_out_ = -1, v_out_ = -1;
  double delta_ = 0.0;
};

}  // namespace

TransportSolution solve_transport(std::span<const double> supply, std::span<const double> demand,
                                  std::span<const double> cost, bool keep_flow) {
  const std::size_t m = supply.size(), n = demand.size();
  if (cost.size() != m * n) throw std::invalid_argument("cost matrix has the wrong size");
  double ts = 0.0, td = 0.0;
  for (double s : supply) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("supplies must be finite and nonnegative");
    ts += s;
  }
  for (double d : demand) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw std::invalid_argument("demands must be finite and nonnegative");
    td += d;
  }
  for (double c : cost)
    if (!std::isfinite(c)) throw std::invalid_argument("transport costs must be finite");
  const double scale = std::max({ts, td, 1e-300});
  if (std::abs(ts - td) > 1e-9 * scale)
    throw std::invalid_argument("transportation problem is unbalanced: supply " + std::to_string(ts) +
                                " vs demand " + std::to_string(td));
  TransportSolution out;
  if (m == 0 || n == 0) return out;

  NetworkSimplex ns(supply, demand, cost);
  out.pivots = ns.run();
  if (ns.artificial_flow() > 1e-9 * scale)
    throw std::runtime_error("transportation problem is infeasible");
  out.cost = ns.total_cost();
  if (keep_flow) {
    out.flow.resize(m * n);
    for (std::size_t e = 0; e < m * n; ++e) out.flow[e] = ns.flow(static_cast<int>(e));
  }
  return out;
}

}  // namespace mflab
