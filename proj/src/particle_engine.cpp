#include "mflab/particle_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mflab/metrics.hpp"

namespace mflab {

void StepStats::merge(const StepStats& o) {
  min_raw_entry = std::min(min_raw_entry, o.min_raw_entry);
  max_sum_defect = std::max(max_sum_defect, o.max_sum_defect);
  max_exit_dt = std::max(max_exit_dt, o.max_exit_dt);
  agent_steps += o.agent_steps;
}

Marginals freeze(const EmpiricalMeasure& p) { return label_marginals(p); }

void advance_agent(const Dynamics& dyn, const EmpiricalMeasure& p, const Marginals& m, std::size_t i, double dt,
                   std::span<double> x_out, std::span<double> lambda_out, StepStats* stats) {
  const std::size_t d = p.dim(), H = p.labels();
  auto x = p.position(i);
  auto lambda = p.lambda(i);
  dyn.velocity(x, lambda, m, x_out);
  for (std::size_t k = 0; k < d; ++k) x_out[k] = x[k] + dt * x_out[k];

  const RateMatrix q = dyn.rate_matrix(x, m);
  const double exit = q.max_exit_rate();
  if (exit == 0.0) {
    std::copy(lambda.begin(), lambda.end(), lambda_out.begin());
    if (stats) {
      stats->min_raw_entry = std::min(stats->min_raw_entry, *std::min_element(lambda.begin(), lambda.end()));
      ++stats->agent_steps;
    }
    return;
  }
  ExpStats es;
  const Eigen::MatrixXd e = transition_matrix(q, dt, &es);
  double sum = 0.0, lo = es.min_entry;
  for (std::size_t h = 0; h < H; ++h) {
    double v = 0.0;
    for (std::size_t k = 0; k < H; ++k) v += e(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(h)) * lambda[k];
    lo = std::min(lo, v);
    lambda_out[h] = std::max(v, 0.0);
    sum += lambda_out[h];
  }
  const double defect = std::abs(sum - 1.0);
  if (defect > 1e-14)
    for (std::size_t h = 0; h < H; ++h) lambda_out[h] /= sum;
  if (stats) {
    stats->min_raw_entry = std::min(stats->min_raw_entry, lo);
    stats->max_sum_defect = std::max(stats->max_sum_defect, defect);
    stats->max_exit_dt = std::max(stats->max_exit_dt, dt * exit);
    ++stats->agent_steps;
  }
}

EmpiricalMeasure step(const Dynamics& dyn, const EmpiricalMeasure& p, double dt, StepStats* stats, double t,
                      std::size_t jobs) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  if (p.dim() != dyn.dim() || p.labels() != dyn.labels())
    throw std::invalid_argument("step: measure does not match the model dimensions");
  const std::size_t n = p.size(), d = p.dim(), H = p.labels();
  const Marginals m = freeze(p);
  std::vector<double> xs(n * d), ls(n * H);

  auto work = [&](std::size_t begin, std::size_t end, StepStats* st) {
    for (std::size_t i = begin; i < end; ++i)
      advance_agent(dyn, p, m, i, dt, std::span<double>(xs.data() + i * d, d),
                    std::span<double>(ls.data() + i * H, H), st);
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    work(0, n, stats);
  } else {
    std::vector<StepStats> local(jobs);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (std::size_t w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        try {
          work(n * w / jobs, n * (w + 1) / jobs, &local[w]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    if (stats)
      for (const auto& s : local) stats->merge(s);
  }

  EmpiricalMeasure out(d, H);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k)
      if (!std::isfinite(xs[i * d + k])) {
        std::ostringstream os;
        os << "non-finite position for agent " << i << " at time " << format_real(t);
        throw std::runtime_error(os.str());
      }
    out.push_back_unchecked(std::span<const double>(xs.data() + i * d, d),
                            std::span<const double>(ls.data() + i * H, H));
  }
  return out;
}

EmpiricalMeasure step(const ModelSpec& spec, const EmpiricalMeasure& p, double dt) {
  return step(KernelDynamics(spec), p, dt);
}

Monitor monitor(const EmpiricalMeasure& p, const LabelSpace& labels) {
  Monitor mo;
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double s = state_norm(p.position(i), p.lambda(i), labels);
    mo.max_state_norm = std::max(mo.max_state_norm, s);
    sum += s;
  }
  mo.first_moment = sum / static_cast<double>(p.size());
  return mo;
}

Trajectory simulate(const Dynamics& dyn, const EmpiricalMeasure& p0, const SimConfig& cfg) {
  if (!(cfg.T >= 0.0)) throw std::invalid_argument("simulate: T must be nonnegative");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("simulate: dt must be positive");
  if (cfg.T > 0.0 && cfg.dt > cfg.T) throw std::invalid_argument("simulate: dt exceeds T");
  if (cfg.record_every == 0) throw std::invalid_argument("simulate: record_every must be positive");
  const auto& labels = dyn.label_space();
  Trajectory tr;
  tr.times.push_back(0.0);
  tr.snapshots.push_back(p0);
  tr.monitors.push_back(monitor(p0, labels));
  const std::size_t steps = cfg.T > 0.0 ? static_cast<std::size_t>(std::ceil(cfg.T / cfg.dt - 1e-9)) : 0;
  EmpiricalMeasure p = p0;
  for (std::size_t s = 1; s <= steps; ++s) {
    const double t0 = static_cast<double>(s - 1) * cfg.dt;
    const double h = s == steps ? cfg.T - t0 : cfg.dt;
    p = step(dyn, p, h, &tr.stats, t0, cfg.jobs);
    if (s % cfg.record_every == 0 || s == steps) {
      tr.times.push_back(s == steps ? cfg.T : static_cast<double>(s) * cfg.dt);
      tr.snapshots.push_back(p);
      tr.monitors.push_back(monitor(p, labels));
    }
  }
  if (tr.stats.max_exit_dt > kExitRateGuard) {
    std::ostringstream os;
    os << "dt * max|q_hh| reached " << format_real(tr.stats.max_exit_dt) << " (> " << kExitRateGuard
       << "); the label update stays exact in distribution but the splitting error grows";
    tr.warnings.push_back(os.str());
  }
  return tr;
}

double support_radius(double r, double M, double t) { return (r + M * t) * std::exp(2.0 * M * t); }

SupportReport support_bound_check(const Trajectory& traj, double r, double M, const LabelSpace& labels) {
  SupportReport rep;
  rep.r = r;
  rep.M = M;
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    const double t = traj.times[s];
    const double mx = monitor(traj.snapshots[s], labels).max_state_norm;
    const double b = support_radius(r, M, t);
    rep.times.push_back(t);
    rep.max_norm.push_back(mx);
    rep.bound.push_back(b);
    rep.min_margin = std::min(rep.min_margin, b - mx);
    if (mx > b) ++rep.violations;
  }
  return rep;
}

double stability_factor(double L, double t) {
  const double lt = L * t;
  return std::exp(lt + std::expm1(lt));
}

StabilityReport stability_experiment(const Dynamics& dyn, const EmpiricalMeasure& p0a, const EmpiricalMeasure& p0b,
                                     const SimConfig& cfg, double L_R) {
  if (p0a.size() != p0b.size()) throw std::invalid_argument("stability_experiment: initial data differ in size");
  const auto ta = simulate(dyn, p0a, cfg);
  const auto tb = simulate(dyn, p0b, cfg);
  StabilityReport rep;
  rep.L_R = L_R;
  double w0 = 0.0;
  for (std::size_t s = 0; s < ta.snapshots.size(); ++s) {
    const double w = w1_product(ta.snapshots[s], tb.snapshots[s], dyn.label_space());
    if (s == 0) w0 = w;
    const double env = stability_factor(L_R, ta.times[s]) * w0;
    rep.times.push_back(ta.times[s]);
    rep.w1.push_back(w);
    rep.envelope.push_back(env);
    const double ratio = env > 0.0 ? w / env : (w > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    if (w > kStabilitySlack * env + 1e-15) rep.ok = false;
  }
  return rep;
}

}  // namespace mflab
