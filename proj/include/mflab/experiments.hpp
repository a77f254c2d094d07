#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mflab/continuum_labels.hpp"
#include "mflab/macroscopic_pde.hpp"
#include "mflab/model.hpp"
#include "mflab/particle_engine.hpp"

namespace mflab {

/// Flat `key = value` configuration. Lines starting with '#' are comments;
/// keys carry dotted section prefixes (model, init, sim, grid, pde, experiment).
class Config {
 public:
  static Config parse(std::istream& is);
  static Config parse_string(const std::string& text);
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& entries() const { return kv_; }

  /// Sorted `key = value` lines; the hash is taken over this text.
  std::string canonical() const;
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> kv_;
};

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Label names from model.labels (comma separated), defaulting to 1..H.
std::vector<std::string> label_names(const Config& cfg, std::size_t H);

/// model.type = kernel (default) or game.
bool is_game_model(const Config& cfg);
ModelSpec model_from_config(const Config& cfg);
GameKernelSpec game_from_config(const Config& cfg);
std::unique_ptr<Dynamics> dynamics_from_config(const Config& cfg);
/// The same model with every kernel and rate set to zero.
std::unique_ptr<Dynamics> frozen_dynamics_from_config(const Config& cfg);

SimConfig sim_from_config(const Config& cfg);
Grid1D grid_from_config(const Config& cfg);

/// Law of the initial agents. Positions are truncated to |x| <= radius.
struct InitialLaw {
  enum class Kind { Mixture, Profile, Fixed, Dirichlet };
  struct Component {
    std::size_t label = 0;
    double weight = 1.0;
    std::vector<double> mean;
    double std = 1.0;
  };

  Kind kind = Kind::Fixed;
  std::size_t d = 1;
  std::size_t H = 1;
  double radius = 1.0;
  /// Mixture: each component carries mass of one label; lambda_x is the
  /// density ratio of the labels at x.
  std::vector<Component> components;
  /// Profile, Fixed and Dirichlet positions.
  std::vector<double> mean;
  double std = 1.0;
  /// Profile: lambda_x = cell-integrated Gaussian centered at
  /// center + slope * tanh(x_1) with the given width.
  double profile_center = 0.5;
  double profile_slope = 0.0;
  double profile_width = 0.2;
  /// Fixed lambda, or Dirichlet concentrations.
  std::vector<double> lambda;

  /// Per-label densities (mixture only) at x.
  std::vector<double> label_densities(std::span<const double> x) const;
  std::vector<double> label_vector(std::span<const double> x, std::mt19937_64* rng = nullptr) const;
  /// Bound on the state norm |x| + ||lambda||_BL of every initial agent.
  double state_radius(const LabelSpace& labels) const;
};

InitialLaw init_from_config(const Config& cfg);
/// n i.i.d. agents.
EmpiricalMeasure sample_initial(const InitialLaw& law, std::size_t n, std::mt19937_64& rng);
/// n agents at the (i + 1/2) / n quantiles of the position law (d = 1).
EmpiricalMeasure quantile_initial(const InitialLaw& law, std::size_t n);
/// Cell averages of the mixture label densities, normalized to mass one.
GriddedDensities initial_densities(const InitialLaw& law, const Grid1D& grid);
/// Shifts every position by eps times an independent uniform unit vector.
EmpiricalMeasure perturb_positions(const EmpiricalMeasure& p, double eps, std::mt19937_64& rng);
/// Uniform subsample of m distinct agents.
EmpiricalMeasure subsample(const EmpiricalMeasure& p, std::size_t m, std::mt19937_64& rng);

/// Runs f(0..n-1) on up to jobs threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& f);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
};

struct Report {
  std::string command;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  Plot plot;
  /// key = value lines for the manifest and the CSV header.
  std::vector<std::pair<std::string, std::string>> notes;
  AnalyticConstants constants;
  bool passed = true;
  std::string verdict;
  /// Extra artifacts written next to the report: file name and contents.
  std::vector<std::pair<std::string, std::string>> files;

  void add_row(const std::vector<double>& values);
  void note(const std::string& key, const std::string& value) { notes.emplace_back(key, value); }
  void note(const std::string& key, double value);
};

std::string render_svg(const Plot& plot);
void write_report_csv(std::ostream& os, const Config& cfg, const Report& r);
/// Writes report.csv, report.svg and manifest.txt into dir.
void write_report(const std::filesystem::path& dir, const Config& cfg, const Report& r);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

/// Applies the seed override to experiment.seed.
Config with_overrides(Config cfg, const RunOptions& opt);

Report cmd_simulate(const Config& cfg, const RunOptions& opt = {});
Report cmd_pde(const Config& cfg, const RunOptions& opt = {});
Report cmd_converge(const Config& cfg, const RunOptions& opt = {});
Report cmd_stability(const Config& cfg, const RunOptions& opt = {});
Report cmd_consistency(const Config& cfg, const RunOptions& opt = {});
Report cmd_validate(const Config& cfg, const RunOptions& opt = {});
Report run_command(const std::string& name, const Config& cfg, const RunOptions& opt = {});

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Rates-only control: zero kernels and rates without density influence, so
/// every agent follows exp(T Q(x_i))^T from its start and the PDE reduces to
/// a per-cell exponential.
struct RatesOnlyControl {
  std::size_t N = 0;
  std::vector<double> particle_mass;
  std::vector<double> pde_mass;
  /// Standard error of the particle mass per label.
  std::vector<double> stderr_mass;
  double max_z = 0.0;
};

RatesOnlyControl rates_only_control(const Config& cfg, std::size_t N, std::uint64_t seed);

/// Analytic constants on the ball that contains every trajectory up to T.
AnalyticConstants constants_for(const Dynamics& dyn, const InitialLaw& law, double T);

}  // namespace mflab
