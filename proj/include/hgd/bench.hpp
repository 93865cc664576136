#pragma once

// Experiment configs, multi-seed sweeps, CSV output and rate fits.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgd/dynamics.hpp"
#include "hgd/games.hpp"
#include "hgd/repmaps.hpp"
#include "hgd/runner.hpp"

namespace hgd {

struct ExperimentConfig {
  GameParams game;
  MapKind map_spec = MapKind::MP;
  std::uint64_t map_seed = 0;
  std::string map_weights;  // optional product-map JSON file
  std::vector<Algorithm> algorithms{Algorithm::PHGD};
  StepSchedule schedule;
  NoiseModel noise;
  double init_range = 2.5;
  std::uint64_t init_seed = 0;
  std::optional<Profile> init_x;
  std::size_t max_iters = 10000;
  double stop_tol = 1e-12;
  std::size_t record_every = 1;
  double phgf_dt = 1e-3;
  std::vector<std::uint64_t> seeds{0};
  std::string test_point = "anchor";  // "anchor" or "z_star"

  // Throws ValidationError.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// Throws ParseError (with line context) or ValidationError.
ExperimentConfig parse_config(std::string_view text);
std::string serialize_config(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

// Everything one (algorithm, seed) run needs, derived deterministically.
struct RunSetup {
  HiddenGame game;
  ProductRepMap maps;
  Profile x0;
  Profile z_hat;
  RunConfig run;
};

RunSetup make_setup(const ExperimentConfig& cfg, Algorithm algorithm, std::uint64_t seed,
                    const std::filesystem::path& base_dir = {});

enum class FitModel { Geometric, Harmonic, SqrtLog };
std::string_view to_string(FitModel m);

struct RateFit {
  FitModel model = FitModel::Geometric;
  double slope = 0.0;
  double level = 0.0;
  double r_squared = 0.0;
  std::size_t rows_used = 0;
};

// log err = level + slope * n over n >= burn_in_frac * n_max, stopping before
// the first err <= stop_floor; rows with err <= 1e-14 are skipped.
RateFit fit_geometric(std::span<const std::size_t> n, std::span<const double> err,
                      double burn_in_frac = 0.1, double stop_floor = 1e-12);
// log(n err) = level + slope * log n over the last half of the run.
RateFit fit_harmonic(std::span<const std::size_t> n, std::span<const double> err);
// log(gap sqrt(n) / log n) = level + slope * log n over n >= 3.
RateFit fit_sqrtlog(std::span<const std::size_t> n, std::span<const double> gap);

// Linear-interpolated percentile, q in [0, 100]; +inf sorts last.
double percentile(std::vector<double> v, double q);

struct CommandOptions {
  std::filesystem::path out_dir = "out";
  std::optional<std::vector<std::uint64_t>> seeds;
  bool quiet = false;
  bool timing = false;
  std::filesystem::path config_dir;  // resolves relative map_weights paths
};

std::string csv_real(double v);
void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec);
std::string trajectory_file_name(const ExperimentConfig& cfg, Algorithm a, std::uint64_t seed);

// Each returns the process exit code.
int cmd_run(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_bench(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_plot_data(std::span<const std::filesystem::path> inputs,
                  const std::filesystem::path& out, std::ostream& log);

struct TrajectoryCsv {
  std::string source;
  std::string algorithm;
  std::int64_t seed = -1;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

// Throws IoError or ParseError.
TrajectoryCsv read_trajectory_csv(const std::filesystem::path& path);

// Runs tasks 0..count-1 on up to `threads` workers.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  std::size_t threads = 0);

}  // namespace hgd
