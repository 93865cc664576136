#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hgd/dynamics.hpp"
#include "hgd/games.hpp"
#include "hgd/repmaps.hpp"

namespace hgd {

enum class RunStatus { MaxIters, Converged, NonFinite, Failed };

std::string_view to_string(RunStatus s);

struct RunConfig {
  Algorithm algorithm = Algorithm::PHGD;
  StepSchedule schedule;
  NoiseModel noise;
  std::size_t max_iters = 10000;
  double stop_tol = 1e-12;
  std::size_t record_every = 1;
  double phgf_dt = 1e-3;
  bool record_steps = false;
  // Iterations at which the latent running average is snapshotted.
  std::vector<std::size_t> average_at;
  // Fill walltime_us; off by default so outputs stay byte-identical.
  bool timing = false;
};

struct TrajectoryRow {
  std::size_t n = 0;
  double gamma = 0.0;
  double err = 0.0;     // to the game's z_star
  double energy = 0.0;  // to the test point
  double tgap_latent = 0.0;
  double tgap_control = 0.0;
  double walltime_us = 0.0;
};

struct AverageSnapshot {
  std::size_t n = 0;
  Profile z_bar;  // (1/n) sum_{k=1..n} z_k
};

struct TrajectoryRecord {
  std::vector<TrajectoryRow> rows;  // strictly increasing n, starting at 0
  std::vector<StepTrace> steps;     // only with record_steps
  std::vector<AverageSnapshot> averages;
  RunStatus status = RunStatus::MaxIters;
  std::string message;
  Profile final_x;
};

// Iterates from x0 until max_iters or err <= stop_tol. A failing step ends the
// run and is reported through status/message instead of an exception.
TrajectoryRecord run(const RunConfig& cfg, const HiddenGame& game,
                     const ProductRepMap& maps, Profile x0, const Profile& z_hat);

// Uniform in [-range, range] per coordinate.
Profile sample_init(const ProductRepMap& maps, double range, std::uint64_t seed);

}  // namespace hgd
