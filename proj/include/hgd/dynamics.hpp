#pragma once

// Learning dynamics on the control variables: preconditioned hidden gradient
// descent (PHGD), its continuous-time flow (PHGF), and the GD / NHGD
// baselines.

#include <cstdint>
#include <string_view>
#include <vector>

#include "hgd/games.hpp"
#include "hgd/numkit.hpp"
#include "hgd/repmaps.hpp"
#include "hgd/rng.hpp"

namespace hgd {

enum class ScheduleKind { Constant, InvSqrt, Harmonic };

std::string_view to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(std::string_view s);

struct StepSchedule {
  ScheduleKind kind = ScheduleKind::Constant;
  double gamma = 0.01;

  static StepSchedule constant(double g) { return {ScheduleKind::Constant, g}; }
  static StepSchedule inv_sqrt(double g0) { return {ScheduleKind::InvSqrt, g0}; }
  static StepSchedule harmonic(double g) { return {ScheduleKind::Harmonic, g}; }

  // Step size of iteration n >= 1.
  double at(std::size_t n) const;
  void validate() const;
  bool operator==(const StepSchedule&) const = default;
};

// Zero-mean Gaussian noise added to every control-gradient coordinate.
// sigma = 0 means exact gradients.
struct NoiseModel {
  double sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const NoiseModel&) const = default;
};

struct IterState {
  std::size_t n = 1;  // index of the next step
  Profile x;
  Profile z;  // maps.eval(x)
  Rng rng;
};

IterState make_state(const ProductRepMap& maps, Profile x0, std::uint64_t noise_seed);

// V_i(x) = J_i(x_i)^T g_i(phi(x)).
Profile control_field(const HiddenGame& game, const ProductRepMap& maps,
                      const Profile& x);

// P = pinv(J^T J).
DenseMatrix precondition(const DenseMatrix& j);

enum class Algorithm { PHGD, GD, NHGD, PHGF };

std::string_view to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view s);

// What one discrete step saw; template_check consumes these.
struct StepTrace {
  std::size_t n = 0;
  double gamma = 0.0;
  Profile z;           // z_n
  Profile z_next;      // z_{n+1}
  Profile g;           // g(z_n)
  Profile q;           // sampled control gradient
  Profile latent_dir;  // J_i P_i q_i per player
};

StepTrace phgd_step(IterState& s, const HiddenGame& game, const ProductRepMap& maps,
                    const StepSchedule& schedule, const NoiseModel& noise);
StepTrace gd_step(IterState& s, const HiddenGame& game, const ProductRepMap& maps,
                  const StepSchedule& schedule, const NoiseModel& noise);
// Requires one-dimensional controls and latents per player.
StepTrace nhgd_step(IterState& s, const HiddenGame& game, const ProductRepMap& maps,
                    const StepSchedule& schedule, const NoiseModel& noise);

StepTrace step(Algorithm a, IterState& s, const HiddenGame& game,
               const ProductRepMap& maps, const StepSchedule& schedule,
               const NoiseModel& noise);

// dx/dt = -P(x) V(x)
Profile phgf_velocity(const HiddenGame& game, const ProductRepMap& maps,
                      const Profile& x);
// One classical RK4 step of the flow.
Profile rk4_step(const HiddenGame& game, const ProductRepMap& maps, const Profile& x,
                 double dt);

struct FlowSample {
  double t = 0.0;
  double energy = 0.0;  // 1/2 |phi(x) - z_hat|^2
  Profile x;
};

// Samples at t = 0 and after every record_every steps, plus the final time.
std::vector<FlowSample> phgf_integrate(const Profile& x0, const HiddenGame& game,
                                       const ProductRepMap& maps, double dt,
                                       double t_end, const Profile& z_hat,
                                       std::size_t record_every = 1);

bool all_finite(const Profile& p);

}  // namespace hgd
