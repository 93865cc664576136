#include "hgd/dynamics.hpp"

#include <cmath>
#include <string>

#include "hgd/error.hpp"

namespace hgd {
namespace {

Profile add_scaled(const Profile& a, double s, const Profile& b) {
  Profile out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = axpy(s, b[i], a[i]);
  return out;
}

Profile sample_gradient(const Profile& v, const NoiseModel& noise, Rng& rng) {
  if (noise.sigma == 0.0) return v;
  std::normal_distribution<double> gauss(0.0, noise.sigma);
  Profile q = v;
  for (Vector& qi : q)
    for (double& e : qi) e += gauss(rng);
  return q;
}

enum class Precond { Pinv, Identity, Inverse1d };

StepTrace preconditioned_step(Precond kind, IterState& s, const HiddenGame& game,
                              const ProductRepMap& maps, const StepSchedule& schedule,
                              const NoiseModel& noise) {
  if (kind == Precond::Inverse1d) {
    for (std::size_t i = 0; i < maps.n_players(); ++i) {
      if (maps.player(i).input_dim() != 1 || maps.player(i).output_dim() != 1) {
        throw NotSeparable("nhgd_step: every player must be one-dimensional");
      }
    }
  }
  StepTrace t;
  t.n = s.n;
  t.gamma = schedule.at(s.n);
  t.z = s.z;
  t.g = game.field(s.z);
  const std::vector<DenseMatrix> jac = maps.jacobians(s.x);

  Profile v(s.x.size());
  for (std::size_t i = 0; i < s.x.size(); ++i) v[i] = matvec(transpose(jac[i]), t.g[i]);
  t.q = sample_gradient(v, noise, s.rng);

  Profile x_next(s.x.size());
  t.latent_dir.resize(s.x.size());
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    Vector dir;
    switch (kind) {
      case Precond::Pinv:
        dir = matvec(precondition(jac[i]), t.q[i]);
        break;
      case Precond::Identity:
        dir = t.q[i];
        break;
      case Precond::Inverse1d: {
        const double d = jac[i](0, 0);
        if (std::abs(d) < 1e-12) {
          throw DerivativeVanished("nhgd_step: |phi'| below 1e-12 for player " +
                                   std::to_string(i));
        }
        dir = {t.q[i][0] / (d * d)};
        break;
      }
    }
    t.latent_dir[i] = matvec(jac[i], dir);
    x_next[i] = axpy(-t.gamma, dir, s.x[i]);
  }
  if (!all_finite(x_next)) throw NonFiniteIterate("step produced a non-finite control");
  Profile z_next = maps.eval(x_next);
  if (!all_finite(z_next)) throw NonFiniteIterate("step produced a non-finite latent");

  s.x = std::move(x_next);
  s.z = std::move(z_next);
  ++s.n;
  t.z_next = s.z;
  return t;
}

}  // namespace

std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Constant: return "constant";
    case ScheduleKind::InvSqrt: return "inv_sqrt";
    case ScheduleKind::Harmonic: return "harmonic";
  }
  return "?";
}

ScheduleKind schedule_kind_from_string(std::string_view s) {
  for (ScheduleKind k :
       {ScheduleKind::Constant, ScheduleKind::InvSqrt, ScheduleKind::Harmonic}) {
    if (to_string(k) == s) return k;
  }
  throw ParseError("unknown schedule kind '" + std::string(s) + "'");
}

double StepSchedule::at(std::size_t n) const {
  if (n == 0) throw ValidationError("StepSchedule::at: iterations start at n = 1");
  switch (kind) {
    case ScheduleKind::Constant: return gamma;
    case ScheduleKind::InvSqrt: return gamma / std::sqrt(static_cast<double>(n));
    case ScheduleKind::Harmonic: return gamma / static_cast<double>(n);
  }
  return gamma;
}

void StepSchedule::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw ValidationError("step size must be positive and finite");
  }
}

void NoiseModel::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw ValidationError("noise sigma must be >= 0 and finite");
  }
}

bool all_finite(const Profile& p) {
  for (const Vector& v : p)
    for (double e : v)
      if (!std::isfinite(e)) return false;
  return true;
}

IterState make_state(const ProductRepMap& maps, Profile x0, std::uint64_t noise_seed) {
  IterState s;
  s.z = maps.eval(x0);
  s.x = std::move(x0);
  s.rng = make_rng(noise_seed, {0x6e6f697365});
  return s;
}

Profile control_field(const HiddenGame& game, const ProductRepMap& maps,
                      const Profile& x) {
  const Profile g = game.field(maps.eval(x));
  const std::vector<DenseMatrix> jac = maps.jacobians(x);
  Profile v(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) v[i] = matvec(transpose(jac[i]), g[i]);
  return v;
}

DenseMatrix precondition(const DenseMatrix& j) {
  // pinv(J^T J) = V diag(1 / sigma^2) V^T from the SVD of J, with the cutoff pinv
  // would apply to the n x n matrix J^T J.
  const SvdFactors f = svd(j);
  const std::size_t n = j.cols();
  Vector sq(f.sigma.size());
  for (std::size_t k = 0; k < sq.size(); ++k) sq[k] = f.sigma[k] * f.sigma[k];
  const double cut = rank_cutoff(sq, n, n, kDefaultRankTol);
  DenseMatrix out(n, n);
  for (std::size_t k = 0; k < sq.size(); ++k) {
    if (!(sq[k] > cut)) continue;
    const double inv = 1.0 / sq[k];
    for (std::size_t a = 0; a < n; ++a) {
      const double va = f.v(a, k) * inv;
      for (std::size_t b = 0; b < n; ++b) out(a, b) += va * f.v(b, k);
    }
  }
  return out;
}

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::PHGD: return "PHGD";
    case Algorithm::GD: return "GD";
    case Algorithm::NHGD: return "NHGD";
    case Algorithm::PHGF: return "PHGF";
  }
  return "?";
}

Algorithm algorithm_from_string(std::string_view s) {
  for (Algorithm a : {Algorithm::PHGD, Algorithm::GD, Algorithm::NHGD, Algorithm::PHGF}) {
    if (to_string(a) == s) return a;
  }
  throw ParseError("unknown algorithm '" + std::string(s) + "'");
}

StepTrace phgd_step(IterState& s, const HiddenGame& game, const ProductRepMap& maps,
                    const StepSchedule& schedule, const NoiseModel& noise) {
  return preconditioned_step(Precond::Pinv, s, game, maps, schedule, noise);
}

StepTrace gd_step(IterState& s, const HiddenGame& game, const ProductRepMap& maps,
                  const StepSchedule& schedule, const NoiseModel& noise) {
  return preconditioned_step(Precond::Identity, s, game, maps, schedule, noise);
}

StepTrace nhgd_step(IterState& s, const HiddenGame& game, const ProductRepMap& maps,
                    const StepSchedule& schedule, const NoiseModel& noise) {
  return preconditioned_step(Precond::Inverse1d, s, game, maps, schedule, noise);
}

StepTrace step(Algorithm a, IterState& s, const HiddenGame& game,
               const ProductRepMap& maps, const StepSchedule& schedule,
               const NoiseModel& noise) {
  switch (a) {
    case Algorithm::PHGD: return phgd_step(s, game, maps, schedule, noise);
    case Algorithm::GD: return gd_step(s, game, maps, schedule, noise);
    case Algorithm::NHGD: return nhgd_step(s, game, maps, schedule, noise);
    case Algorithm::PHGF: break;
  }
  throw ValidationError("step: PHGF is a flow; use rk4_step");
}

Profile phgf_velocity(const HiddenGame& game, const ProductRepMap& maps,
                      const Profile& x) {
  const Profile g = game.field(maps.eval(x));
  const std::vector<DenseMatrix> jac = maps.jacobians(x);
  Profile v(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Vector vi = matvec(transpose(jac[i]), g[i]);
    v[i] = matvec(precondition(jac[i]), vi);
    for (double& e : v[i]) e = -e;
  }
  return v;
}

Profile rk4_step(const HiddenGame& game, const ProductRepMap& maps, const Profile& x,
                 double dt) {
  const Profile k1 = phgf_velocity(game, maps, x);
  const Profile k2 = phgf_velocity(game, maps, add_scaled(x, 0.5 * dt, k1));
  const Profile k3 = phgf_velocity(game, maps, add_scaled(x, 0.5 * dt, k2));
  const Profile k4 = phgf_velocity(game, maps, add_scaled(x, dt, k3));
  Profile out = x;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t c = 0; c < x[i].size(); ++c)
      out[i][c] += dt / 6.0 * (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]);
  if (!all_finite(out)) throw NonFiniteIterate("rk4_step produced a non-finite control");
  return out;
}

std::vector<FlowSample> phgf_integrate(const Profile& x0, const HiddenGame& game,
                                       const ProductRepMap& maps, double dt,
                                       double t_end, const Profile& z_hat,
                                       std::size_t record_every) {
  if (!(dt > 0.0) || !(t_end >= dt)) {
    throw ValidationError("phgf_integrate: need dt > 0 and t_end >= dt");
  }
  if (record_every == 0) throw ValidationError("phgf_integrate: record_every must be >= 1");
  auto energy_at = [&](const Profile& x) {
    const Profile z = maps.eval(x);
    double e = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
      for (std::size_t c = 0; c < z[i].size(); ++c) {
        const double d = z[i][c] - z_hat[i][c];
        e += d * d;
      }
    return 0.5 * e;
  };
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  std::vector<FlowSample> out;
  out.push_back({0.0, energy_at(x0), x0});
  Profile x = x0;
  for (std::size_t k = 1; k <= steps; ++k) {
    x = rk4_step(game, maps, x, dt);
    if (k % record_every == 0 || k == steps) {
      out.push_back({static_cast<double>(k) * dt, energy_at(x), x});
    }
  }
  return out;
}

}  // namespace hgd
