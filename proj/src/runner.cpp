#include "hgd/runner.hpp"

#include <chrono>

#include "hgd/error.hpp"
#include "hgd/merit.hpp"

namespace hgd {

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::MaxIters: return "max_iters";
    case RunStatus::Converged: return "converged";
    case RunStatus::NonFinite: return "non_finite";
    case RunStatus::Failed: return "failed";
  }
  return "?";
}

Profile sample_init(const ProductRepMap& maps, double range, std::uint64_t seed) {
  Rng rng = make_rng(seed, {0x696e6974});
  std::uniform_real_distribution<double> u(-range, range);
  Profile x;
  for (std::size_t d : maps.input_dims()) {
    Vector xi(d);
    for (double& e : xi) e = u(rng);
    x.push_back(std::move(xi));
  }
  return x;
}

TrajectoryRecord run(const RunConfig& cfg, const HiddenGame& game,
                     const ProductRepMap& maps, Profile x0, const Profile& z_hat) {
  if (cfg.record_every == 0) throw ValidationError("run: record_every must be >= 1");
  cfg.schedule.validate();
  cfg.noise.validate();

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  TrajectoryRecord rec;
  IterState s = make_state(maps, std::move(x0), cfg.noise.seed);

  auto push_row = [&](std::size_t n, double gamma) {
    TrajectoryRow r;
    r.n = n;
    r.gamma = gamma;
    r.err = energy(s.z, game.z_star());
    r.energy = energy(s.z, z_hat);
    r.tgap_latent = tgap_latent(s.z, game);
    r.tgap_control = tgap_control(s.x, game, maps);
    if (cfg.timing) {
      r.walltime_us =
          std::chrono::duration<double, std::micro>(Clock::now() - start).count();
    }
    rec.rows.push_back(r);
    return r.err;
  };

  Profile z_sum;
  for (const Vector& zi : s.z) z_sum.emplace_back(zi.size(), 0.0);
  std::size_t next_avg = 0;

  double e = push_row(0, 0.0);
  if (e <= cfg.stop_tol) rec.status = RunStatus::Converged;
  for (std::size_t k = 1; k <= cfg.max_iters && rec.status != RunStatus::Converged; ++k) {
    double gamma = 0.0;
    try {
      if (cfg.algorithm == Algorithm::PHGF) {
        gamma = cfg.phgf_dt;
        s.x = rk4_step(game, maps, s.x, gamma);
        s.z = maps.eval(s.x);
        ++s.n;
      } else {
        StepTrace t = step(cfg.algorithm, s, game, maps, cfg.schedule, cfg.noise);
        gamma = t.gamma;
        if (cfg.record_steps) rec.steps.push_back(std::move(t));
      }
    } catch (const NonFiniteIterate& ex) {
      rec.status = RunStatus::NonFinite;
      rec.message = ex.what();
    } catch (const Error& ex) {
      rec.status = RunStatus::Failed;
      rec.message = ex.what();
    }
    if (rec.status == RunStatus::NonFinite || rec.status == RunStatus::Failed) break;

    for (std::size_t i = 0; i < s.z.size(); ++i)
      for (std::size_t c = 0; c < s.z[i].size(); ++c) z_sum[i][c] += s.z[i][c];
    while (next_avg < cfg.average_at.size() && cfg.average_at[next_avg] < k) ++next_avg;
    if (next_avg < cfg.average_at.size() && cfg.average_at[next_avg] == k) {
      AverageSnapshot snap{k, z_sum};
      for (Vector& v : snap.z_bar)
        for (double& c : v) c /= static_cast<double>(k);
      rec.averages.push_back(std::move(snap));
      ++next_avg;
    }

    const bool last = k == cfg.max_iters;
    const double cur = energy(s.z, game.z_star());
    const bool done = cur <= cfg.stop_tol;
    if (done) rec.status = RunStatus::Converged;
    if (k % cfg.record_every == 0 || last || done) push_row(k, gamma);
  }
  rec.final_x = s.x;
  return rec;
}

}  // namespace hgd
