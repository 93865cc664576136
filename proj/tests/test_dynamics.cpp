#include <cmath>
#include <random>

#include "doctest.h"
#include "hgd/dynamics.hpp"
#include "hgd/error.hpp"
#include "hgd/merit.hpp"
#include "hgd/runner.hpp"

using namespace hgd;

namespace {

MlpRepMap identity_map(std::size_t d) {
  return MlpRepMap(DenseMatrix::identity(d), DenseMatrix::identity(d), Activation::Identity,
                   Activation::Identity);
}

ProductRepMap identity_maps(std::size_t players, std::size_t d) {
  return ProductRepMap(std::vector<MlpRepMap>(players, identity_map(d)));
}

double profile_dist(const Profile& a, const Profile& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t c = 0; c < a[i].size(); ++c) m = std::max(m, std::abs(a[i][c] - b[i][c]));
  return m;
}

double loss_of_controls(const HiddenGame& g, const ProductRepMap& maps, std::size_t i,
                        const Profile& x) {
  return g.loss(i, maps.eval(x));
}

}  // namespace

TEST_CASE("step schedules") {
  CHECK(StepSchedule::constant(0.01).at(1) == 0.01);
  CHECK(StepSchedule::constant(0.01).at(500) == 0.01);
  CHECK(StepSchedule::harmonic(2.0).at(4) == 0.5);
  CHECK(StepSchedule::inv_sqrt(0.05).at(100) == doctest::Approx(0.005));
  CHECK_THROWS_AS(StepSchedule::constant(-1.0).validate(), ValidationError);
  CHECK_THROWS_AS(StepSchedule::constant(0.0).validate(), ValidationError);
  CHECK_THROWS_AS((NoiseModel{-0.1, 0}).validate(), ValidationError);
  CHECK(schedule_kind_from_string(to_string(ScheduleKind::InvSqrt)) == ScheduleKind::InvSqrt);
}

TEST_CASE("control field under identity maps is the latent field") {
  const HiddenGame g(GameParams::defaults(GameKind::MatchingPennies));
  const Profile x{{0.3}, {0.9}};
  CHECK(control_field(g, identity_maps(2, 1), x) == g.field(x));
}

TEST_CASE("control field vanishes at the zero control profile of MP") {
  const HiddenGame g(GameParams::defaults(GameKind::MatchingPennies));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ProductRepMap maps = sample_product_map(arch_for(MapKind::MP), 2, seed);
    const Profile v = control_field(g, maps, {{0.0}, {0.0}});
    CHECK(std::hypot(v[0][0], v[1][0]) <= 1e-9);
  }
}

TEST_CASE("control field matches finite differences of the composed losses") {
  for (GameKind k : {GameKind::MatchingPennies, GameKind::RPS, GameKind::ElFarol}) {
    CAPTURE(to_string(k));
    GameParams p = GameParams::defaults(k);
    if (k == GameKind::ElFarol) {
      p.players = 5;
      p.capacity = 3;
    }
    const HiddenGame g(p);
    const ProductRepMap maps = sample_product_map(arch_for(default_map_kind(k)), g.n_players(), 4);
    const Profile x = sample_init(maps, 1.5, 7);
    const Profile v = control_field(g, maps, x);
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t c = 0; c < x[i].size(); ++c) {
        const double h = 1e-5;
        Profile up = x, dn = x;
        up[i][c] += h;
        dn[i][c] -= h;
        const double fd = (loss_of_controls(g, maps, i, up) - loss_of_controls(g, maps, i, dn)) / (2 * h);
        CHECK(std::abs(fd - v[i][c]) <= 1e-6);
      }
  }
}

TEST_CASE("preconditioner examples") {
  CHECK(max_abs(sub(precondition(DenseMatrix::identity(3)), DenseMatrix::identity(3))) <= 1e-15);
  const DenseMatrix j = DenseMatrix::from_rows({{2.0, 0.0}});
  const DenseMatrix p = precondition(j);
  CHECK(p(0, 0) == doctest::Approx(0.25));
  CHECK(p(1, 1) == 0.0);
  CHECK(matmul(matmul(j, p), transpose(j))(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("preconditioner equals the pseudoinverse of the Gram matrix") {
  Rng rng = make_rng(43);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t rows = 1; rows <= 5; ++rows)
    for (std::size_t cols = 1; cols <= 5; ++cols)
      for (int t = 0; t < 10; ++t) {
        DenseMatrix j(rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) j(r, c) = u(rng);
        if (t % 2 && rows > 1)
          for (std::size_t c = 0; c < cols; ++c) j(rows - 1, c) = 2.0 * j(0, c);
        const DenseMatrix gram_pinv = pinv(matmul(transpose(j), j));
        CHECK(max_abs(sub(precondition(j), gram_pinv)) <= 1e-8 * (1.0 + max_abs(gram_pinv)));
      }
}

TEST_CASE("right-inverse and projector identities") {
  Rng rng = make_rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    DenseMatrix j(3, 5);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 5; ++c) j(r, c) = u(rng);
    const bool deficient = t % 2;
    if (deficient)
      for (std::size_t c = 0; c < 5; ++c) j(2, c) = j(0, c) - j(1, c);
    const DenseMatrix proj = matmul(matmul(j, precondition(j)), transpose(j));
    if (!deficient) {
      CHECK(max_abs(sub(proj, DenseMatrix::identity(3))) <= 1e-9);
    } else {
      CHECK(max_abs(sub(matmul(proj, proj), proj)) <= 1e-9);
      CHECK(max_abs(sub(proj, transpose(proj))) <= 1e-9);
      const Vector in_range = matvec(j, Vector{0.1, -0.4, 0.3, 0.7, 0.2});
      const Vector fixed = matvec(proj, in_range);
      for (std::size_t r = 0; r < 3; ++r) CHECK(std::abs(fixed[r] - in_range[r]) <= 1e-9);
    }
  }
}

TEST_CASE("PHGD under identity maps is a latent gradient step") {
  const HiddenGame g(GameParams::defaults(GameKind::MatchingPennies));
  const ProductRepMap maps = identity_maps(2, 1);
  const Profile x0{{0.2}, {0.7}};
  IterState a = make_state(maps, x0, 0);
  IterState b = make_state(maps, x0, 0);
  const StepSchedule s = StepSchedule::constant(0.01);
  phgd_step(a, g, maps, s, {});
  gd_step(b, g, maps, s, {});
  const Profile field = g.field(x0);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.x[i][0] == doctest::Approx(x0[i][0] - 0.01 * field[i][0]).epsilon(1e-15));
    CHECK(a.x[i][0] == b.x[i][0]);
  }
  CHECK(a.n == 2);
}

TEST_CASE("equilibria are fixed points") {
  const HiddenGame g(GameParams::defaults(GameKind::MatchingPennies));
  const ProductRepMap maps = sample_product_map(arch_for(MapKind::MP), 2, 3);
  for (Algorithm alg : {Algorithm::PHGD, Algorithm::GD, Algorithm::NHGD}) {
    IterState s = make_state(maps, {{0.0}, {0.0}}, 0);
    step(alg, s, g, maps, StepSchedule::constant(0.01), {});
    CHECK(s.x == Profile{{0.0}, {0.0}});
    CHECK(s.n == 2);
  }
}

TEST_CASE("NHGD coincides with PHGD on scalar maps") {
  const HiddenGame g(GameParams::defaults(GameKind::MatchingPennies));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ProductRepMap maps = sample_product_map(arch_for(MapKind::MP), 2, seed);
    const Profile x0 = sample_init(maps, 1.0, seed);
    IterState a = make_state(maps, x0, 1), b = make_state(maps, x0, 1);
    for (int k = 0; k < 20; ++k) {
      phgd_step(a, g, maps, StepSchedule::constant(0.01), {});
      nhgd_step(b, g, maps, StepSchedule::constant(0.01), {});
    }
    CHECK(profile_dist(a.x, b.x) <= 1e-12);
  }
  const ProductRepMap unit = identity_maps(2, 1);
  IterState n1 = make_state(unit, {{0.4}, {0.1}}, 0), n2 = make_state(unit, {{0.4}, {0.1}}, 0);
  nhgd_step(n1, g, unit, StepSchedule::constant(0.05), {});
  gd_step(n2, g, unit, StepSchedule::constant(0.05), {});
  CHECK(n1.x == n2.x);
}

TEST_CASE("NHGD rejects multi-dimensional players") {
  const HiddenGame g(GameParams::defaults(GameKind::RPS));
  const ProductRepMap maps = sample_product_map(arch_for(MapKind::RPS), 2, 1);
  IterState s = make_state(maps, sample_init(maps, 1.0, 1), 0);
  CHECK_THROWS_AS(nhgd_step(s, g, maps, StepSchedule::constant(0.01), {}), NotSeparable);
}

TEST_CASE("noisy steps are reproducible and depend on the seed") {
  const HiddenGame g(GameParams::defaults(GameKind::RPS));
  const ProductRepMap maps = sample_product_map(arch_for(MapKind::RPS), 2, 2);
  const Profile x0 = sample_init(maps, 0.5, 2);
  auto advance = [&](std::uint64_t seed) {
    IterState s = make_state(maps, x0, seed);
    for (int k = 0; k < 10; ++k) phgd_step(s, g, maps, StepSchedule::constant(0.01), {0.1, seed});
    return s.x;
  };
  CHECK(advance(5) == advance(5));
  CHECK_FALSE(advance(5) == advance(6));
}

TEST_CASE("diverging steps raise NonFiniteIterate") {
  const HiddenGame g(GameParams::defaults(GameKind::MatchingPennies));
  const ProductRepMap maps = identity_maps(2, 1);
  IterState s = make_state(maps, {{0.2}, {0.9}}, 0);
  CHECK_THROWS_AS(phgd_step(s, g, maps, StepSchedule::constant(1e308), {}), NonFiniteIterate);
}

TEST_CASE("PHGD decreases the MP error monotonically, GD does not") {
  const HiddenGame g(GameParams::defaults(GameKind::MatchingPennies));
  int phgd_monotone = 0, gd_nonmonotone = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ProductRepMap maps = sample_product_map(arch_for(MapKind::MP), 2, seed);
    // Far starts can send the latent spiral past the bounded image of the
    // CeLU-sigmoid map, where the controls run off; stay near the origin.
    const Profile x0 = sample_init(maps, 0.5, seed);
    RunConfig cfg;
    cfg.max_iters = 100;
    cfg.stop_tol = 0.0;
    const TrajectoryRecord p = run(cfg, g, maps, x0, g.z_star());
    bool mono = true;
    for (std::size_t k = 1; k < p.rows.size(); ++k) mono = mono && p.rows[k].err <= p.rows[k - 1].err;
    phgd_monotone += mono;

    cfg.algorithm = Algorithm::GD;
    cfg.max_iters = 10000;
    const TrajectoryRecord d = run(cfg, g, maps, x0, g.z_star());
    bool increase = false;
    for (std::size_t k = 1; k < d.rows.size(); ++k) increase = increase || d.rows[k].energy > d.rows[k - 1].energy;
    gd_nonmonotone += increase;
  }
  CHECK(phgd_monotone == 10);
  CHECK(gd_nonmonotone >= 1);
}

TEST_CASE("flow is constant at equilibrium and fourth-order accurate") {
  const HiddenGame g(GameParams::defaults(GameKind::MatchingPennies));
  const ProductRepMap maps = sample_product_map(arch_for(MapKind::MP), 2, 6);
  const auto still = phgf_integrate({{0.0}, {0.0}}, g, maps, 1e-2, 1.0, g.z_star(), 10);
  for (const FlowSample& s : still) CHECK(s.x == Profile{{0.0}, {0.0}});

  // CeLU's second derivative jumps at 0, so the order check uses a smooth map.
  const MlpRepMap smooth(DenseMatrix::from_rows({{0.8}}), DenseMatrix::from_rows({{0.9}}),
                         Activation::Identity, Activation::Sigmoid);
  const ProductRepMap smooth_maps({smooth, smooth});
  const Profile x0{{0.3}, {-0.2}};
  auto final_state = [&](double dt) {
    return phgf_integrate(x0, g, smooth_maps, dt, 1.0, g.z_star(), 1000000).back().x;
  };
  const Profile coarse = final_state(0.05), mid = final_state(0.025), fine = final_state(0.0125);
  const double ratio = profile_dist(coarse, mid) / profile_dist(mid, fine);
  CHECK(ratio == doctest::Approx(16.0).epsilon(0.1));
}

TEST_CASE("flow energy is nonincreasing") {
  const HiddenGame g(GameParams::defaults(GameKind::RPS));
  const ProductRepMap maps = sample_product_map(arch_for(MapKind::RPS), 2, 1);
  const auto samples = phgf_integrate(sample_init(maps, 0.5, 1), g, maps, 1e-2, 5.0, g.z_star(), 1);
  REQUIRE(samples.size() == 501);
  for (std::size_t k = 1; k < samples.size(); ++k) CHECK(samples[k].energy <= samples[k - 1].energy + 1e-10);
}

TEST_CASE("run records") {
  const HiddenGame g(GameParams::defaults(GameKind::MatchingPennies));
  const ProductRepMap maps = sample_product_map(arch_for(MapKind::MP), 2, 0);
  const Profile x0 = sample_init(maps, 2.5, 0);
  RunConfig cfg;
  cfg.max_iters = 0;
  const TrajectoryRecord empty = run(cfg, g, maps, x0, g.z_star());
  REQUIRE(empty.rows.size() == 1);
  CHECK(empty.rows[0].n == 0);
  CHECK(empty.status == RunStatus::MaxIters);

  cfg.max_iters = 500;
  cfg.record_every = 100;
  cfg.average_at = {10, 500};
  const TrajectoryRecord r = run(cfg, g, maps, x0, g.z_star());
  REQUIRE(r.rows.size() == 6);
  CHECK(r.rows.back().n == 500);
  CHECK(r.averages.size() == 2);
  const TrajectoryRecord again = run(cfg, g, maps, x0, g.z_star());
  CHECK(again.final_x == r.final_x);
  for (std::size_t k = 0; k < r.rows.size(); ++k) CHECK(again.rows[k].err == r.rows[k].err);
}

TEST_CASE("run stops on convergence and reports failures") {
  const HiddenGame g(GameParams::defaults(GameKind::MatchingPennies));
  const ProductRepMap maps = sample_product_map(arch_for(MapKind::MP), 2, 1);
  RunConfig cfg;
  cfg.stop_tol = 1e-6;
  cfg.record_every = 1000;
  const TrajectoryRecord r = run(cfg, g, maps, sample_init(maps, 1.0, 1), g.z_star());
  CHECK(r.status == RunStatus::Converged);
  CHECK(r.rows.back().err <= 1e-6);

  const HiddenGame rps(GameParams::defaults(GameKind::RPS));
  const ProductRepMap rmaps = sample_product_map(arch_for(MapKind::RPS), 2, 1);
  cfg.algorithm = Algorithm::NHGD;
  const TrajectoryRecord f = run(cfg, rps, rmaps, sample_init(rmaps, 1.0, 1), rps.z_star());
  CHECK(f.status == RunStatus::Failed);
  CHECK(f.message.find("one-dimensional") != std::string::npos);
}

TEST_CASE("PHGD beats GD on rock-paper-scissors") {
  const HiddenGame g(GameParams::defaults(GameKind::RPS));
  const ProductRepMap maps = sample_product_map(arch_for(MapKind::RPS), 2, 3);
  const Profile x0 = sample_init(maps, 0.5, 3);
  RunConfig cfg;
  cfg.record_every = 10000;
  const double phgd = run(cfg, g, maps, x0, g.z_star()).rows.back().err;
  cfg.algorithm = Algorithm::GD;
  const double gd = run(cfg, g, maps, x0, g.z_star()).rows.back().err;
  CHECK(phgd < gd);
}
