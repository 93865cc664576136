#include "hgd/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>

#include "hgd/bench.hpp"
#include "hgd/dynamics.hpp"
#include "hgd/error.hpp"
#include "hgd/games.hpp"
#include "hgd/merit.hpp"
#include "hgd/numkit.hpp"
#include "hgd/repmaps.hpp"
#include "hgd/runner.hpp"

namespace hgd {
namespace {

using PinvFn = std::function<DenseMatrix(const DenseMatrix&)>;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Ctx {
  VerifyLevel level;
  PinvFn pinv_impl;
  bool full() const { return level == VerifyLevel::Full; }
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

DenseMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

double max_diff(const DenseMatrix& a, const DenseMatrix& b) { return max_abs(sub(a, b)); }

const std::vector<GameKind>& suite_games() {
  static const std::vector<GameKind> g{GameKind::MatchingPennies, GameKind::RPS,
                                       GameKind::Shapley, GameKind::ElFarol, GameKind::KLdemo};
  return g;
}

const std::vector<MapKind>& suite_maps() {
  static const std::vector<MapKind> m{MapKind::MP, MapKind::RPS, MapKind::Shapley,
                                      MapKind::ElFarol, MapKind::KLdemo};
  return m;
}

// Eigenvalues of a symmetric 2x2 or 3x3 matrix from its characteristic
// polynomial, ascending.
std::vector<double> charpoly_eigs(const DenseMatrix& s) {
  if (s.rows() == 2) {
    const double a = s(0, 0), b = s(0, 1), c = s(1, 1);
    const double mid = 0.5 * (a + c), rad = std::hypot(0.5 * (a - c), b);
    return {mid - rad, mid + rad};
  }
  // Trigonometric solution of the depressed cubic.
  const double p1 = s(0, 1) * s(0, 1) + s(0, 2) * s(0, 2) + s(1, 2) * s(1, 2);
  const double q = (s(0, 0) + s(1, 1) + s(2, 2)) / 3.0;
  const double p2 = (s(0, 0) - q) * (s(0, 0) - q) + (s(1, 1) - q) * (s(1, 1) - q) +
                    (s(2, 2) - q) * (s(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  if (p == 0.0) return {q, q, q};
  DenseMatrix b = scale(sub(s, scale(DenseMatrix::identity(3), q)), 1.0 / p);
  const double det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                     b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                     b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
  const double phi = std::acos(std::clamp(det / 2.0, -1.0, 1.0)) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  std::vector<double> e{e3, 3.0 * q - e1 - e3, e1};
  std::sort(e.begin(), e.end());
  return e;
}

// ---- numkit -------------------------------------------------------------

Outcome svd_reconstruction(const Ctx&) {
  Rng rng = make_rng(11);
  double worst = 0.0;
  for (std::size_t r = 1; r <= 6; ++r)
    for (std::size_t c = 1; c <= 6; ++c)
      for (int k = 0; k < 10; ++k) {
        const DenseMatrix m = random_matrix(rng, r, c);
        const SvdFactors f = svd(m);
        const DenseMatrix rec =
            matmul(matmul(f.u, DenseMatrix::diagonal(f.sigma)), transpose(f.v));
        const std::size_t q = f.sigma.size();
        const double orth = std::max(
            max_diff(matmul(transpose(f.u), f.u), DenseMatrix::identity(q)),
            max_diff(matmul(transpose(f.v), f.v), DenseMatrix::identity(q)));
        worst = std::max({worst, max_diff(rec, m) / (1.0 + f.sigma.front()), orth});
        for (std::size_t i = 0; i + 1 < q; ++i)
          if (f.sigma[i] < f.sigma[i + 1] || f.sigma[i + 1] < 0.0) worst = 1.0;
      }
  return {worst <= 1e-10, fmt("worst scaled residual %.2e", worst)};
}

Outcome penrose(const Ctx& ctx) {
  Rng rng = make_rng(12);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const auto r = static_cast<std::size_t>(1 + k % 6);
    const auto c = static_cast<std::size_t>(1 + (k / 6) % 6);
    DenseMatrix m = random_matrix(rng, r, c);
    if (k % 5 == 0 && r > 1) {  // rank-deficient: duplicate a row
      for (std::size_t j = 0; j < c; ++j) m(r - 1, j) = m(0, j);
    }
    const DenseMatrix p = ctx.pinv_impl(m);
    const DenseMatrix mp = matmul(m, p), pm = matmul(p, m);
    worst = std::max({worst, max_diff(matmul(mp, m), m), max_diff(matmul(pm, p), p),
                      max_diff(transpose(mp), mp), max_diff(transpose(pm), pm)});
  }
  return {worst <= 1e-9, fmt("worst Penrose residual %.2e", worst)};
}

Outcome pinv_involution(const Ctx& ctx) {
  Rng rng = make_rng(13);
  double worst = 0.0;
  for (std::size_t r = 1; r <= 6; ++r)
    for (std::size_t c = 1; c <= 6; ++c) {
      const DenseMatrix m = random_matrix(rng, r, c);
      worst = std::max(worst, max_diff(ctx.pinv_impl(ctx.pinv_impl(m)), m));
    }
  return {worst <= 1e-8, fmt("max |pinv(pinv(M)) - M| = %.2e", worst)};
}

Outcome svd_vs_charpoly(const Ctx&) {
  Rng rng = make_rng(14);
  double worst = 0.0;
  const std::vector<std::pair<std::size_t, std::size_t>> shapes{{2, 2}, {3, 3}, {4, 3},
                                                                {5, 2}, {2, 3}, {1, 2}};
  for (auto [r, c] : shapes)
    for (int k = 0; k < 50; ++k) {
      const DenseMatrix m = random_matrix(rng, r, c);
      std::vector<double> eig = charpoly_eigs(matmul(transpose(m), m));
      std::sort(eig.rbegin(), eig.rend());
      const SvdFactors f = svd(m);
      for (std::size_t i = 0; i < f.sigma.size(); ++i)
        worst = std::max(worst, std::abs(f.sigma[i] - std::sqrt(std::max(eig[i], 0.0))));
    }
  return {worst <= 1e-8, fmt("max singular value deviation %.2e", worst)};
}

// ---- repmaps ------------------------------------------------------------

Outcome jacobian_fd_match(const Ctx& ctx) {
  const int points = ctx.full() ? 100 : 30;
  double worst = 0.0;
  for (MapKind kind : suite_maps()) {
    const ArchSpec arch = arch_for(kind);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const MlpRepMap m = sample_map(arch, seed);
      Rng rng = make_rng(15, {seed});
      std::uniform_real_distribution<double> u(-2.5, 2.5);
      for (int p = 0; p < points; ++p) {
        Vector x(arch.input_dim);
        for (double& e : x) e = u(rng);
        const DenseMatrix j = map_jacobian(m, x);
        worst = std::max(worst, max_diff(j, jacobian_fd(m, x, 1e-5)) / (1.0 + frobenius(j)));
      }
    }
  }
  return {worst <= 1e-6, fmt("worst scaled FD deviation %.2e", worst)};
}

Outcome head_codomains(const Ctx&) {
  Rng rng = make_rng(16);
  std::normal_distribution<double> n(0.0, 5.0);
  bool ok = true;
  double worst_sum = 0.0, worst_row = 0.0;
  for (int k = 0; k < 500; ++k) {
    Vector t(3);
    for (double& e : t) e = n(rng);
    const Vector p = activate(Activation::Softmax, t);
    double s = 0.0;
    for (double e : p) {
      s += e;
      ok = ok && e > 0.0;
    }
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    const DenseMatrix d = activation_derivative(Activation::Softmax, t);
    for (std::size_t i = 0; i < 3; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 3; ++j) row += d(i, j);
      worst_row = std::max(worst_row, std::abs(row));
    }
    const double sg = sigmoid(t[0] / 5.0);
    ok = ok && sg > 0.0 && sg < 1.0;
  }
  ok = ok && worst_sum <= 1e-12 && worst_row <= 1e-12;
  std::ostringstream os;
  os << "softmax sum dev " << fmt("%.1e", worst_sum) << ", row sums " << fmt("%.1e", worst_row);
  return {ok, os.str()};
}

Outcome map_determinism(const Ctx&) {
  bool ok = true;
  for (MapKind kind : suite_maps()) {
    const MlpRepMap a = sample_map(arch_for(kind), 42), b = sample_map(arch_for(kind), 42);
    const Vector x(a.input_dim(), 0.3);
    ok = ok && a == b && map_eval(a, x) == map_eval(b, x) &&
         map_jacobian(a, x) == map_jacobian(b, x);
  }
  return {ok, "same seed gives identical maps and outputs"};
}

// ---- latent games -------------------------------------------------------

Outcome field_vanishes_at_star(const Ctx&) {
  double worst = 0.0;
  for (GameKind k : suite_games()) {
    const HiddenGame g(GameParams::defaults(k));
    worst = std::max(worst, tgap_latent(g.z_star(), g));
  }
  return {worst <= 1e-9, fmt("max tangent |g(z*)| = %.2e", worst)};
}

Outcome field_is_gradient(const Ctx& ctx) {
  const int points = ctx.full() ? 100 : 20;
  double worst = 0.0;
  for (GameKind k : suite_games()) {
    const HiddenGame g(GameParams::defaults(k));
    Rng rng = make_rng(17, {static_cast<std::uint64_t>(k)});
    for (int p = 0; p < points; ++p) {
      Profile z = sample_domain_point(g.domain(), rng);
      // Keep central differences inside the domain.
      for (Vector& zi : z)
        for (double& e : zi) e = 0.1 + 0.8 * e;
      if (g.domain().players[0].kind == DomainKind::Simplex) {
        for (Vector& zi : z) {
          double s = 0.0;
          for (double e : zi) s += e;
          for (double& e : zi) e /= s;
        }
      }
      const Profile field = g.field(z);
      for (std::size_t i = 0; i < z.size(); ++i) {
        const std::size_t d = z[i].size();
        for (std::size_t c = 0; c < d; ++c) {
          // Simplex players: differentiate along e_c - 1/d, compare with the
          // matching tangent component of g.
          const double h = 1e-6;
          Profile zp = z, zm = z;
          double expect = field[i][c];
          if (g.domain().players[i].kind == DomainKind::Simplex) {
            double mean = 0.0;
            for (double e : field[i]) mean += e / static_cast<double>(d);
            expect = field[i][c] - mean;
            for (std::size_t t = 0; t < d; ++t) {
              const double dir = (t == c ? 1.0 : 0.0) - 1.0 / static_cast<double>(d);
              zp[i][t] += h * dir;
              zm[i][t] -= h * dir;
            }
          } else {
            zp[i][c] += h;
            zm[i][c] -= h;
          }
          const double fd = (g.loss(i, zp) - g.loss(i, zm)) / (2.0 * h);
          worst = std::max(worst, std::abs(fd - expect));
        }
      }
    }
  }
  return {worst <= 1e-7, fmt("max |FD - g| = %.2e", worst)};
}

Outcome monotonicity(const Ctx&) {
  std::ostringstream os;
  bool ok = true;
  for (GameKind k : {GameKind::MatchingPennies, GameKind::RPS}) {
    const HiddenGame g(GameParams::defaults(k));
    const MonotonicityReport r = monotonicity_probe(g, 1000, 18);
    ok = ok && r.min_quotient >= g.mu() - 1e-6;
    os << to_string(k) << " " << fmt("%.4f", r.min_quotient) << "; ";
  }
  // The El Farol field is monotone but not mu-strongly so (see the README).
  const HiddenGame ef(GameParams::defaults(GameKind::ElFarol));
  const MonotonicityReport r = monotonicity_probe(ef, 1000, 18);
  ok = ok && r.min_quotient > 0.0;
  os << "ElFarol " << fmt("%.4f", r.min_quotient) << " (>0)";
  return {ok, os.str()};
}

Outcome tail_properties(const Ctx& ctx) {
  Rng rng = make_rng(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  bool monotone = true;
  const int vectors = ctx.full() ? 50 : 10;
  for (std::size_t n = 0; n <= 12; ++n)
    for (int v = 0; v < vectors; ++v) {
      Vector p(n);
      for (double& e : p) e = u(rng);
      std::vector<double> exact(n + 2, 0.0);
      for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        double pr = 1.0;
        int count = 0;
        for (std::size_t j = 0; j < n; ++j) {
          const bool on = (mask >> j) & 1u;
          pr *= on ? p[j] : 1.0 - p[j];
          count += on;
        }
        for (int c = 0; c <= count; ++c) exact[static_cast<std::size_t>(c)] += pr;
      }
      double prev = 2.0;
      for (std::size_t c = 0; c <= n + 1; ++c) {
        const double t = poisson_binomial_tail(p, c);
        worst = std::max(worst, std::abs(t - exact[c]));
        monotone = monotone && t <= prev + 1e-15;
        prev = t;
        if (n > 0) {
          Vector q = p;
          q[0] = std::min(1.0, q[0] + 0.1);
          monotone = monotone && poisson_binomial_tail(q, c) >= t - 1e-15;
        }
      }
    }
  return {worst <= 1e-12 && monotone, fmt("max |DP - enumeration| = %.2e", worst)};
}

// ---- dynamics -----------------------------------------------------------

Outcome right_inverse(const Ctx& ctx) {
  Rng rng = make_rng(20);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t rows = 1 + static_cast<std::size_t>(k % 3);
    const std::size_t cols = rows + 2;
    DenseMatrix j = random_matrix(rng, rows, cols);
    const bool deficient = k % 2 == 1 && rows > 1;
    if (deficient)
      for (std::size_t c = 0; c < cols; ++c) j(rows - 1, c) = j(0, c);
    const DenseMatrix p = ctx.pinv_impl(matmul(transpose(j), j));
    const DenseMatrix proj = matmul(matmul(j, p), transpose(j));
    if (!deficient) {
      worst = std::max(worst, max_diff(proj, DenseMatrix::identity(rows)));
    } else {
      worst = std::max({worst, max_diff(matmul(proj, proj), proj),
                        max_diff(transpose(proj), proj),
                        max_diff(matmul(proj, j), j)});
    }
  }
  return {worst <= 1e-9, fmt("max deviation %.2e", worst)};
}

Outcome covariant_preconditioning(const Ctx&) {
  double worst = 0.0;
  for (MapKind kind : suite_maps()) {
    const MlpRepMap m = sample_map(arch_for(kind), 3);
    Rng rng = make_rng(21, {static_cast<std::uint64_t>(kind)});
    std::uniform_real_distribution<double> u(-2.5, 2.5), w(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
      Vector x(m.input_dim());
      for (double& e : x) e = u(rng);
      Vector z_hat(m.output_dim());
      for (double& e : z_hat) e = w(rng);
      const Vector d = axpy(-1.0, z_hat, map_eval(m, x));
      const DenseMatrix j = map_jacobian(m, x);
      const Vector lhs = matvec(j, matvec(precondition(j), matvec(transpose(j), d)));
      const Vector rhs = matvec(matmul(j, pinv(j)), d);
      double dev = 0.0;
      for (std::size_t i = 0; i < lhs.size(); ++i) dev = std::max(dev, std::abs(lhs[i] - rhs[i]));
      worst = std::max(worst, dev / (1.0 + norm2(d)));
    }
  }
  return {worst <= 1e-8, fmt("max scaled deviation %.2e", worst)};
}

Outcome fixed_points(const Ctx&) {
  const HiddenGame g(GameParams::defaults(GameKind::MatchingPennies));
  const ProductRepMap maps = sample_product_map(arch_for(MapKind::MP), 2, 5);
  IterState s = make_state(maps, {{0.0}, {0.0}}, 0);
  const Profile x0 = s.x;
  for (int k = 0; k < 10; ++k) phgd_step(s, g, maps, StepSchedule::constant(0.01), {});
  return {s.x == x0, "PHGD leaves x* = 0 of the MP game in place"};
}

Outcome noise_unbiased(const Ctx&) {
  const HiddenGame g(GameParams::defaults(GameKind::RPS));
  const ProductRepMap maps = sample_product_map(arch_for(MapKind::RPS), 2, 6);
  const Profile x = sample_init(maps, 1.0, 6);
  const double sigma = 0.1;
  const std::size_t draws = 100000;
  const Profile v = control_field(g, maps, x);
  Profile sum = v;
  for (Vector& e : sum) std::fill(e.begin(), e.end(), 0.0);
  // Each draw is a fresh oracle call with its own stream.
  for (std::size_t k = 0; k < draws; ++k) {
    IterState s = make_state(maps, x, k);
    const StepTrace t = gd_step(s, g, maps, StepSchedule::constant(1e-9), {sigma, k});
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t c = 0; c < v[i].size(); ++c) sum[i][c] += t.q[i][c] - v[i][c];
  }
  double worst = 0.0;
  for (const Vector& e : sum)
    for (double c : e) worst = std::max(worst, std::abs(c / static_cast<double>(draws)));
  const double bound = 5.0 * sigma / std::sqrt(static_cast<double>(draws));
  return {worst <= bound, fmt("max |mean(q - V)| = %.2e", worst) + fmt(" (bound %.2e)", bound)};
}

Outcome flow_lyapunov(const Ctx& ctx) {
  const double t_end = ctx.full() ? 50.0 : 5.0;
  double worst = -1.0;
  for (GameKind k : {GameKind::MatchingPennies, GameKind::RPS}) {
    const HiddenGame g(GameParams::defaults(k));
    const ProductRepMap maps =
        sample_product_map(arch_for(default_map_kind(k)), g.n_players(), 7);
    const std::vector<FlowSample> tr =
        phgf_integrate(sample_init(maps, 0.5, 7), g, maps, 1e-3, t_end, g.z_star());
    for (std::size_t i = 1; i < tr.size(); ++i)
      worst = std::max(worst, tr[i].energy - tr[i - 1].energy);
  }
  return {worst <= 1e-10, fmt("largest energy increase %.2e", worst)};
}

// ---- merit --------------------------------------------------------------

Outcome merit_zero_points(const Ctx&) {
  bool ok = true;
  for (GameKind k : suite_games()) {
    const HiddenGame g(GameParams::defaults(k));
    ok = ok && energy(g.z_star(), g.z_star()) == 0.0 && tgap_latent(g.z_star(), g) <= 1e-9;
    Rng rng = make_rng(23);
    for (int p = 0; p < 20; ++p) {
      const Profile z = sample_domain_point(g.domain(), rng);
      ok = ok && energy(z, g.z_star()) >= 0.0 && tgap_latent(z, g) >= 0.0;
    }
  }
  const ProductRepMap mp = sample_product_map(arch_for(MapKind::MP), 2, 8);
  const HiddenGame g(GameParams::defaults(GameKind::MatchingPennies));
  ok = ok && err({{0.0}, {0.0}}, mp, g.z_star()) == 0.0 &&
       tgap_control({{0.0}, {0.0}}, g, mp) == 0.0;
  return {ok, "metrics nonnegative and zero at the documented points"};
}

Outcome tgap_separates(const Ctx&) {
  std::ostringstream os;
  bool ok = true;
  int used_games = 0;
  for (GameKind k : {GameKind::MatchingPennies, GameKind::RPS, GameKind::ElFarol,
                     GameKind::KLdemo}) {
    const HiddenGame g(GameParams::defaults(k));
    Rng rng = make_rng(24);
    double least = 1e300;
    int used = 0;
    while (used < 100) {
      const Profile z = sample_domain_point(g.domain(), rng);
      if (std::sqrt(2.0 * energy(z, g.z_star())) < 1e-2) continue;
      least = std::min(least, tgap_latent(z, g));
      ++used;
    }
    ok = ok && least > 1e-6 && tgap_latent(g.z_star(), g) <= 1e-9;
    if (used_games++) os << "; ";
    os << to_string(k) << fmt(" %.2e", least);
  }
  return {ok, "min off-equilibrium tgap: " + os.str()};
}

Outcome sandwich(const Ctx& ctx) {
  const int points = ctx.full() ? 100 : 30;
  double worst = 0.0;
  for (GameKind k : suite_games()) {
    const HiddenGame g(GameParams::defaults(k));
    const ProductRepMap maps = sample_product_map(arch_for(default_map_kind(k)), g.n_players(), 9);
    for (int p = 0; p < points; ++p) {
      const Profile x = sample_init(maps, 2.5, 100 + static_cast<std::uint64_t>(p));
      const SvBounds b = sv_bounds_at(maps, x);
      const double lat = tgap_range(x, g, maps), ctl = tgap_control(x, g, maps);
      const double tol = 1e-8 * std::max(1.0, ctl);
      worst = std::max({worst, b.sigma_min_range * lat - ctl - tol, ctl - b.sigma_max * lat - tol});
    }
  }
  return {worst <= 0.0, fmt("worst violation %.2e", std::max(worst, 0.0))};
}

Outcome gap_monotone_in_samples(const Ctx&) {
  bool ok = true;
  for (GameKind k : {GameKind::MatchingPennies, GameKind::RPS}) {
    const HiddenGame g(GameParams::defaults(k));
    Rng rng = make_rng(25);
    const Profile z_hat = sample_domain_point(g.domain(), rng);
    double prev = -1.0;
    for (std::size_t s : {1, 4, 16, 64, 256}) {
      const double v = gap_restricted(z_hat, g, s, 10, 3);
      ok = ok && v >= prev && v >= -1e-9;
      prev = v;
    }
  }
  return {ok, "gap_restricted nondecreasing over 1..256 samples"};
}

Outcome template_bounded(const Ctx&) {
  const HiddenGame g(GameParams::defaults(GameKind::MatchingPennies));
  const ProductRepMap maps = sample_product_map(arch_for(MapKind::MP), 2, 1);
  double peak[2] = {0.0, 0.0};
  const double gammas[2] = {0.01, 0.005};
  for (int i = 0; i < 2; ++i) {
    RunConfig rc;
    rc.schedule = StepSchedule::constant(gammas[i]);
    rc.max_iters = static_cast<std::size_t>(20.0 / gammas[i]);
    rc.record_every = rc.max_iters;
    rc.record_steps = true;
    const TrajectoryRecord rec = run(rc, g, maps, {{1.25}, {2.25}}, g.z_star());
    for (const TemplateResidual& r : template_check(rec.steps, g.z_star())) {
      if (!std::isfinite(r.r)) return {false, "non-finite residual"};
      peak[i] = std::max(peak[i], r.r);
    }
  }
  const double ratio = peak[0] / peak[1];
  return {ratio <= 4.0 && ratio >= 0.25, fmt("max r ratio %.3f", ratio)};
}

// ---- bench --------------------------------------------------------------

Outcome config_round_trip(const Ctx&) {
  const ExperimentConfig a = parse_config(
      "[game]\nkind = \"ElFarol\"\ncapacity = 12\n[algorithm]\nnames = [\"PHGD\", \"GD\"]\n"
      "[run]\nseeds = [1, 2, 3]\n");
  const ExperimentConfig b = parse_config(serialize_config(a));
  return {a == b, "serialize(parse(t)) parses back to an equal config"};
}

Outcome run_determinism(const Ctx&) {
  const HiddenGame g(GameParams::defaults(GameKind::MatchingPennies));
  const ProductRepMap maps = sample_product_map(arch_for(MapKind::MP), 2, 2);
  RunConfig rc;
  rc.noise = {0.05, 9};
  rc.max_iters = 500;
  const TrajectoryRecord a = run(rc, g, maps, {{1.0}, {-1.0}}, g.z_star());
  const TrajectoryRecord b = run(rc, g, maps, {{1.0}, {-1.0}}, g.z_star());
  std::ostringstream sa, sb;
  write_trajectory_csv(sa, a);
  write_trajectory_csv(sb, b);
  return {sa.str() == sb.str(), "identical CSV bytes for identical seeds"};
}

Outcome percentiles_ordered(const Ctx&) {
  Rng rng = make_rng(26);
  std::lognormal_distribution<double> ln(0.0, 3.0);
  bool ok = true;
  for (int k = 0; k < 200; ++k) {
    std::vector<double> v(1 + static_cast<std::size_t>(k % 20));
    for (double& e : v) e = ln(rng);
    if (k % 7 == 0) v.back() = std::numeric_limits<double>::infinity();
    const double p10 = percentile(v, 10), p50 = percentile(v, 50), p90 = percentile(v, 90);
    ok = ok && p10 <= p50 && p50 <= p90;
  }
  return {ok, "p10 <= median <= p90"};
}

struct Check {
  const char* module;
  const char* name;
  Outcome (*fn)(const Ctx&);
  bool full_only;
};

const std::vector<Check>& checks() {
  static const std::vector<Check> c{
      {"numkit", "svd reconstruction and orthonormality", svd_reconstruction, false},
      {"numkit", "Penrose conditions, 1000 matrices", penrose, false},
      {"numkit", "pinv(pinv(M)) = M", pinv_involution, false},
      {"numkit", "singular values vs characteristic polynomial", svd_vs_charpoly, false},
      {"repmaps", "analytic vs finite-difference Jacobian", jacobian_fd_match, false},
      {"repmaps", "head codomains and softmax row sums", head_codomains, false},
      {"repmaps", "deterministic sampling and evaluation", map_determinism, false},
      {"latent-games", "field vanishes at z*", field_vanishes_at_star, false},
      {"latent-games", "field is the gradient of each loss", field_is_gradient, false},
      {"latent-games", "monotonicity probe", monotonicity, false},
      {"latent-games", "Poisson-binomial tail exact and monotone", tail_properties, false},
      {"dynamics", "J P J^T is the range projector", right_inverse, false},
      {"dynamics", "covariant preconditioning", covariant_preconditioning, false},
      {"dynamics", "equilibria are PHGD fixed points", fixed_points, false},
      {"dynamics", "control noise is unbiased (1e5 draws)", noise_unbiased, true},
      {"dynamics", "PHGF energy nonincreasing", flow_lyapunov, false},
      {"merit", "nonnegative, zero at documented points", merit_zero_points, false},
      {"merit", "tgap vanishes only at z*", tgap_separates, false},
      {"merit", "sandwich inequality", sandwich, false},
      {"merit", "gap_restricted monotone in samples", gap_monotone_in_samples, false},
      {"merit", "template residuals bounded under step halving", template_bounded, false},
      {"bench-cli", "config round trip", config_round_trip, false},
      {"bench-cli", "run determinism", run_determinism, false},
      {"bench-cli", "percentile ordering", percentiles_ordered, false},
  };
  return c;
}

}  // namespace

std::vector<CheckResult> run_verify(const VerifyOptions& opts) {
  Ctx ctx{opts.level, [](const DenseMatrix& m) { return pinv(m); }};
  if (opts.inject_pinv_fault) {
    ctx.pinv_impl = [](const DenseMatrix& m) {
      DenseMatrix p = pinv(m);
      p(0, 0) += 1e-3;
      return p;
    };
  }
  std::vector<CheckResult> out;
  for (const Check& c : checks()) {
    if (c.full_only && !ctx.full()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r{c.module, c.name, false, "", 0.0};
    try {
      const Outcome o = c.fn(ctx);
      r.pass = o.pass;
      r.detail = o.detail;
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

int cmd_verify(const VerifyOptions& opts, std::ostream& out) {
  const std::vector<CheckResult> results = run_verify(opts);
  std::size_t failed = 0;
  for (const CheckResult& r : results) {
    char line[256];
    std::snprintf(line, sizeof line, "%-4s %-13s %-48s ", r.pass ? "PASS" : "FAIL",
                  r.module.c_str(), r.name.c_str());
    out << line;
    if (opts.timing) {
      std::snprintf(line, sizeof line, "%7.2fs ", r.seconds);
      out << line;
    }
    out << ' ' << r.detail << '\n';
    failed += r.pass ? 0 : 1;
  }
  out << (failed == 0 ? "all " : "") << results.size() - failed << "/" << results.size()
      << " checks passed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace hgd
