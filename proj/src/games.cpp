#include "hgd/games.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "hgd/error.hpp"

namespace hgd {
namespace {

constexpr double kDomainTol = 1e-9;

void require_shape(const Profile& z, std::size_t players, std::size_t dim,
                   const char* who) {
  if (z.size() != players) {
    throw ShapeMismatch(std::string(who) + ": expected " + std::to_string(players) +
                        " players");
  }
  for (const Vector& zi : z) {
    if (zi.size() != dim) {
      throw ShapeMismatch(std::string(who) + ": expected latent dimension " +
                          std::to_string(dim));
    }
  }
}

LatentDomain box_domain(std::size_t players, std::size_t dim) {
  return LatentDomain{std::vector<PlayerDomain>(players, {DomainKind::Box01, dim})};
}

LatentDomain simplex_domain(std::size_t players, std::size_t dim) {
  return LatentDomain{std::vector<PlayerDomain>(players, {DomainKind::Simplex, dim})};
}

Vector uniform_simplex(std::size_t dim) { return Vector(dim, 1.0 / static_cast<double>(dim)); }

double bilinear(std::span<const double> a, const DenseMatrix& m,
                std::span<const double> b) {
  return dot(a, matvec(m, b));
}

double half_sq_dist(const Profile& z, const Profile& anchor) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t k = 0; k < z[i].size(); ++k) {
      const double d = z[i][k] - anchor[i][k];
      s += d * d;
    }
  return 0.5 * s;
}

// Tail probability that at least C of the players other than i attend.
double others_tail(const Profile& z, std::size_t i, std::size_t capacity) {
  Vector others;
  others.reserve(z.size() - 1);
  for (std::size_t j = 0; j < z.size(); ++j)
    if (j != i) others.push_back(z[j][0]);
  return poisson_binomial_tail(others, capacity);
}

double elfarol_sign(ElFarolConvention c) {
  return c == ElFarolConvention::Cost ? -1.0 : 1.0;
}

// Linear coefficient of z_i in player i's loss, excluding the regularizer.
double elfarol_attend_coef(const Profile& z, std::size_t i, const GameParams& p) {
  const double tail = others_tail(z, i, p.capacity);
  return elfarol_sign(p.convention) * (p.good - p.stay + tail * (p.crowded - p.good));
}

void require_elfarol(const Profile& z, const GameParams& p) {
  require_shape(z, p.players, 1, "field_elfarol");
  box_domain(p.players, 1).require(z, kDomainTol);
}

double nominal_attendance(const GameParams& p) {
  return static_cast<double>(p.capacity) / static_cast<double>(p.players);
}

}  // namespace

bool LatentDomain::contains(const Profile& z, double tol) const {
  if (z.size() != players.size()) return false;
  for (std::size_t i = 0; i < players.size(); ++i) {
    const PlayerDomain& d = players[i];
    if (z[i].size() != d.dim) return false;
    for (double v : z[i]) {
      if (!std::isfinite(v)) return false;
      if (v < -tol) return false;
      if (d.kind == DomainKind::Box01 && v > 1.0 + tol) return false;
    }
    if (d.kind == DomainKind::Simplex) {
      const double s = std::accumulate(z[i].begin(), z[i].end(), 0.0);
      if (std::abs(s - 1.0) > tol) return false;
    }
  }
  return true;
}

void LatentDomain::require(const Profile& z, double tol) const {
  if (!contains(z, tol)) throw DomainViolation("latent profile outside the game's domain");
}

std::string_view to_string(GameKind k) {
  switch (k) {
    case GameKind::MatchingPennies: return "MP";
    case GameKind::RPS: return "RPS";
    case GameKind::Shapley: return "Shapley";
    case GameKind::ElFarol: return "ElFarol";
    case GameKind::KLdemo: return "KLdemo";
  }
  return "?";
}

GameKind game_kind_from_string(std::string_view s) {
  for (GameKind k : {GameKind::MatchingPennies, GameKind::RPS, GameKind::Shapley,
                     GameKind::ElFarol, GameKind::KLdemo}) {
    if (to_string(k) == s) return k;
  }
  throw ParseError("unknown game kind '" + std::string(s) + "'");
}

MapKind default_map_kind(GameKind k) {
  switch (k) {
    case GameKind::MatchingPennies: return MapKind::MP;
    case GameKind::RPS: return MapKind::RPS;
    case GameKind::Shapley: return MapKind::Shapley;
    case GameKind::ElFarol: return MapKind::ElFarol;
    case GameKind::KLdemo: return MapKind::KLdemo;
  }
  return MapKind::Custom;
}

GameParams GameParams::defaults(GameKind kind) {
  GameParams p;
  p.kind = kind;
  switch (kind) {
    case GameKind::MatchingPennies: p.mu = 0.75; break;
    case GameKind::RPS: p.mu = 0.2; break;
    case GameKind::Shapley: p.mu = 0.2; break;
    case GameKind::ElFarol: p.mu = 0.5; break;
    // The KL objective has Hessian diag(1/z) >= I on the simplex.
    case GameKind::KLdemo: p.mu = 1.0; break;
  }
  return p;
}

void GameParams::validate() const {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ValidationError("mu must be >= 0");
  if (kind == GameKind::Shapley && !(beta > 0.0 && beta < 1.0)) {
    throw ValidationError("Shapley beta must lie in (0, 1)");
  }
  if (kind == GameKind::ElFarol) {
    if (players < 2) throw ValidationError("El Farol needs at least 2 players");
    if (capacity > players) throw ValidationError("El Farol capacity must satisfy 0 <= C <= n");
    if (!(crowded < stay && stay < good)) {
      throw ValidationError("El Farol payoffs must satisfy B < S < G");
    }
  }
}

Vector reg_grad(std::span<const double> z_i, std::span<const double> z_star_i,
                double mu) {
  if (z_i.size() != z_star_i.size()) throw ShapeMismatch("reg_grad: length mismatch");
  Vector g(z_i.size());
  for (std::size_t k = 0; k < z_i.size(); ++k) g[k] = mu * (z_i[k] - z_star_i[k]);
  return g;
}

DenseMatrix rps_matrix() {
  return DenseMatrix::from_rows({{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}});
}

DenseMatrix shapley_a(double beta) {
  return DenseMatrix::from_rows({{1, 0, beta}, {beta, 1, 0}, {0, beta, 1}});
}

DenseMatrix shapley_b(double beta) {
  return DenseMatrix::from_rows({{-beta, 1, 0}, {0, -beta, 1}, {1, 0, -beta}});
}

Vector kldemo_target() { return {1.0 / 2.0, 1.0 / 3.0, 1.0 / 6.0}; }

Profile field_mp(const Profile& z, double mu) {
  require_shape(z, 2, 1, "field_mp");
  box_domain(2, 1).require(z, kDomainTol);
  const double z1 = z[0][0], z2 = z[1][0];
  return {{-2.0 * (2.0 * z2 - 1.0) + mu * (z1 - 0.5)},
          {2.0 * (2.0 * z1 - 1.0) + mu * (z2 - 0.5)}};
}

Profile field_rps(const Profile& z, double mu) {
  require_shape(z, 2, 3, "field_rps");
  simplex_domain(2, 3).require(z, kDomainTol);
  const DenseMatrix a = rps_matrix();
  const Vector u = uniform_simplex(3);
  Vector g1 = axpy(-1.0, matvec(a, z[1]), reg_grad(z[0], u, mu));
  Vector g2 = axpy(1.0, matvec(transpose(a), z[0]), reg_grad(z[1], u, mu));
  return {std::move(g1), std::move(g2)};
}

Profile field_shapley(const Profile& z, double beta, double mu) {
  require_shape(z, 2, 3, "field_shapley");
  simplex_domain(2, 3).require(z, kDomainTol);
  const Vector u = uniform_simplex(3);
  // l1 = -z1^T A z2 + h,  l2 = -z2^T B^T z1 + h
  Vector g1 = axpy(-1.0, matvec(shapley_a(beta), z[1]), reg_grad(z[0], u, mu));
  Vector g2 = axpy(-1.0, matvec(transpose(shapley_b(beta)), z[0]), reg_grad(z[1], u, mu));
  return {std::move(g1), std::move(g2)};
}

double poisson_binomial_tail(std::span<const double> probs, std::size_t c) {
  if (c == 0) return 1.0;
  if (c > probs.size()) return 0.0;
  // dist[k] = P(exactly k successes so far) for k < c; dist[c] absorbs ">= c".
  Vector dist(c + 1, 0.0);
  dist[0] = 1.0;
  std::size_t seen = 0;
  for (double p : probs) {
    ++seen;
    dist[c] += dist[c - 1] * p;
    for (std::size_t k = std::min(seen, c - 1); k >= 1; --k)
      dist[k] = dist[k] * (1.0 - p) + dist[k - 1] * p;
    dist[0] *= (1.0 - p);
  }
  return dist[c];
}

Profile field_elfarol(const Profile& z, const GameParams& p) {
  require_elfarol(z, p);
  const double target = nominal_attendance(p);
  Profile g(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    g[i] = {elfarol_attend_coef(z, i, p) + p.mu * (z[i][0] - target)};
  }
  return g;
}

Profile field_kldemo(const Profile& z) {
  require_shape(z, 1, 3, "field_kldemo");
  simplex_domain(1, 3).require(z, kDomainTol);
  const Vector target = kldemo_target();
  Vector g(3);
  for (std::size_t k = 0; k < 3; ++k) {
    if (!(z[0][k] > 0.0)) throw DomainViolation("field_kldemo: z must be strictly positive");
    g[k] = std::log(z[0][k] / target[k]) + 1.0;
  }
  return {g};
}

Profile elfarol_fixed_point(const GameParams& p) {
  const std::size_t n = p.players;
  const double target = nominal_attendance(p);
  Profile z(n, Vector{target});
  constexpr double kDamping = 0.05;
  constexpr int kMaxIters = 200000;
  for (int it = 0; it < kMaxIters; ++it) {
    double change = 0.0;
    Profile next = z;
    for (std::size_t i = 0; i < n; ++i) {
      // argmin over [0,1] of coef * z_i + (mu/2)(z_i - target)^2
      const double br =
          std::clamp(target - elfarol_attend_coef(z, i, p) / p.mu, 0.0, 1.0);
      next[i][0] = z[i][0] + kDamping * (br - z[i][0]);
      change = std::max(change, std::abs(br - z[i][0]));
    }
    z = std::move(next);
    if (change < 1e-14) return z;
  }

  // Best response is unstable under the Payoff convention; fall back to the
  // symmetric root of the stationarity condition, found by bisection.
  auto stationarity = [&](double t) {
    const Profile sym(n, Vector{t});
    return elfarol_attend_coef(sym, 0, p) + p.mu * (t - target);
  };
  double lo = 0.0, hi = 1.0;
  double flo = stationarity(lo), fhi = stationarity(hi);
  if (flo * fhi > 0.0) {
    throw IterationLimit("elfarol_fixed_point: best response did not settle");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = stationarity(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return Profile(n, Vector{0.5 * (lo + hi)});
}

HiddenGame::HiddenGame(GameParams params) : params_(params) {
  params_.validate();
  switch (params_.kind) {
    case GameKind::MatchingPennies:
      domain_ = box_domain(2, 1);
      anchor_ = {{0.5}, {0.5}};
      z_star_ = anchor_;
      break;
    case GameKind::RPS:
    case GameKind::Shapley:
      domain_ = simplex_domain(2, 3);
      anchor_ = {uniform_simplex(3), uniform_simplex(3)};
      z_star_ = anchor_;
      break;
    case GameKind::ElFarol:
      domain_ = box_domain(params_.players, 1);
      anchor_ = Profile(params_.players, Vector{nominal_attendance(params_)});
      z_star_ = elfarol_fixed_point(params_);
      break;
    case GameKind::KLdemo:
      domain_ = simplex_domain(1, 3);
      anchor_ = {kldemo_target()};
      z_star_ = anchor_;
      break;
  }
}

std::vector<std::size_t> HiddenGame::latent_dims() const {
  std::vector<std::size_t> d;
  for (const auto& p : domain_.players) d.push_back(p.dim);
  return d;
}

Profile HiddenGame::field(const Profile& z) const {
  switch (params_.kind) {
    case GameKind::MatchingPennies: return field_mp(z, params_.mu);
    case GameKind::RPS: return field_rps(z, params_.mu);
    case GameKind::Shapley: return field_shapley(z, params_.beta, params_.mu);
    case GameKind::ElFarol: return field_elfarol(z, params_);
    case GameKind::KLdemo: return field_kldemo(z);
  }
  return {};
}

double HiddenGame::loss(std::size_t player, const Profile& z) const {
  domain_.require(z, kDomainTol);
  if (player >= n_players()) throw ShapeMismatch("loss: player index out of range");
  const double h = params_.mu * half_sq_dist(z, anchor_);
  switch (params_.kind) {
    case GameKind::MatchingPennies: {
      const double bilin = (2.0 * z[0][0] - 1.0) * (2.0 * z[1][0] - 1.0);
      return (player == 0 ? -bilin : bilin) + h;
    }
    case GameKind::RPS: {
      const double bilin = bilinear(z[0], rps_matrix(), z[1]);
      return (player == 0 ? -bilin : bilin) + h;
    }
    case GameKind::Shapley:
      if (player == 0) return -bilinear(z[0], shapley_a(params_.beta), z[1]) + h;
      return -bilinear(z[1], transpose(shapley_b(params_.beta)), z[0]) + h;
    case GameKind::ElFarol: {
      const GameParams& p = params_;
      const double tail = others_tail(z, player, p.capacity);
      const double payoff =
          p.stay + z[player][0] * (p.good - p.stay + tail * (p.crowded - p.good));
      return (p.convention == ElFarolConvention::Cost ? -payoff : payoff) + h;
    }
    case GameKind::KLdemo: {
      const Vector target = kldemo_target();
      double kl = 0.0;
      for (std::size_t k = 0; k < 3; ++k) kl += z[0][k] * std::log(z[0][k] / target[k]);
      return kl;
    }
  }
  return 0.0;
}

Profile sample_domain_point(const LatentDomain& d, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Profile z(d.players.size());
  for (std::size_t i = 0; i < d.players.size(); ++i) {
    const PlayerDomain& pd = d.players[i];
    z[i].resize(pd.dim);
    if (pd.kind == DomainKind::Box01) {
      for (double& v : z[i]) v = unit(rng);
    } else {
      // Flat Dirichlet via normalized exponentials.
      double s = 0.0;
      for (double& v : z[i]) {
        v = -std::log1p(-unit(rng));
        s += v;
      }
      for (double& v : z[i]) v /= s;
    }
  }
  return z;
}

MonotonicityReport monotonicity_probe(const HiddenGame& game, std::size_t pairs,
                                      std::uint64_t seed) {
  Rng rng = make_rng(seed, {0x6d6f6e6f});
  MonotonicityReport r;
  r.min_quotient = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pairs; ++k) {
    const Profile z = sample_domain_point(game.domain(), rng);
    const Profile w = sample_domain_point(game.domain(), rng);
    double num = 0.0, den = 0.0;
    const Profile gz = game.field(z);
    const Profile gw = game.field(w);
    for (std::size_t i = 0; i < z.size(); ++i)
      for (std::size_t c = 0; c < z[i].size(); ++c) {
        const double dz = z[i][c] - w[i][c];
        num += (gz[i][c] - gw[i][c]) * dz;
        den += dz * dz;
      }
    if (den < 1e-24) continue;
    const double q = num / den;
    ++r.pairs_used;
    r.min_quotient = std::min(r.min_quotient, q);
    if (q < game.mu() - 1e-9) ++r.violations;
  }
  return r;
}

}  // namespace hgd
