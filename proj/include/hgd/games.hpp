#pragma once

// The latent games: the hidden gradient fields g(z) the players' losses
// induce, their domains, and their reference equilibria.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hgd/numkit.hpp"
#include "hgd/repmaps.hpp"
#include "hgd/rng.hpp"

namespace hgd {

enum class DomainKind { Box01, Simplex };

struct PlayerDomain {
  DomainKind kind = DomainKind::Box01;
  std::size_t dim = 1;
};

struct LatentDomain {
  std::vector<PlayerDomain> players;

  // Box01 needs every coordinate in [0,1]; Simplex needs nonnegative entries
  // summing to one. Both within tol.
  bool contains(const Profile& z, double tol = 1e-9) const;
  // Throws DomainViolation unless contains(z, tol).
  void require(const Profile& z, double tol = 1e-9) const;
};

enum class GameKind { MatchingPennies, RPS, Shapley, ElFarol, KLdemo };

std::string_view to_string(GameKind k);
GameKind game_kind_from_string(std::string_view s);
MapKind default_map_kind(GameKind k);

// Sign under which the El Farol expected payoff enters a player's loss.
enum class ElFarolConvention {
  Cost,    // loss = -expected payoff + regularizer
  Payoff,  // loss = expected payoff + regularizer, taken literally
};

struct GameParams {
  GameKind kind = GameKind::MatchingPennies;
  double mu = 0.75;
  double beta = 0.2;           // Shapley
  std::size_t players = 30;    // El Farol
  std::size_t capacity = 18;   // El Farol C
  double stay = 0.5;           // El Farol S
  double crowded = 0.0;        // El Farol B
  double good = 1.0;           // El Farol G
  ElFarolConvention convention = ElFarolConvention::Cost;

  static GameParams defaults(GameKind kind);
  // Throws ValidationError on out-of-range parameters.
  void validate() const;
  bool operator==(const GameParams&) const = default;
};

// mu * (z_i - z*_i)
Vector reg_grad(std::span<const double> z_i, std::span<const double> z_star_i,
                double mu);

Profile field_mp(const Profile& z, double mu);
Profile field_rps(const Profile& z, double mu);
Profile field_shapley(const Profile& z, double beta, double mu);
Profile field_elfarol(const Profile& z, const GameParams& p);
Profile field_kldemo(const Profile& z);

// P(sum of independent Bernoulli(probs) >= c), exact, O(n c).
double poisson_binomial_tail(std::span<const double> probs, std::size_t c);

DenseMatrix rps_matrix();
DenseMatrix shapley_a(double beta);
DenseMatrix shapley_b(double beta);
// Target distribution of the KL demo.
Vector kldemo_target();

class HiddenGame {
 public:
  explicit HiddenGame(GameParams params);

  const GameParams& params() const { return params_; }
  GameKind kind() const { return params_.kind; }
  std::size_t n_players() const { return domain_.players.size(); }
  std::vector<std::size_t> latent_dims() const;
  const LatentDomain& domain() const { return domain_; }
  double mu() const { return params_.mu; }
  // Point where the (tangent-projected) field vanishes. For El Farol this is
  // the numerically computed fixed point, not the nominal C/n.
  const Profile& z_star() const { return z_star_; }
  // Center of the regularizer: the base game's equilibrium (C/n for El Farol).
  const Profile& anchor() const { return anchor_; }

  // Throws DomainViolation if z is outside the domain by more than 1e-9.
  Profile field(const Profile& z) const;
  // Player i's latent loss; field() is its partial gradient.
  double loss(std::size_t player, const Profile& z) const;

 private:
  GameParams params_;
  LatentDomain domain_;
  Profile anchor_;
  Profile z_star_;
};

// Interior fixed point of the regularized El Farol game via damped
// best-response iteration. Throws IterationLimit if it fails to settle.
Profile elfarol_fixed_point(const GameParams& p);

Profile sample_domain_point(const LatentDomain& d, Rng& rng);

struct MonotonicityReport {
  double min_quotient = 0.0;
  std::size_t violations = 0;  // quotients below mu - 1e-9
  std::size_t pairs_used = 0;  // pairs with z != z'
};

// Minimum of <g(z)-g(z'), z-z'> / |z-z'|^2 over random domain pairs. Simplex
// pairs differ by tangent displacements only.
MonotonicityReport monotonicity_probe(const HiddenGame& game, std::size_t pairs,
                                      std::uint64_t seed);

}  // namespace hgd
