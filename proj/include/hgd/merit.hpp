#pragma once

// Merit functions: distances, gaps and the per-step energy template residual.

#include <cstdint>
#include <span>
#include <vector>

#include "hgd/dynamics.hpp"
#include "hgd/games.hpp"
#include "hgd/repmaps.hpp"

namespace hgd {

// 1/2 |z - z_hat|^2
double energy(const Profile& z, const Profile& z_hat);
// 1/2 |phi(x) - z_star|^2
double err(const Profile& x, const ProductRepMap& maps, const Profile& z_star);

// Projection of v onto the tangent cone of the domain at z: per-player mean
// removed on simplices; on a Box01 face the component that would push the
// descent direction -v out of the box is dropped.
Profile tangent_project(const LatentDomain& d, const Profile& z, const Profile& v);

double tgap_latent(const Profile& z, const HiddenGame& game);
// |V(x)|
double tgap_control(const Profile& x, const HiddenGame& game, const ProductRepMap& maps);
// |Pi g(phi(x))| with Pi the orthogonal projector onto range(J_i), per player.
double tgap_range(const Profile& x, const HiddenGame& game, const ProductRepMap& maps);

// Monte-Carlo lower bound on sup_z <g(z), z_hat - z> over the game's domain.
// Draws `samples` points (z = z_hat is always a candidate) and refines every
// sample that sets a new record by projected ascent for refine_steps steps.
// Nondecreasing in `samples` for a fixed seed.
double gap_restricted(const Profile& z_hat, const HiddenGame& game, std::size_t samples,
                      std::size_t refine_steps, std::uint64_t seed);

// Euclidean projection onto the domain; simplex coordinates are kept >= floor.
Profile project_to_domain(const LatentDomain& d, const Profile& z, double floor = 0.0);

struct TemplateResidual {
  std::size_t n = 0;
  double gamma = 0.0;
  double xi = 0.0;
  double r = 0.0;
};

// r_n = [E_{n+1} - E_n + gamma g(z_n).(z_n - z_hat) - gamma xi_n] / gamma^2 with
// xi_n = (g(z_n) - J P q).(z_n - z_hat). Steps with gamma = 0 are skipped.
// Throws MissingRecording on an empty trace.
std::vector<TemplateResidual> template_check(std::span<const StepTrace> steps,
                                             const Profile& z_hat);

struct MeritReport {
  double err = 0.0;     // to z_star
  double energy = 0.0;  // to the test point
  double tgap_latent = 0.0;
  double tgap_control = 0.0;
  double gap_restricted = 0.0;
  std::size_t sample_count = 0;
};

MeritReport merit_report(const Profile& x, const HiddenGame& game,
                         const ProductRepMap& maps, const Profile& z_hat,
                         std::size_t samples, std::size_t refine_steps,
                         std::uint64_t seed);

}  // namespace hgd
