#include "hgd/merit.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

#include "hgd/error.hpp"

namespace hgd {
namespace {

constexpr double kFaceTol = 1e-12;

void require_same_shape(const Profile& a, const Profile& b, const char* who) {
  if (a.size() != b.size()) throw ShapeMismatch(std::string(who) + ": player count");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].size() != b[i].size()) throw ShapeMismatch(std::string(who) + ": dimension");
}

double profile_dot(const Profile& a, const Profile& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += dot(a[i], b[i]);
  return s;
}

double profile_norm(const Profile& a) { return std::sqrt(profile_dot(a, a)); }

Profile profile_sub(const Profile& a, const Profile& b) {
  Profile out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = axpy(-1.0, b[i], a[i]);
  return out;
}

// Sort-based projection onto {v >= floor, sum v = 1}.
Vector project_simplex(std::span<const double> v, double floor) {
  const std::size_t d = v.size();
  const double mass = 1.0 - floor * static_cast<double>(d);
  Vector u(d);
  for (std::size_t k = 0; k < d; ++k) u[k] = v[k] - floor;
  Vector s = u;
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    cum += s[k];
    const double t = (cum - mass) / static_cast<double>(k + 1);
    if (s[k] - t > 0.0) theta = t;
  }
  Vector out(d);
  for (std::size_t k = 0; k < d; ++k) out[k] = std::max(u[k] - theta, 0.0) + floor;
  return out;
}

double gap_objective(const HiddenGame& game, const Profile& z, const Profile& z_hat) {
  return profile_dot(game.field(z), profile_sub(z_hat, z));
}

double refine(const HiddenGame& game, Profile z, const Profile& z_hat,
              std::size_t steps, double floor) {
  const LatentDomain& d = game.domain();
  double f = gap_objective(game, z, z_hat);
  constexpr double h = 1e-6;
  for (std::size_t it = 0; it < steps; ++it) {
    Profile grad = z;
    for (std::size_t i = 0; i < z.size(); ++i) {
      for (std::size_t c = 0; c < z[i].size(); ++c) {
        Profile zp = z, zm = z;
        zp[i][c] += h;
        zm[i][c] -= h;
        zp = project_to_domain(d, zp, floor);
        zm = project_to_domain(d, zm, floor);
        const double span = zp[i][c] - zm[i][c];
        grad[i][c] = span > 0.0
                         ? (gap_objective(game, zp, z_hat) - gap_objective(game, zm, z_hat)) / span
                         : 0.0;
      }
    }
    bool improved = false;
    for (double eta = 0.5; eta > 1e-8; eta *= 0.5) {
      Profile cand = z;
      for (std::size_t i = 0; i < z.size(); ++i) cand[i] = axpy(eta, grad[i], z[i]);
      cand = project_to_domain(d, cand, floor);
      const double fc = gap_objective(game, cand, z_hat);
      if (fc > f) {
        z = std::move(cand);
        f = fc;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return f;
}

}  // namespace

double energy(const Profile& z, const Profile& z_hat) {
  require_same_shape(z, z_hat, "energy");
  const Profile d = profile_sub(z, z_hat);
  return 0.5 * profile_dot(d, d);
}

double err(const Profile& x, const ProductRepMap& maps, const Profile& z_star) {
  return energy(maps.eval(x), z_star);
}

Profile tangent_project(const LatentDomain& d, const Profile& z, const Profile& v) {
  require_same_shape(z, v, "tangent_project");
  Profile out = v;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (d.players[i].kind == DomainKind::Simplex) {
      const double mean =
          std::accumulate(v[i].begin(), v[i].end(), 0.0) / static_cast<double>(v[i].size());
      for (double& e : out[i]) e -= mean;
    } else {
      for (std::size_t c = 0; c < v[i].size(); ++c) {
        if (z[i][c] <= kFaceTol && v[i][c] > 0.0) out[i][c] = 0.0;
        if (z[i][c] >= 1.0 - kFaceTol && v[i][c] < 0.0) out[i][c] = 0.0;
      }
    }
  }
  return out;
}

double tgap_latent(const Profile& z, const HiddenGame& game) {
  game.domain().require(z);
  return profile_norm(tangent_project(game.domain(), z, game.field(z)));
}

double tgap_control(const Profile& x, const HiddenGame& game, const ProductRepMap& maps) {
  return profile_norm(control_field(game, maps, x));
}

double tgap_range(const Profile& x, const HiddenGame& game, const ProductRepMap& maps) {
  const Profile g = game.field(maps.eval(x));
  const std::vector<DenseMatrix> jac = maps.jacobians(x);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    // J pinv(J) is the orthogonal projector onto range(J).
    const Vector p = matvec(matmul(jac[i], pinv(jac[i])), g[i]);
    s += dot(p, p);
  }
  return std::sqrt(s);
}

Profile project_to_domain(const LatentDomain& d, const Profile& z, double floor) {
  Profile out = z;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (d.players[i].kind == DomainKind::Simplex) {
      out[i] = project_simplex(z[i], floor);
    } else {
      for (double& e : out[i]) e = std::clamp(e, 0.0, 1.0);
    }
  }
  return out;
}

double gap_restricted(const Profile& z_hat, const HiddenGame& game, std::size_t samples,
                      std::size_t refine_steps, std::uint64_t seed) {
  if (samples == 0) throw ValidationError("gap_restricted: samples must be >= 1");
  // The KL field is undefined on the simplex boundary.
  const double floor = game.kind() == GameKind::KLdemo ? 1e-12 : 0.0;
  Rng rng = make_rng(seed, {0x676170});
  double best = 0.0;  // z = z_hat
  double record = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples; ++s) {
    const Profile z = project_to_domain(game.domain(), sample_domain_point(game.domain(), rng),
                                        floor);
    const double val = gap_objective(game, z, z_hat);
    best = std::max(best, val);
    if (val > record) {
      record = val;
      if (refine_steps > 0) best = std::max(best, refine(game, z, z_hat, refine_steps, floor));
    }
  }
  return best;
}

std::vector<TemplateResidual> template_check(std::span<const StepTrace> steps,
                                             const Profile& z_hat) {
  if (steps.empty()) throw MissingRecording("template_check: no recorded steps");
  std::vector<TemplateResidual> out;
  for (const StepTrace& s : steps) {
    if (s.z.empty() || s.z_next.empty() || s.latent_dir.empty()) {
      throw MissingRecording("template_check: step " + std::to_string(s.n) + " is incomplete");
    }
    if (s.gamma == 0.0) continue;
    const Profile dz = profile_sub(s.z, z_hat);
    const double e0 = 0.5 * profile_dot(dz, dz);
    const double e1 = energy(s.z_next, z_hat);
    const double xi = profile_dot(profile_sub(s.g, s.latent_dir), dz);
    const double r =
        (e1 - e0 + s.gamma * profile_dot(s.g, dz) - s.gamma * xi) / (s.gamma * s.gamma);
    out.push_back({s.n, s.gamma, xi, r});
  }
  return out;
}

MeritReport merit_report(const Profile& x, const HiddenGame& game,
                         const ProductRepMap& maps, const Profile& z_hat,
                         std::size_t samples, std::size_t refine_steps,
                         std::uint64_t seed) {
  const Profile z = maps.eval(x);
  MeritReport m;
  m.err = energy(z, game.z_star());
  m.energy = energy(z, z_hat);
  m.tgap_latent = tgap_latent(z, game);
  m.tgap_control = tgap_control(x, game, maps);
  m.gap_restricted = gap_restricted(z, game, samples, refine_steps, seed);
  m.sample_count = samples;
  return m;
}

}  // namespace hgd
