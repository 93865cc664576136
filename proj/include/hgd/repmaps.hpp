#pragma once

// Per-player representation maps: two-layer perceptrons with zero biases,
//   phi(x) = head(W2 * act(W1 * x)),
// together with their exact chain-rule Jacobians.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgd/numkit.hpp"
#include "json.hpp"

namespace hgd {

// A profile holds one vector per player (controls x or latents z).
using Profile = std::vector<Vector>;

enum class Activation { CeLU, Sigmoid, Softmax, Identity, Logit };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

double celu(double t);
double celu_derivative(double t);
double sigmoid(double t);

// Applies an activation to a pre-activation vector. Logit maps R^k onto the
// interior of the k-simplex in R^{k+1} (softmax with an appended zero logit).
Vector activate(Activation a, std::span<const double> pre);
// Local derivative d activate / d pre, of shape out_dim x pre.size().
DenseMatrix activation_derivative(Activation a, std::span<const double> pre);
std::size_t activation_output_dim(Activation a, std::size_t pre_dim);

class MlpRepMap {
 public:
  MlpRepMap(DenseMatrix w1, DenseMatrix w2, Activation hidden_act,
            Activation head);

  const DenseMatrix& w1() const { return w1_; }
  const DenseMatrix& w2() const { return w2_; }
  Activation hidden_act() const { return hidden_act_; }
  Activation head() const { return head_; }
  std::size_t input_dim() const { return w1_.cols(); }
  std::size_t hidden_dim() const { return w1_.rows(); }
  std::size_t output_dim() const;

  bool operator==(const MlpRepMap&) const = default;

 private:
  DenseMatrix w1_;
  DenseMatrix w2_;
  Activation hidden_act_;
  Activation head_;
};

Vector map_eval(const MlpRepMap& m, std::span<const double> x);
DenseMatrix map_jacobian(const MlpRepMap& m, std::span<const double> x);
// Central-difference Jacobian estimate with step h.
DenseMatrix jacobian_fd(const MlpRepMap& m, std::span<const double> x, double h);

enum class MapKind { MP, RPS, Shapley, ElFarol, KLdemo, Custom };

std::string_view to_string(MapKind k);
MapKind map_kind_from_string(std::string_view s);

struct ArchSpec {
  MapKind kind = MapKind::Custom;
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 1;
  std::size_t pre_head_dim = 1;  // rows of W2
  double w1_range = 1.0;         // W1 entries uniform in [-w1_range, w1_range]
  double w2_range = 1.0;
  Activation hidden_act = Activation::CeLU;
  Activation head = Activation::Sigmoid;
  // Scalar (1x1) weights closer to zero than this are redrawn.
  double weight_floor = 0.0;
  // Fixed identity weights instead of random draws (the KL demo).
  bool identity_weights = false;
};

inline constexpr double kScalarWeightFloor = 0.05;
inline constexpr int kMaxResamples = 100;

// Architecture of the maps used by each experiment.
ArchSpec arch_for(MapKind kind);

// Deterministic in (spec, seed). Throws ResampleLimit if the scalar-weight
// floor is still violated after kMaxResamples draws.
MlpRepMap sample_map(const ArchSpec& spec, std::uint64_t seed);

class ProductRepMap {
 public:
  ProductRepMap() = default;
  explicit ProductRepMap(std::vector<MlpRepMap> players);

  std::size_t n_players() const { return players_.size(); }
  const MlpRepMap& player(std::size_t i) const { return players_[i]; }
  const std::vector<MlpRepMap>& players() const { return players_; }
  std::vector<std::size_t> input_dims() const;
  std::vector<std::size_t> output_dims() const;

  Profile eval(const Profile& x) const;
  std::vector<DenseMatrix> jacobians(const Profile& x) const;

  bool operator==(const ProductRepMap&) const = default;

 private:
  std::vector<MlpRepMap> players_;
};

// One independently seeded map per player; player i uses a seed derived from
// (seed, i).
ProductRepMap sample_product_map(const ArchSpec& spec, std::size_t n_players,
                                 std::uint64_t seed);

struct SvBounds {
  double sigma_min = 0.0;        // smallest of all sqrt(eig(J_i J_i^T))
  double sigma_max = 0.0;
  double sigma_min_range = 0.0;  // smallest singular value above the rank cutoff
};

// Singular-value extremes of the block-diagonal Jacobian over the probe set.
SvBounds sv_bounds(const ProductRepMap& maps, std::span<const Profile> probes);
SvBounds sv_bounds_at(const ProductRepMap& maps, const Profile& x);

nlohmann::json map_to_json(const MlpRepMap& m, MapKind spec, std::uint64_t seed);
MlpRepMap map_from_json(const nlohmann::json& j);
nlohmann::json product_map_to_json(const ProductRepMap& m, MapKind spec,
                                   std::uint64_t seed);
ProductRepMap product_map_from_json(const nlohmann::json& j);

}  // namespace hgd
