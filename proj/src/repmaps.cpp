#include "hgd/repmaps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hgd/error.hpp"
#include "hgd/rng.hpp"

namespace hgd {
namespace {

Vector softmax(std::span<const double> t) {
  const double m = *std::max_element(t.begin(), t.end());
  Vector p(t.size());
  double s = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    p[k] = std::exp(t[k] - m);
    s += p[k];
  }
  for (double& e : p) e /= s;
  return p;
}

// diag(p) - p p^T
DenseMatrix softmax_local(std::span<const double> p) {
  const std::size_t k = p.size();
  DenseMatrix d(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) d(i, j) = (i == j ? p[i] : 0.0) - p[i] * p[j];
  return d;
}

DenseMatrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                           double range) {
  std::uniform_real_distribution<double> u(-range, range);
  DenseMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

bool scalar_floor_ok(const DenseMatrix& w, double floor) {
  if (w.rows() * w.cols() != 1) return true;
  return std::abs(w(0, 0)) >= floor;
}

DenseMatrix json_to_matrix(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty()) {
    throw ParseError(std::string("map json: '") + what + "' must be a non-empty 2-D array");
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  std::vector<double> data;
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols) {
      throw ParseError(std::string("map json: '") + what + "' rows are ragged");
    }
    for (const auto& e : row) data.push_back(e.get<double>());
  }
  return DenseMatrix(rows, cols, std::move(data));
}

nlohmann::json matrix_to_json(const DenseMatrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) out.push_back(m.row(i));
  return out;
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::CeLU: return "celu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softmax: return "softmax";
    case Activation::Identity: return "identity";
    case Activation::Logit: return "logit";
  }
  return "?";
}

Activation activation_from_string(std::string_view s) {
  for (Activation a : {Activation::CeLU, Activation::Sigmoid, Activation::Softmax,
                       Activation::Identity, Activation::Logit}) {
    if (to_string(a) == s) return a;
  }
  throw ParseError("unknown activation '" + std::string(s) + "'");
}

double celu(double t) { return t > 0.0 ? t : std::expm1(t); }

// Both one-sided limits at 0 equal 1.
double celu_derivative(double t) { return t >= 0.0 ? 1.0 : std::exp(t); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

std::size_t activation_output_dim(Activation a, std::size_t pre_dim) {
  return a == Activation::Logit ? pre_dim + 1 : pre_dim;
}

Vector activate(Activation a, std::span<const double> pre) {
  switch (a) {
    case Activation::CeLU: {
      Vector out(pre.size());
      std::transform(pre.begin(), pre.end(), out.begin(), celu);
      return out;
    }
    case Activation::Sigmoid: {
      Vector out(pre.size());
      std::transform(pre.begin(), pre.end(), out.begin(), sigmoid);
      return out;
    }
    case Activation::Identity:
      return Vector(pre.begin(), pre.end());
    case Activation::Softmax:
      return softmax(pre);
    case Activation::Logit: {
      Vector ext(pre.begin(), pre.end());
      ext.push_back(0.0);
      return softmax(ext);
    }
  }
  return {};
}

DenseMatrix activation_derivative(Activation a, std::span<const double> pre) {
  const std::size_t k = pre.size();
  switch (a) {
    case Activation::CeLU: {
      Vector d(k);
      std::transform(pre.begin(), pre.end(), d.begin(), celu_derivative);
      return DenseMatrix::diagonal(d);
    }
    case Activation::Sigmoid: {
      Vector d(k);
      for (std::size_t i = 0; i < k; ++i) {
        const double s = sigmoid(pre[i]);
        d[i] = s * (1.0 - s);
      }
      return DenseMatrix::diagonal(d);
    }
    case Activation::Identity:
      return DenseMatrix::identity(k);
    case Activation::Softmax:
      return softmax_local(softmax(pre));
    case Activation::Logit: {
      // Columns of the (k+1)-softmax derivative for the k free logits.
      Vector ext(pre.begin(), pre.end());
      ext.push_back(0.0);
      const DenseMatrix full = softmax_local(softmax(ext));
      DenseMatrix d(k + 1, k);
      for (std::size_t i = 0; i <= k; ++i)
        for (std::size_t j = 0; j < k; ++j) d(i, j) = full(i, j);
      return d;
    }
  }
  return {};
}

MlpRepMap::MlpRepMap(DenseMatrix w1, DenseMatrix w2, Activation hidden_act,
                     Activation head)
    : w1_(std::move(w1)), w2_(std::move(w2)), hidden_act_(hidden_act), head_(head) {
  if (w2_.cols() != w1_.rows()) {
    throw ShapeMismatch("MlpRepMap: W2 columns must equal W1 rows");
  }
  if (hidden_act_ == Activation::Softmax || hidden_act_ == Activation::Logit) {
    throw ValidationError("MlpRepMap: hidden activation must be elementwise");
  }
}

std::size_t MlpRepMap::output_dim() const {
  return activation_output_dim(head_, w2_.rows());
}

namespace {

// D_a(pre) * rhs, scaling rows in place for elementwise activations.
DenseMatrix apply_derivative(Activation a, std::span<const double> pre, DenseMatrix rhs) {
  double (*scale)(double) = nullptr;
  switch (a) {
    case Activation::Identity: return rhs;
    case Activation::CeLU: scale = celu_derivative; break;
    case Activation::Sigmoid:
      scale = [](double v) {
        const double s = sigmoid(v);
        return s * (1.0 - s);
      };
      break;
    case Activation::Softmax:
    case Activation::Logit: return matmul(activation_derivative(a, pre), rhs);
  }
  for (std::size_t i = 0; i < rhs.rows(); ++i) {
    const double d = scale(pre[i]);
    for (std::size_t j = 0; j < rhs.cols(); ++j) rhs(i, j) *= d;
  }
  return rhs;
}

}  // namespace

Vector map_eval(const MlpRepMap& m, std::span<const double> x) {
  if (x.size() != m.input_dim()) throw ShapeMismatch("map_eval: input length");
  const Vector hidden = activate(m.hidden_act(), matvec(m.w1(), x));
  return activate(m.head(), matvec(m.w2(), hidden));
}

DenseMatrix map_jacobian(const MlpRepMap& m, std::span<const double> x) {
  if (x.size() != m.input_dim()) throw ShapeMismatch("map_jacobian: input length");
  const Vector pre1 = matvec(m.w1(), x);
  const Vector hidden = activate(m.hidden_act(), pre1);
  const Vector pre2 = matvec(m.w2(), hidden);
  // J = D_head(pre2) * W2 * D_act(pre1) * W1
  const DenseMatrix inner = apply_derivative(m.hidden_act(), pre1, m.w1());
  return apply_derivative(m.head(), pre2, matmul(m.w2(), inner));
}

DenseMatrix jacobian_fd(const MlpRepMap& m, std::span<const double> x, double h) {
  Vector xp(x.begin(), x.end());
  DenseMatrix j(m.output_dim(), m.input_dim());
  for (std::size_t c = 0; c < x.size(); ++c) {
    xp[c] = x[c] + h;
    const Vector fp = map_eval(m, xp);
    xp[c] = x[c] - h;
    const Vector fm = map_eval(m, xp);
    xp[c] = x[c];
    for (std::size_t r = 0; r < fp.size(); ++r) j(r, c) = (fp[r] - fm[r]) / (2.0 * h);
  }
  return j;
}

std::string_view to_string(MapKind k) {
  switch (k) {
    case MapKind::MP: return "MP";
    case MapKind::RPS: return "RPS";
    case MapKind::Shapley: return "Shapley";
    case MapKind::ElFarol: return "ElFarol";
    case MapKind::KLdemo: return "KLdemo";
    case MapKind::Custom: return "Custom";
  }
  return "?";
}

MapKind map_kind_from_string(std::string_view s) {
  for (MapKind k : {MapKind::MP, MapKind::RPS, MapKind::Shapley, MapKind::ElFarol,
                    MapKind::KLdemo, MapKind::Custom}) {
    if (to_string(k) == s) return k;
  }
  throw ParseError("unknown map spec '" + std::string(s) + "'");
}

ArchSpec arch_for(MapKind kind) {
  ArchSpec a;
  a.kind = kind;
  switch (kind) {
    case MapKind::MP:
      a.input_dim = a.hidden_dim = a.pre_head_dim = 1;
      a.head = Activation::Sigmoid;
      a.weight_floor = kScalarWeightFloor;
      break;
    case MapKind::RPS:
    case MapKind::Shapley:
      a.input_dim = 5;
      a.hidden_dim = 4;
      a.pre_head_dim = 3;
      a.head = Activation::Softmax;
      break;
    case MapKind::ElFarol:
      a.input_dim = 5;
      a.hidden_dim = 4;
      a.pre_head_dim = 1;
      a.w1_range = 0.85;
      a.head = Activation::Sigmoid;
      break;
    case MapKind::KLdemo:
      a.input_dim = a.hidden_dim = a.pre_head_dim = 2;
      a.hidden_act = Activation::Identity;
      a.head = Activation::Logit;
      a.identity_weights = true;
      break;
    case MapKind::Custom:
      break;
  }
  return a;
}

MlpRepMap sample_map(const ArchSpec& spec, std::uint64_t seed) {
  if (spec.identity_weights) {
    return MlpRepMap(DenseMatrix::identity(spec.input_dim),
                     DenseMatrix::identity(spec.hidden_dim), spec.hidden_act,
                     spec.head);
  }
  Rng rng = make_rng(seed, {0x6d6170});
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    DenseMatrix w1 = uniform_matrix(rng, spec.hidden_dim, spec.input_dim, spec.w1_range);
    DenseMatrix w2 = uniform_matrix(rng, spec.pre_head_dim, spec.hidden_dim, spec.w2_range);
    if (scalar_floor_ok(w1, spec.weight_floor) && scalar_floor_ok(w2, spec.weight_floor)) {
      return MlpRepMap(std::move(w1), std::move(w2), spec.hidden_act, spec.head);
    }
  }
  throw ResampleLimit("sample_map: weight floor not met after " +
                      std::to_string(kMaxResamples) + " draws");
}

ProductRepMap::ProductRepMap(std::vector<MlpRepMap> players)
    : players_(std::move(players)) {}

std::vector<std::size_t> ProductRepMap::input_dims() const {
  std::vector<std::size_t> d;
  for (const auto& p : players_) d.push_back(p.input_dim());
  return d;
}

std::vector<std::size_t> ProductRepMap::output_dims() const {
  std::vector<std::size_t> d;
  for (const auto& p : players_) d.push_back(p.output_dim());
  return d;
}

Profile ProductRepMap::eval(const Profile& x) const {
  if (x.size() != players_.size()) throw ShapeMismatch("ProductRepMap: player count");
  Profile z(players_.size());
  for (std::size_t i = 0; i < players_.size(); ++i) z[i] = map_eval(players_[i], x[i]);
  return z;
}

std::vector<DenseMatrix> ProductRepMap::jacobians(const Profile& x) const {
  if (x.size() != players_.size()) throw ShapeMismatch("ProductRepMap: player count");
  std::vector<DenseMatrix> j;
  j.reserve(players_.size());
  for (std::size_t i = 0; i < players_.size(); ++i)
    j.push_back(map_jacobian(players_[i], x[i]));
  return j;
}

ProductRepMap sample_product_map(const ArchSpec& spec, std::size_t n_players,
                                 std::uint64_t seed) {
  std::vector<MlpRepMap> players;
  players.reserve(n_players);
  for (std::size_t i = 0; i < n_players; ++i) {
    // Mix the player index into the seed so each player gets its own stream.
    const std::uint64_t player_seed = make_rng(seed, {i, 0x706c6179})();
    players.push_back(sample_map(spec, player_seed));
  }
  return ProductRepMap(std::move(players));
}

SvBounds sv_bounds_at(const ProductRepMap& maps, const Profile& x) {
  SvBounds b{std::numeric_limits<double>::infinity(), 0.0,
             std::numeric_limits<double>::infinity()};
  const auto jac = maps.jacobians(x);
  for (const DenseMatrix& j : jac) {
    const SvdFactors f = svd(j);
    b.sigma_max = std::max(b.sigma_max, f.sigma.front());
    // eig(J J^T) has rows() entries; the ones beyond min(rows, cols) are zero.
    const double smallest = j.rows() > j.cols() ? 0.0 : f.sigma.back();
    b.sigma_min = std::min(b.sigma_min, smallest);
    const double cut = rank_cutoff(f.sigma, j.rows(), j.cols(), kDefaultRankTol);
    for (double s : f.sigma)
      if (s > cut) b.sigma_min_range = std::min(b.sigma_min_range, s);
  }
  return b;
}

SvBounds sv_bounds(const ProductRepMap& maps, std::span<const Profile> probes) {
  if (probes.empty()) throw ValidationError("sv_bounds: empty probe set");
  SvBounds b{std::numeric_limits<double>::infinity(), 0.0,
             std::numeric_limits<double>::infinity()};
  for (const Profile& x : probes) {
    const SvBounds p = sv_bounds_at(maps, x);
    b.sigma_min = std::min(b.sigma_min, p.sigma_min);
    b.sigma_max = std::max(b.sigma_max, p.sigma_max);
    b.sigma_min_range = std::min(b.sigma_min_range, p.sigma_min_range);
  }
  return b;
}

nlohmann::json map_to_json(const MlpRepMap& m, MapKind spec, std::uint64_t seed) {
  return nlohmann::json{{"spec", std::string(to_string(spec))},
                        {"seed", seed},
                        {"w1", matrix_to_json(m.w1())},
                        {"w2", matrix_to_json(m.w2())},
                        {"hidden_act", std::string(to_string(m.hidden_act()))},
                        {"head", std::string(to_string(m.head()))}};
}

MlpRepMap map_from_json(const nlohmann::json& j) try {
  if (!j.is_object() || !j.contains("w1") || !j.contains("w2")) {
    throw ParseError("map json: expected an object with 'w1' and 'w2'");
  }
  ArchSpec arch = arch_for(map_kind_from_string(j.value("spec", std::string("Custom"))));
  Activation hidden = arch.hidden_act;
  Activation head = arch.head;
  if (j.contains("hidden_act")) hidden = activation_from_string(j["hidden_act"].get<std::string>());
  if (j.contains("head")) head = activation_from_string(j["head"].get<std::string>());
  return MlpRepMap(json_to_matrix(j["w1"], "w1"), json_to_matrix(j["w2"], "w2"), hidden, head);
} catch (const nlohmann::json::exception& e) {
  throw ParseError(std::string("map json: ") + e.what());
}

nlohmann::json product_map_to_json(const ProductRepMap& m, MapKind spec,
                                   std::uint64_t seed) {
  nlohmann::json players = nlohmann::json::array();
  for (const auto& p : m.players()) players.push_back(map_to_json(p, spec, seed));
  return nlohmann::json{{"spec", std::string(to_string(spec))},
                        {"seed", seed},
                        {"players", players}};
}

ProductRepMap product_map_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("players") || !j["players"].is_array()) {
    throw ParseError("map json: expected an object with a 'players' array");
  }
  std::vector<MlpRepMap> players;
  for (const auto& p : j["players"]) players.push_back(map_from_json(p));
  return ProductRepMap(std::move(players));
}

}  // namespace hgd
