#include <cmath>
#include <random>

#include "doctest.h"
#include "hgd/error.hpp"
#include "hgd/repmaps.hpp"
#include "hgd/rng.hpp"

using namespace hgd;

namespace {

Vector random_input(std::size_t d, Rng& rng, double range = 2.5) {
  std::uniform_real_distribution<double> u(-range, range);
  Vector x(d);
  for (double& v : x) v = u(rng);
  return x;
}

double celu_oracle(double t) { return t > 0.0 ? t : std::expm1(t); }

}  // namespace

TEST_CASE("activations") {
  CHECK(celu(1.5) == 1.5);
  CHECK(celu(-0.7) == doctest::Approx(celu_oracle(-0.7)).epsilon(1e-15));
  CHECK(celu_derivative(0.0) == 1.0);
  CHECK(celu_derivative(-1.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) <= 1.0);

  const Vector p = activate(Activation::Softmax, Vector{0.0, 0.0, 0.0});
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const Vector big = activate(Activation::Softmax, Vector{1000.0, 0.0, -1000.0});
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(std::isfinite(big[2]));

  const Vector l = activate(Activation::Logit, Vector{0.0, 0.0});
  REQUIRE(l.size() == 3);
  CHECK(activation_output_dim(Activation::Logit, 2) == 3);
  for (double v : l) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("softmax local derivative at the uniform point") {
  const DenseMatrix d = activation_derivative(Activation::Softmax, Vector{0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < 3; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      const double expect = (i == j ? 1.0 / 3.0 : 0.0) - 1.0 / 9.0;
      CHECK(d(i, j) == doctest::Approx(expect).epsilon(1e-15));
      row += d(i, j);
    }
    CHECK(std::abs(row) <= 1e-15);
  }
}

TEST_CASE("zero inputs give the head's center") {
  const MlpRepMap mp = sample_map(arch_for(MapKind::MP), 3);
  CHECK(map_eval(mp, Vector{0.0})[0] == 0.5);
  const MlpRepMap rps = sample_map(arch_for(MapKind::RPS), 3);
  for (double v : map_eval(rps, Vector(5, 0.0))) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const MlpRepMap ef = sample_map(arch_for(MapKind::ElFarol), 3);
  CHECK(map_eval(ef, Vector(5, 0.0))[0] == 0.5);
}

TEST_CASE("scalar MP map is the hand composition") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MlpRepMap m = sample_map(arch_for(MapKind::MP), seed);
    const double a1 = m.w1()(0, 0), a2 = m.w2()(0, 0);
    CHECK(std::abs(a1) <= 1.0);
    CHECK(std::abs(a2) <= 1.0);
    CHECK(std::abs(a1) >= kScalarWeightFloor);
    CHECK(std::abs(a2) >= kScalarWeightFloor);
    for (double x : {1.0, -0.4, 2.0}) {
      const double expect = 1.0 / (1.0 + std::exp(-a2 * celu_oracle(a1 * x)));
      CHECK(map_eval(m, Vector{x})[0] == doctest::Approx(expect).epsilon(1e-14));
    }
  }
}

TEST_CASE("sampled weights respect the architecture ranges") {
  const MlpRepMap ef = sample_map(arch_for(MapKind::ElFarol), 9);
  CHECK(ef.input_dim() == 5);
  CHECK(ef.hidden_dim() == 4);
  CHECK(ef.output_dim() == 1);
  for (double w : ef.w1().entries()) CHECK(std::abs(w) <= 0.85);
  const MlpRepMap rps = sample_map(arch_for(MapKind::RPS), 9);
  CHECK(rps.output_dim() == 3);
  for (double w : rps.w1().entries()) CHECK(std::abs(w) <= 1.0);
  CHECK(sample_map(arch_for(MapKind::RPS), 9) == rps);
  CHECK_FALSE(sample_map(arch_for(MapKind::RPS), 10) == rps);
}

TEST_CASE("identity network Jacobian is the identity on positives") {
  const MlpRepMap id(DenseMatrix::identity(3), DenseMatrix::identity(3), Activation::CeLU,
                     Activation::Identity);
  const DenseMatrix j = map_jacobian(id, Vector{0.5, 1.0, 2.0});
  CHECK(max_abs(sub(j, DenseMatrix::identity(3))) == 0.0);
}

TEST_CASE("finite differences are exact for linear maps") {
  const DenseMatrix w = DenseMatrix::from_rows({{1.0, -2.0}, {0.5, 3.0}, {0.25, 0.0}});
  const MlpRepMap lin(w, DenseMatrix::identity(3), Activation::Identity, Activation::Identity);
  CHECK(max_abs(sub(jacobian_fd(lin, Vector{0.3, -0.2}, 1e-5), w)) <= 1e-9);
  CHECK(max_abs(sub(map_jacobian(lin, Vector{0.3, -0.2}), w)) == 0.0);
}

TEST_CASE("analytic Jacobians match central differences on every suite map") {
  for (MapKind k : {MapKind::MP, MapKind::RPS, MapKind::Shapley, MapKind::ElFarol, MapKind::KLdemo}) {
    CAPTURE(to_string(k));
    const ArchSpec a = arch_for(k);
    Rng rng = make_rng(21, {static_cast<std::uint64_t>(k)});
    for (int t = 0; t < 100; ++t) {
      const MlpRepMap m = sample_map(a, t);
      const Vector x = random_input(m.input_dim(), rng);
      const DenseMatrix j = map_jacobian(m, x);
      CHECK(max_abs(sub(j, jacobian_fd(m, x, 1e-5))) <= 1e-6 * (1.0 + frobenius(j)));
    }
  }
}

TEST_CASE("head codomains") {
  Rng rng = make_rng(22);
  const MlpRepMap rps = sample_map(arch_for(MapKind::RPS), 4);
  const MlpRepMap ef = sample_map(arch_for(MapKind::ElFarol), 4);
  for (int t = 0; t < 100; ++t) {
    const Vector p = map_eval(rps, random_input(5, rng, 10.0));
    double s = 0.0;
    for (double v : p) {
      CHECK(v > 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
    const double e = map_eval(ef, random_input(5, rng))[0];
    CHECK(e > 0.0);
    CHECK(e < 1.0);
  }
}

TEST_CASE("singular-value bounds") {
  const MlpRepMap id(DenseMatrix::identity(2), DenseMatrix::identity(2), Activation::Identity,
                     Activation::Identity);
  const SvBounds b = sv_bounds_at(ProductRepMap({id}), Profile{{0.1, 0.2}});
  CHECK(b.sigma_min == 1.0);
  CHECK(b.sigma_max == 1.0);

  const MlpRepMap twice(DenseMatrix::from_rows({{2.0}}), DenseMatrix::identity(1),
                        Activation::Identity, Activation::Identity);
  const SvBounds t = sv_bounds_at(ProductRepMap({twice}), Profile{{0.7}});
  CHECK(t.sigma_min == 2.0);
  CHECK(t.sigma_max == 2.0);

  const ProductRepMap soft = sample_product_map(arch_for(MapKind::RPS), 2, 5);
  const Profile probe{Vector(5, 0.3), Vector(5, -0.2)};
  const SvBounds s = sv_bounds(soft, std::span<const Profile>(&probe, 1));
  CHECK(s.sigma_min <= 1e-8);
  CHECK(s.sigma_min_range > 1e-8);
  CHECK_THROWS_AS(sv_bounds(soft, std::span<const Profile>{}), ValidationError);
}

TEST_CASE("JSON round trip is exact") {
  const ProductRepMap m = sample_product_map(arch_for(MapKind::ElFarol), 30, 17);
  const nlohmann::json j = product_map_to_json(m, MapKind::ElFarol, 17);
  CHECK(product_map_from_json(nlohmann::json::parse(j.dump())) == m);
  CHECK_THROWS_AS(map_from_json(nlohmann::json{{"w1", 1}}), ParseError);
}

TEST_CASE("product maps are independent per player and deterministic") {
  const ProductRepMap a = sample_product_map(arch_for(MapKind::MP), 2, 8);
  CHECK(a == sample_product_map(arch_for(MapKind::MP), 2, 8));
  CHECK_FALSE(a.player(0) == a.player(1));
  CHECK(a.input_dims() == std::vector<std::size_t>{1, 1});
  CHECK(a.output_dims() == std::vector<std::size_t>{1, 1});
}
