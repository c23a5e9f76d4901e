#include <doctest.h>

#include <random>

#include "gcr/grassmann.hpp"

using gcr::Matrix;
using gcr::ProductGrassmannParam;
using gcr::RsgdState;
using gcr::SubspaceBasis;
using gcr::Vector;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols,
                     std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = gauss(gen);
  return m;
}

}  // namespace

TEST_CASE("random_subspace square case is a full orthogonal basis") {
  const auto s = gcr::random_subspace(4, 4, 3);
  CHECK(gcr::orthonormality_defect(s.basis) < 1e-12);
  CHECK(std::abs(std::abs(s.basis.determinant()) - 1.0) < 1e-12);
}

TEST_CASE("random_subspace is orthonormal at large n") {
  const auto s = gcr::random_subspace(2048, 8, 17);
  CHECK(gcr::orthonormality_defect(s.basis) < 1e-12);
}

TEST_CASE("random_subspace is deterministic per seed") {
  const auto a = gcr::random_subspace(16, 4, 5);
  const auto b = gcr::random_subspace(16, 4, 5);
  CHECK((a.basis.array() == b.basis.array()).all());
  const auto c = gcr::random_subspace(16, 4, 6);
  CHECK(gcr::max_abs(Matrix(a.basis - c.basis)) > 0.0);
}

TEST_CASE("random_subspace rejects k > n") {
  CHECK_THROWS_AS(gcr::random_subspace(2, 3, 0), gcr::DimensionError);
}

TEST_CASE("riemannian_grad projects out in-span directions") {
  const auto s = gcr::random_subspace(6, 2, 1);
  const Matrix a = random_matrix(2, 2, 2);
  CHECK(gcr::max_abs(gcr::riemannian_grad(s, Matrix(s.basis * a))) < 1e-13);
}

TEST_CASE("riemannian_grad fixes tangent inputs") {
  const auto s = gcr::random_subspace(6, 2, 3);
  Matrix d = random_matrix(6, 2, 4);
  d = d - s.basis * (s.basis.transpose() * d);  // make tangent
  CHECK(gcr::max_abs(Matrix(gcr::riemannian_grad(s, d) - d)) < 1e-13);
}

TEST_CASE("riemannian_grad matches the direct (I - S S^T) D oracle") {
  const auto s = gcr::random_subspace(6, 2, 5);
  const Matrix d = random_matrix(6, 2, 6);
  const Matrix oracle =
      (Matrix::Identity(6, 6) - s.basis * s.basis.transpose()) * d;
  CHECK(gcr::max_abs(Matrix(gcr::riemannian_grad(s, d) - oracle)) < 1e-13);
}

TEST_CASE("riemannian_grad tangency over seeded cases") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 2 + Eigen::Index(gen() % 30);
    const Eigen::Index k = 1 + Eigen::Index(gen() % std::min<Eigen::Index>(n, 6));
    const auto s = gcr::random_subspace(n, k, 10 + trial);
    const Matrix d = random_matrix(n, k, 500 + trial);
    const Matrix g = gcr::riemannian_grad(s, d);
    REQUIRE(gcr::max_abs(Matrix(s.basis.transpose() * g)) < 1e-12);
  }
}

TEST_CASE("geodesic_retract returns s for a zero tangent") {
  const auto s = gcr::random_subspace(5, 2, 8);
  const auto r = gcr::geodesic_retract(s, Matrix(Matrix::Zero(5, 2)), 0.3);
  CHECK((r.basis.array() == s.basis.array()).all());
}

TEST_CASE("geodesic_retract rotates a quarter turn on G(1,2)") {
  SubspaceBasis s{(Matrix(2, 1) << 1, 0).finished()};
  const Matrix g = (Matrix(2, 1) << 0, 1).finished();
  const auto r = gcr::geodesic_retract(s, g, std::acos(-1.0) / 2.0);
  CHECK(std::abs(r.basis(0, 0)) < 1e-12);
  CHECK(std::abs(std::abs(r.basis(1, 0)) - 1.0) < 1e-12);
}

TEST_CASE("geodesic_retract rejects non-tangent directions") {
  const auto s = gcr::random_subspace(5, 2, 9);
  CHECK_THROWS_AS(gcr::geodesic_retract(s, Matrix(s.basis), 0.1),
                  gcr::TangencyError);
}

TEST_CASE("both retractions preserve orthonormality over 1000 cases") {
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> step(-1.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index n = 2 + Eigen::Index(gen() % 30);
    const Eigen::Index k = 1 + Eigen::Index(gen() % std::min<Eigen::Index>(n, 6));
    const auto s = gcr::random_subspace(n, k, 2000 + trial);
    const Matrix g = gcr::riemannian_grad(s, random_matrix(n, k, 3000 + trial));
    const double t = step(gen);
    REQUIRE(gcr::orthonormality_defect(gcr::geodesic_retract(s, g, t).basis) <
            1e-10);
    REQUIRE(gcr::orthonormality_defect(gcr::qr_retract(s, g, t).basis) < 1e-10);
  }
}

TEST_CASE("geodesic_retract agrees with s + t g to second order") {
  const auto s = gcr::random_subspace(8, 3, 21);
  const Matrix g = gcr::riemannian_grad(s, random_matrix(8, 3, 22));
  auto defect = [&](double t) {
    return gcr::max_abs(
        Matrix(gcr::geodesic_retract(s, g, t).basis - (s.basis + t * g)));
  };
  const double d3 = defect(1e-3);
  const double d4 = defect(1e-4);
  const double ratio = d3 / d4;  // O(t^2) => ratio about 100
  CHECK(ratio > 80.0);
  CHECK(ratio < 120.0);
}

TEST_CASE("qr_retract at t = 0 is the identity on orthonormal bases") {
  const auto s = gcr::random_subspace(6, 2, 23);
  CHECK(gcr::max_abs(Matrix(
            gcr::qr_retract(s, random_matrix(6, 2, 24), 0.0).basis - s.basis)) <
        1e-12);
}

TEST_CASE("qr_retract normalizes the Euclidean step on G(1,2)") {
  SubspaceBasis s{(Matrix(2, 1) << 1, 0).finished()};
  const Matrix g = (Matrix(2, 1) << 0, 1).finished();
  const auto r = gcr::qr_retract(s, g, 1.0);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(r.basis(0, 0) == doctest::Approx(inv_sqrt2));
  CHECK(r.basis(1, 0) == doctest::Approx(inv_sqrt2));
}

TEST_CASE("transport_momentum") {
  const auto s = gcr::random_subspace(7, 3, 31);
  CHECK(gcr::max_abs(gcr::transport_momentum(s, Matrix(Matrix::Zero(7, 3)))) ==
        0.0);
  Matrix tangent = gcr::riemannian_grad(s, random_matrix(7, 3, 32));
  CHECK(gcr::max_abs(Matrix(gcr::transport_momentum(s, tangent) - tangent)) <
        1e-13);
  const Matrix m = random_matrix(7, 3, 33);
  const Matrix oracle =
      (Matrix::Identity(7, 7) - s.basis * s.basis.transpose()) * m;
  CHECK(gcr::max_abs(Matrix(gcr::transport_momentum(s, m) - oracle)) < 1e-13);
  CHECK(gcr::max_abs(Matrix(s.basis.transpose() *
                            gcr::transport_momentum(s, m))) < 1e-12);
}

TEST_CASE("rsgd_step with zero gradient leaves the parameter unchanged") {
  auto p = ProductGrassmannParam::random_uniform_k(6, 2, 2, 41);
  auto state = RsgdState::make(p, 0.1, 0.9, 5);
  state.step(Matrix(Matrix::Zero(6, 4)));
  CHECK(state.iter == 1);
  CHECK(gcr::max_abs(Matrix(state.param.blocks - p.blocks)) == 0.0);
}

TEST_CASE("rsgd_step with mu = 0 reduces to a single geodesic retraction") {
  auto p = ProductGrassmannParam::random_uniform_k(2, 1, 1, 43);
  const SubspaceBasis s{p.blocks};
  const Matrix d = random_matrix(2, 1, 44);
  auto state = RsgdState::make(p, 0.2, 0.0, 0);
  state.step(d);
  const auto expected = gcr::geodesic_retract(s, gcr::riemannian_grad(s, d), 0.2);
  CHECK(gcr::max_abs(Matrix(state.param.blocks - expected.basis)) < 1e-14);
}

TEST_CASE("rsgd_step attaches the class index to block errors") {
  auto p = ProductGrassmannParam::random_uniform_k(4, 3, 2, 45);
  auto state = RsgdState::make(p, 0.1, 0.0, 0);
  Matrix bad = Matrix::Zero(4, 6);
  bad(0, 4) = std::numeric_limits<double>::quiet_NaN();  // class 2 block
  try {
    state.step(bad);
    FAIL("expected an error");
  } catch (const gcr::Error& e) {
    CHECK(std::string(e.what()).find("class 2") != std::string::npos);
  }
}

TEST_CASE("rsgd with reorth_period 5 stays orthonormal over 10000 steps") {
  auto p = ProductGrassmannParam::random_uniform_k(16, 3, 2, 47);
  auto state = RsgdState::make(p, 0.05, 0.9, 5);
  std::mt19937_64 gen(48);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix d(16, 6);
  for (int step = 0; step < 10000; ++step) {
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      for (Eigen::Index j = 0; j < d.cols(); ++j) d(i, j) = gauss(gen);
    state.step(d);
    if (step % 100 == 0)
      REQUIRE(gcr::orthonormality_error(state.param) <= 1e-6);
  }
  CHECK(gcr::orthonormality_error(state.param) <= 1e-6);
}

TEST_CASE("single-sample projection gradient has rank one") {
  std::mt19937_64 gen(51);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = gcr::random_subspace(10, 4, 600 + trial);
    Vector x(10);
    for (Eigen::Index i = 0; i < 10; ++i) x(i) = gauss(gen);
    const double l = (s.basis.transpose() * x).norm();
    const Matrix d = x * (x.transpose() * s.basis) / l;
    const Matrix g = gcr::riemannian_grad(s, d);
    Eigen::JacobiSVD<Matrix> svd(g);
    REQUIRE(svd.singularValues()(1) <= 1e-10);
  }
}

TEST_CASE("orthonormality_error") {
  auto p = ProductGrassmannParam::random_uniform_k(8, 3, 2, 61);
  CHECK(gcr::orthonormality_error(p) <= 1e-12);

  auto scaled = p;
  scaled.block(1) *= 1.1;
  CHECK(gcr::orthonormality_error(scaled) == doctest::Approx(0.21).epsilon(1e-12));

  // gauge invariance: right-multiply a block by an orthogonal matrix
  auto rotated = p;
  const Matrix q = gcr::random_subspace(2, 2, 62).basis;
  rotated.block(2) = Matrix(rotated.block(2)) * q;
  CHECK(gcr::orthonormality_error(rotated) < 1e-12);
}
