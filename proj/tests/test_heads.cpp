#include <doctest.h>

#include <functional>
#include <random>

#include "gcr/heads.hpp"

using gcr::CosineHead;
using gcr::GcrHead;
using gcr::LinearHead;
using gcr::Matrix;
using gcr::ProductGrassmannParam;
using gcr::Vector;

namespace {

Vector random_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = gauss(gen);
  return v;
}

GcrHead random_gcr_head(Eigen::Index n, Eigen::Index c, Eigen::Index k,
                        std::uint64_t seed, double gamma = 25.0,
                        bool normalize = true) {
  return GcrHead{ProductGrassmannParam::random_uniform_k(n, c, k, seed), gamma,
                 normalize};
}

// Central finite differences of sum_i dlogits_i * logits_i.
double fd_scalar(const std::function<double()>& eval, double& slot,
                 double step = 1e-5) {
  const double orig = slot;
  slot = orig + step;
  const double hi = eval();
  slot = orig - step;
  const double lo = eval();
  slot = orig;
  return (hi - lo) / (2.0 * step);
}

}  // namespace

TEST_CASE("normalize_feature") {
  Vector x(3);
  x << 3, 4, 0;
  const Vector y = gcr::normalize_feature(x, 25.0);
  CHECK(y(0) == doctest::Approx(15.0));
  CHECK(y(1) == doctest::Approx(20.0));
  CHECK(y(2) == doctest::Approx(0.0));

  // already at length gamma: unchanged
  const Vector z = gcr::normalize_feature(y, 25.0);
  CHECK(gcr::max_abs(Matrix(z - y)) < 1e-12);

  CHECK_THROWS_AS(gcr::normalize_feature(Vector::Zero(3), 25.0),
                  gcr::DegenerateFeature);

  for (int trial = 0; trial < 20; ++trial) {
    const Vector v = random_vector(6, 100 + trial);
    CHECK(gcr::normalize_feature(v, 25.0).norm() ==
          doctest::Approx(25.0).epsilon(1e-12));
  }
}

TEST_CASE("gcr_forward: feature inside the class subspace") {
  ProductGrassmannParam p;
  p.n = 3;
  p.dims = {2};
  p.blocks = Matrix::Identity(3, 3).leftCols(2);
  GcrHead head{p, 5.0, true};
  Vector x(3);
  x << 3, 4, 0;
  const Vector logits = head.forward(x);
  CHECK(logits(0) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("gcr_forward: orthogonal feature gives zero logits") {
  ProductGrassmannParam p;
  p.n = 4;
  p.dims = {1, 1};
  p.blocks = Matrix::Identity(4, 4).leftCols(2);
  GcrHead head{p, 1.0, true};
  Vector x = Vector::Zero(4);
  x(3) = 2.0;
  CHECK(head.forward(x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gcr_forward: hand-computed two-class projection") {
  ProductGrassmannParam p;
  p.n = 3;
  p.dims = {1, 1};
  p.blocks.resize(3, 2);
  p.blocks.col(0) << 1, 0, 0;
  p.blocks.col(1) << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0;
  GcrHead head{p, 1.0, true};
  Vector x(3);
  x << 1, 0, 0;
  const Vector logits = head.forward(x);
  CHECK(logits(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(logits(1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("gcr_backward: zero dlogits gives zero gradients") {
  auto head = random_gcr_head(6, 2, 2, 7);
  const Vector x = random_vector(6, 8);
  const auto g = head.backward(x, Vector::Zero(2));
  CHECK(gcr::max_abs(g.d_param) == 0.0);
  CHECK(g.d_x.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gcr_backward matches finite differences") {
  for (int trial = 0; trial < 10; ++trial) {
    std::mt19937_64 gen(900 + trial);
    const Eigen::Index n = 4 + Eigen::Index(gen() % 13);   // <= 16
    const Eigen::Index c = 2 + Eigen::Index(gen() % 4);    // <= 5
    const Eigen::Index k = 1 + Eigen::Index(gen() % std::min<Eigen::Index>(n, 4));
    auto head = random_gcr_head(n, c, k, 1000 + trial, 25.0, true);
    Vector x = random_vector(n, 2000 + trial);
    const Vector dlogits = random_vector(c, 3000 + trial);
    auto value = [&] { return head.forward(x).dot(dlogits); };
    const auto grads = head.backward(x, dlogits);
    // skip coordinates where any logit is nearly singular
    if (head.forward(x).minCoeff() < 1e-6) continue;
    for (Eigen::Index i = 0; i < head.param.n; ++i)
      for (Eigen::Index j = 0; j < head.param.total_cols(); ++j) {
        const double fd = fd_scalar(value, head.param.blocks(i, j));
        const double an = grads.d_param(i, j);
        REQUIRE(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(fd)));
      }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double fd = fd_scalar(value, x(i));
      REQUIRE(std::abs(fd - grads.d_x(i)) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("linear head identity case and gradients") {
  LinearHead head;
  head.weight = Matrix::Identity(4, 4);
  head.bias = Vector::Zero(4);
  const Vector x = random_vector(4, 11);
  CHECK(gcr::max_abs(Matrix(head.forward(x) - x)) < 1e-15);

  const Vector dlogits = random_vector(4, 12);
  auto value = [&] { return head.forward(x).dot(dlogits); };
  Vector xcopy = x;
  auto value2 = [&] { return head.forward(xcopy).dot(dlogits); };
  const auto g = head.backward(x, dlogits);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double fd = fd_scalar(value, head.weight(i, j));
      REQUIRE(std::abs(fd - g.d_weight(i, j)) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double fd = fd_scalar(value2, xcopy(i));
    REQUIRE(std::abs(fd - g.d_x(i)) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("cosine head: parallel feature saturates at the scale") {
  auto head = CosineHead::random(5, 3, 13);
  const Vector x = 3.7 * head.weight.col(1);
  CHECK(head.forward(x)(1) == doctest::Approx(head.scale).epsilon(1e-10));
  CHECK_THROWS_AS(head.forward(Vector::Zero(5)), gcr::DegenerateFeature);
}

TEST_CASE("cosine head gradients match finite differences") {
  auto head = CosineHead::random(6, 3, 14);
  Vector x = random_vector(6, 15);
  const Vector dlogits = random_vector(3, 16);
  auto value = [&] { return head.forward(x).dot(dlogits); };
  const auto g = head.backward(x, dlogits);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double fd = fd_scalar(value, head.weight(i, j));
      REQUIRE(std::abs(fd - g.d_weight(i, j)) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  for (Eigen::Index i = 0; i < 6; ++i) {
    const double fd = fd_scalar(value, x(i));
    REQUIRE(std::abs(fd - g.d_x(i)) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("gcr logits are scale invariant when normalization is on") {
  auto head = random_gcr_head(8, 3, 2, 17);
  const Vector x = random_vector(8, 18);
  const Vector a = head.forward(x);
  const Vector b = head.forward(Vector(7.3 * x));
  CHECK(gcr::max_abs(Matrix(a - b)) < 1e-12);
}

TEST_CASE("gcr logits are gauge invariant") {
  auto head = random_gcr_head(8, 3, 2, 19);
  const Vector x = random_vector(8, 20);
  const Vector before = head.forward(x);
  const Matrix q = gcr::random_subspace(2, 2, 21).basis;  // orthogonal 2x2
  head.param.block(1) = Matrix(head.param.block(1)) * q;
  CHECK(gcr::max_abs(Matrix(head.forward(x) - before)) < 1e-12);
}

TEST_CASE("gcr logits are bounded by gamma under normalization") {
  auto head = random_gcr_head(10, 4, 3, 22);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector logits = head.forward(random_vector(10, 400 + trial));
    CHECK(logits.minCoeff() >= 0.0);
    CHECK(logits.maxCoeff() <= head.gamma * (1.0 + 1e-12));
  }
}

TEST_CASE("k = 1 gcr equals gamma |cosine similarity|") {
  const Eigen::Index n = 7, c = 4;
  auto head = random_gcr_head(n, c, 1, 23, 25.0, true);
  CosineHead cos_head;
  cos_head.scale = 25.0;
  cos_head.weight = head.param.blocks;  // unit columns already
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = random_vector(n, 500 + trial);
    const Vector g = head.forward(x);
    const Vector cc = cos_head.forward(x);
    for (Eigen::Index i = 0; i < c; ++i)
      REQUIRE(std::abs(g(i) - std::abs(cc(i))) < 1e-10);
  }
}
