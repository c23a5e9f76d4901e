#pragma once

#include "gcr/grassmann.hpp"

namespace gcr {

// gamma * x / ||x||.
inline Vector normalize_feature(const Vector& x, double gamma) {
  const double norm = x.norm();
  if (norm <= 1e-12)
    throw DegenerateFeature("normalize_feature: zero-norm feature");
  return (gamma / norm) * x;
}

// Grassmann fully-connected head: logit i is the norm of the projection of
// the (optionally length-normalized) feature onto class subspace S_i,
// l_i = ||S_i^T x||. No bias.
struct GcrHead {
  ProductGrassmannParam param;
  double gamma = 25.0;
  bool normalize = true;

  Eigen::Index feature_dim() const { return param.n; }
  Eigen::Index num_classes() const { return param.num_classes(); }

  Vector preprocess(const Vector& x) const {
    return normalize ? normalize_feature(x, gamma) : x;
  }

  Vector forward(const Vector& x) const {
    if (x.size() != param.n) throw DimensionError("gcr_forward: feature dim");
    const Vector xt = preprocess(x);
    Vector logits(num_classes());
    for (Eigen::Index i = 0; i < num_classes(); ++i)
      logits(i) = (param.block(i).transpose() * xt).norm();
    return logits;
  }

  struct Grads {
    Matrix d_param;  // n x total_cols, Euclidean derivative w.r.t. S
    Vector d_x;
  };

  // Euclidean derivatives of sum_i dlogits_i * l_i:
  //   dl/dS_i = (1/l_i) x x^T S_i,   dl/dx = (1/l_i) S_i S_i^T x,
  // chained through the normalization Jacobian gamma (I - xh xh^T)/||x||.
  // A block with l_i below 1e-12 contributes zero (subgradient at the origin).
  Grads backward(const Vector& x, const Vector& dlogits) const {
    if (x.size() != param.n) throw DimensionError("gcr_backward: feature dim");
    if (dlogits.size() != num_classes())
      throw DimensionError("gcr_backward: logit dim");
    const Vector xt = preprocess(x);
    Grads g;
    g.d_param = Matrix::Zero(param.n, param.total_cols());
    Vector d_xt = Vector::Zero(param.n);
    for (Eigen::Index i = 0; i < num_classes(); ++i) {
      const Vector coord = param.block(i).transpose() * xt;  // S_i^T x
      const double l = coord.norm();
      if (l < 1e-12) continue;
      const double w = dlogits(i) / l;
      g.d_param.middleCols(param.block_offset(i), param.dims[i]) =
          w * xt * coord.transpose();
      d_xt += w * (param.block(i) * coord);
    }
    if (normalize) {
      const double norm = x.norm();
      const Vector xh = x / norm;
      g.d_x = (gamma / norm) * (d_xt - xh * xh.dot(d_xt));
    } else {
      g.d_x = d_xt;
    }
    return g;
  }
};

// Plain affine head, logits = W^T x + b.
struct LinearHead {
  Matrix weight;  // n x C
  Vector bias;    // C

  Eigen::Index feature_dim() const { return weight.rows(); }
  Eigen::Index num_classes() const { return weight.cols(); }

  static LinearHead random(Eigen::Index n, Eigen::Index num_classes,
                           std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    LinearHead h;
    h.weight.resize(n, num_classes);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < num_classes; ++j)
        h.weight(i, j) = gauss(gen) / std::sqrt(double(n));
    h.bias = Vector::Zero(num_classes);
    return h;
  }

  Vector forward(const Vector& x) const {
    if (x.size() != feature_dim()) throw DimensionError("linear_forward: dim");
    return weight.transpose() * x + bias;
  }

  struct Grads {
    Matrix d_weight;
    Vector d_bias;
    Vector d_x;
  };

  Grads backward(const Vector& x, const Vector& dlogits) const {
    Grads g;
    g.d_weight = x * dlogits.transpose();
    g.d_bias = dlogits;
    g.d_x = weight * dlogits;
    return g;
  }
};

// Cosine-similarity head with unit-norm class columns, logits =
// scale * W^T (x/||x||). Columns are renormalized after optimizer updates.
struct CosineHead {
  Matrix weight;  // n x C, unit-norm columns
  double scale = 25.0;

  Eigen::Index feature_dim() const { return weight.rows(); }
  Eigen::Index num_classes() const { return weight.cols(); }

  static CosineHead random(Eigen::Index n, Eigen::Index num_classes,
                           std::uint64_t seed, double scale = 25.0) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    CosineHead h;
    h.scale = scale;
    h.weight.resize(n, num_classes);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < num_classes; ++j) h.weight(i, j) = gauss(gen);
    h.renormalize();
    return h;
  }

  void renormalize() {
    for (Eigen::Index j = 0; j < weight.cols(); ++j) {
      const double norm = weight.col(j).norm();
      if (norm <= 1e-12)
        throw DegenerateFeature("cosine head: zero-norm class column");
      weight.col(j) /= norm;
    }
  }

  Vector forward(const Vector& x) const {
    if (x.size() != feature_dim()) throw DimensionError("cosine_forward: dim");
    const double norm = x.norm();
    if (norm <= 1e-12)
      throw DegenerateFeature("cosine_forward: zero-norm feature");
    return (scale / norm) * (weight.transpose() * x);
  }

  struct Grads {
    Matrix d_weight;
    Vector d_x;
  };

  Grads backward(const Vector& x, const Vector& dlogits) const {
    const double norm = x.norm();
    if (norm <= 1e-12)
      throw DegenerateFeature("cosine_backward: zero-norm feature");
    const Vector xh = x / norm;
    Grads g;
    g.d_weight = scale * xh * dlogits.transpose();
    const Vector wd = weight * dlogits;
    g.d_x = (scale / norm) * (wd - xh * xh.dot(wd));
    return g;
  }
};

}  // namespace gcr
