#pragma once

#include <random>
#include <vector>

#include "gcr/linalg.hpp"

namespace gcr {

// Small dense rectifier network producing the feature vector consumed by a
// classifier head. Layer l maps a_l = relu(W_l a_{l-1} + b_l); the last layer
// has no nonlinearity.
struct MlpBackbone {
  struct Layer {
    Matrix weight;  // out x in
    Vector bias;    // out
  };
  std::vector<Layer> layers;

  Eigen::Index input_dim() const { return layers.front().weight.cols(); }
  Eigen::Index output_dim() const { return layers.back().weight.rows(); }

  // sizes = {in, hidden..., out}; He-style scaled Gaussian init.
  static MlpBackbone random(const std::vector<Eigen::Index>& sizes,
                            std::uint64_t seed) {
    if (sizes.size() < 2) throw DimensionError("MlpBackbone: need >= 2 sizes");
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    MlpBackbone net;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      Layer layer;
      layer.weight.resize(sizes[l + 1], sizes[l]);
      const double s = std::sqrt(2.0 / double(sizes[l]));
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
        for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
          layer.weight(i, j) = s * gauss(gen);
      layer.bias = Vector::Zero(sizes[l + 1]);
      net.layers.push_back(std::move(layer));
    }
    return net;
  }

  struct Cache {
    std::vector<Vector> pre;   // pre-activation per layer
    std::vector<Vector> post;  // post-activation, post[0] is the input
  };

  Vector forward(const Vector& x, Cache* cache = nullptr) const {
    Vector a = x;
    if (cache) cache->post.push_back(a);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Vector z = layers[l].weight * a + layers[l].bias;
      if (cache) cache->pre.push_back(z);
      a = (l + 1 < layers.size()) ? Vector(z.cwiseMax(0.0)) : z;
      if (cache) cache->post.push_back(a);
    }
    return a;
  }

  struct Grads {
    std::vector<Matrix> d_weight;
    std::vector<Vector> d_bias;
    Vector d_input;

    void add(const Grads& o) {
      for (std::size_t l = 0; l < d_weight.size(); ++l) {
        d_weight[l] += o.d_weight[l];
        d_bias[l] += o.d_bias[l];
      }
      d_input += o.d_input;
    }
    void scale(double c) {
      for (std::size_t l = 0; l < d_weight.size(); ++l) {
        d_weight[l] *= c;
        d_bias[l] *= c;
      }
      d_input *= c;
    }
  };

  Grads zero_grads() const {
    Grads g;
    for (const Layer& l : layers) {
      g.d_weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
      g.d_bias.push_back(Vector::Zero(l.bias.size()));
    }
    g.d_input = Vector::Zero(input_dim());
    return g;
  }

  Grads backward(const Cache& cache, const Vector& d_output) const {
    Grads g;
    g.d_weight.resize(layers.size());
    g.d_bias.resize(layers.size());
    Vector delta = d_output;
    for (std::size_t l = layers.size(); l-- > 0;) {
      if (l + 1 < layers.size())
        delta = delta.cwiseProduct(
            (cache.pre[l].array() > 0.0).cast<double>().matrix());
      g.d_weight[l] = delta * cache.post[l].transpose();
      g.d_bias[l] = delta;
      delta = layers[l].weight.transpose() * delta;
    }
    g.d_input = delta;
    return g;
  }
};

}  // namespace gcr
