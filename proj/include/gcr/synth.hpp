#pragma once

#include <random>

#include "gcr/train.hpp"

namespace gcr {

// Gaussian-mixture dataset: class c has a random unit mean direction u_c and
// samples 10 * (u_c + spread * g), g standard normal. spread = 0 gives point
// masses; growing spread widens the within-class angular cone.
inline Dataset make_blobs(Eigen::Index num_classes, Eigen::Index dim,
                          Eigen::Index per_class, double spread,
                          std::uint64_t seed) {
  if (num_classes < 1 || dim < 1 || per_class < 1)
    throw InvalidSpec("make_blobs: need classes, dim, per_class >= 1");
  if (spread < 0.0) throw InvalidSpec("make_blobs: spread must be >= 0");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix means(num_classes, dim);
  for (Eigen::Index c = 0; c < num_classes; ++c) {
    Vector u(dim);
    for (Eigen::Index j = 0; j < dim; ++j) u(j) = gauss(gen);
    means.row(c) = u.normalized().transpose();
  }
  Dataset data;
  data.features.resize(num_classes * per_class, dim);
  data.labels.resize(num_classes * per_class);
  Eigen::Index row = 0;
  for (Eigen::Index c = 0; c < num_classes; ++c) {
    for (Eigen::Index s = 0; s < per_class; ++s) {
      Vector g(dim);
      for (Eigen::Index j = 0; j < dim; ++j) g(j) = gauss(gen);
      data.features.row(row) = 10.0 * (means.row(c) + spread * g.transpose());
      data.labels(row) = int(c);
      ++row;
    }
  }
  return data;
}

}  // namespace gcr
