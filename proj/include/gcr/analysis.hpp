#pragma once

#include <cmath>
#include <vector>

#include "gcr/grassmann.hpp"

namespace gcr {

inline constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

// Principal angles between span(a) and span(b), ascending, in degrees.
// Computed as arccos of the singular values of a^T b, clamped to [0, 1].
inline Vector principal_angles(const SubspaceBasis& a, const SubspaceBasis& b) {
  if (a.n() != b.n())
    throw DimensionError("principal_angles: ambient dimension mismatch");
  const Matrix cross = a.basis.transpose() * b.basis;
  Eigen::JacobiSVD<Matrix> svd(cross);
  const Eigen::Index m = std::min(a.k(), b.k());
  Vector angles(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double c = std::clamp(svd.singularValues()(i), 0.0, 1.0);
    // singular values descend, so angles come out ascending
    angles(i) = std::acos(c) * kRadToDeg;
  }
  return angles;
}

// Pairwise principal angles across all class blocks. angles[i][j] has
// min(k_i, k_j) entries, ascending, in degrees; the diagonal is all zeros.
struct AngleReport {
  Eigen::Index num_classes = 0;
  std::vector<std::vector<Vector>> angles;  // C x C, symmetric
  Matrix min_angle;                         // C x C
  Matrix max_angle;                         // C x C
};

inline AngleReport angle_report(const ProductGrassmannParam& param) {
  const Eigen::Index c = param.num_classes();
  AngleReport r;
  r.num_classes = c;
  r.angles.assign(c, std::vector<Vector>(c));
  r.min_angle = Matrix::Zero(c, c);
  r.max_angle = Matrix::Zero(c, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    r.angles[i][i] = Vector::Zero(param.dims[i]);
    for (Eigen::Index j = i + 1; j < c; ++j) {
      Vector a = principal_angles(param.subspace(i), param.subspace(j));
      r.min_angle(i, j) = r.min_angle(j, i) = a(0);
      r.max_angle(i, j) = r.max_angle(j, i) = a(a.size() - 1);
      r.angles[j][i] = a;
      r.angles[i][j] = std::move(a);
    }
  }
  return r;
}

struct FeatureBank {
  Matrix features;         // N x n
  Eigen::VectorXi labels;  // N
  bool centered = false;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index num_classes() const {
    return labels.size() == 0 ? 0 : Eigen::Index(labels.maxCoeff()) + 1;
  }

  // Subtract the global feature mean.
  void center() {
    const Vector mean = features.colwise().mean().transpose();
    features.rowwise() -= mean.transpose();
    centered = true;
  }
};

inline double angle_deg(const Vector& a, const Vector& b) {
  const double c =
      std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
  return std::acos(c) * kRadToDeg;
}

// Mean pairwise angle (degrees) between same-class features, averaged over
// classes with equal weight. The per-class mean runs over the full ordered
// pair grid F_i x F_i divided by |F_i|^2, so self-pairs contribute 0 degrees.
// Samples with norm below 1e-12 are dropped; their count goes to *dropped.
inline double intra_class_variability(const FeatureBank& bank,
                                      long* dropped = nullptr) {
  if (!bank.centered)
    throw InvalidSpec("intra_class_variability: bank must be centered");
  const Eigen::Index c = bank.num_classes();
  if (c == 0) throw EmptyClass("intra_class_variability: no samples");
  long ndropped = 0;
  double total = 0.0;
  for (Eigen::Index cls = 0; cls < c; ++cls) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < bank.size(); ++i) {
      if (bank.labels(i) != cls) continue;
      if (bank.features.row(i).norm() < 1e-12) {
        ++ndropped;
        continue;
      }
      idx.push_back(i);
    }
    if (idx.empty())
      throw EmptyClass("intra_class_variability: class " +
                       std::to_string(cls) + " empty");
    double sum = 0.0;
    for (Eigen::Index a : idx)
      for (Eigen::Index b : idx)
        if (a != b)
          sum += angle_deg(bank.features.row(a).transpose(),
                           bank.features.row(b).transpose());
    total += sum / (double(idx.size()) * double(idx.size()));
  }
  if (dropped) *dropped = ndropped;
  return total / double(c);
}

// Class separation: 1 - mean intra-class cosine distance / mean overall
// cosine distance, cosine distance being 1 - cosine similarity. The intra
// mean weights classes equally; the overall mean runs over all sample pairs.
inline double class_separation_r2(const FeatureBank& bank) {
  const Eigen::Index c = bank.num_classes();
  if (c < 2) throw EmptyClass("class_separation_r2: need >= 2 classes");
  std::vector<Vector> unit(bank.size());
  for (Eigen::Index i = 0; i < bank.size(); ++i) {
    const double norm = bank.features.row(i).norm();
    if (norm <= 1e-12)
      throw DegenerateFeature("class_separation_r2: zero-norm feature");
    unit[i] = bank.features.row(i).transpose() / norm;
  }
  double intra = 0.0;
  for (Eigen::Index cls = 0; cls < c; ++cls) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < bank.size(); ++i)
      if (bank.labels(i) == cls) idx.push_back(i);
    if (idx.empty())
      throw EmptyClass("class_separation_r2: class " + std::to_string(cls) +
                       " empty");
    double sum = 0.0;
    for (Eigen::Index a : idx)
      for (Eigen::Index b : idx) sum += 1.0 - unit[a].dot(unit[b]);
    intra += sum / (double(idx.size()) * double(idx.size()));
  }
  intra /= double(c);
  double overall = 0.0;
  for (Eigen::Index a = 0; a < bank.size(); ++a)
    for (Eigen::Index b = 0; b < bank.size(); ++b)
      overall += 1.0 - unit[a].dot(unit[b]);
  overall /= double(bank.size()) * double(bank.size());
  if (overall <= 0.0)
    throw DegenerateFeature("class_separation_r2: zero overall spread");
  return 1.0 - intra / overall;
}

}  // namespace gcr
