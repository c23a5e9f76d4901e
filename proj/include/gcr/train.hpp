#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <variant>
#include <vector>

#include "gcr/heads.hpp"
#include "gcr/mlp.hpp"

namespace gcr {

enum class HeadKind { Linear = 0, Cosine = 1, Gcr = 2 };

struct Dataset {
  Matrix features;         // N x d
  Eigen::VectorXi labels;  // N, values in [0, C)

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  Eigen::Index num_classes() const {
    return labels.size() == 0 ? 0 : Eigen::Index(labels.maxCoeff()) + 1;
  }
  void validate() const {
    if (features.rows() != labels.size())
      throw InvalidSpec("dataset: feature/label count mismatch");
    if (labels.size() > 0 && labels.minCoeff() < 0)
      throw InvalidSpec("dataset: negative label");
    if (!all_finite(features))
      throw InvalidSpec("dataset: non-finite feature");
  }
};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  double lr = 0.05;            // Euclidean learning rate
  double momentum = 0.9;       // Euclidean momentum
  double weight_decay = 0.0;   // Euclidean parameters only
  double tau = 0.05;           // geometric learning rate
  double mu = 0.9;             // geometric momentum
  int reorth_period = 5;
  double gamma = 25.0;
  int k = 8;
  HeadKind head = HeadKind::Gcr;
  Retraction retraction = Retraction::Geodesic;
  bool normalize = true;
  // Ablation: update the geometric weight with plain SGD, skipping the
  // projection/retraction/orthogonalization pipeline entirely.
  bool vanilla_geometry = false;
  std::uint64_t seed = 0;
  Eigen::Index feature_dim = 64;
  std::vector<Eigen::Index> hidden = {64};

  void validate() const {
    if (epochs < 1 || batch_size < 1) throw InvalidSpec("config: epochs/batch");
    if (!(lr > 0) || !(tau > 0)) throw InvalidSpec("config: rates must be > 0");
    if (!(momentum >= 0 && momentum < 1) || !(mu >= 0 && mu < 1))
      throw InvalidSpec("config: momentum in [0,1)");
    if (!(gamma > 0) || k < 1 || reorth_period < 0)
      throw InvalidSpec("config: gamma/k/reorth_period");
  }
};

struct Model {
  MlpBackbone net;
  HeadKind kind = HeadKind::Gcr;
  std::variant<LinearHead, CosineHead, GcrHead> head;

  Vector logits(const Vector& x, MlpBackbone::Cache* cache = nullptr) const {
    const Vector f = net.forward(x, cache);
    return std::visit([&](const auto& h) { return h.forward(f); }, head);
  }
  Eigen::Index predict(const Vector& x) const {
    Eigen::Index best = 0;
    logits(x).maxCoeff(&best);  // ties resolve to the lowest class index
    return best;
  }
};

struct SoftmaxCe {
  double loss;
  Vector dlogits;  // softmax(p) - onehot(label)
};

inline SoftmaxCe softmax_cross_entropy(const Vector& logits,
                                       Eigen::Index label) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  const double z = e.sum();
  SoftmaxCe out;
  out.loss = std::log(z) - (logits(label) - m);
  out.dlogits = e / z;
  out.dlogits(label) -= 1.0;
  return out;
}

// Mean softmax cross-entropy of a batch plus everything backward needs.
struct ForwardCache {
  double loss = 0.0;
  std::vector<MlpBackbone::Cache> net_caches;
  std::vector<Vector> features;
  std::vector<Vector> dlogits;  // already divided by the batch size
};

template <typename Head>
ForwardCache forward_loss(const MlpBackbone& net, const Head& head,
                          const Matrix& batch_x,
                          const Eigen::VectorXi& batch_y) {
  const Eigen::Index b = batch_x.rows();
  if (b == 0) throw InvalidSpec("forward_loss: empty batch");
  ForwardCache cache;
  for (Eigen::Index i = 0; i < b; ++i) {
    MlpBackbone::Cache nc;
    const Vector f = net.forward(batch_x.row(i).transpose(), &nc);
    const Vector logits = head.forward(f);
    SoftmaxCe ce = softmax_cross_entropy(logits, batch_y(i));
    cache.loss += ce.loss / double(b);
    cache.net_caches.push_back(std::move(nc));
    cache.features.push_back(f);
    cache.dlogits.push_back(ce.dlogits / double(b));
  }
  return cache;
}

// Batch-averaged gradients for the backbone and the head.
template <typename Head>
struct BackwardResult {
  MlpBackbone::Grads net;
  typename Head::Grads head;
};

namespace detail {

inline void zero_like(const LinearHead& h, LinearHead::Grads& g) {
  g.d_weight = Matrix::Zero(h.weight.rows(), h.weight.cols());
  g.d_bias = Vector::Zero(h.bias.size());
}
inline void zero_like(const CosineHead& h, CosineHead::Grads& g) {
  g.d_weight = Matrix::Zero(h.weight.rows(), h.weight.cols());
}
inline void zero_like(const GcrHead& h, GcrHead::Grads& g) {
  g.d_param = Matrix::Zero(h.param.n, h.param.total_cols());
}
inline void accumulate(LinearHead::Grads& g, const LinearHead::Grads& o) {
  g.d_weight += o.d_weight;
  g.d_bias += o.d_bias;
}
inline void accumulate(CosineHead::Grads& g, const CosineHead::Grads& o) {
  g.d_weight += o.d_weight;
}
inline void accumulate(GcrHead::Grads& g, const GcrHead::Grads& o) {
  g.d_param += o.d_param;
}

}  // namespace detail

template <typename Head>
BackwardResult<Head> backward(const MlpBackbone& net, const Head& head,
                              const ForwardCache& cache) {
  BackwardResult<Head> out;
  out.net = net.zero_grads();
  detail::zero_like(head, out.head);
  for (std::size_t i = 0; i < cache.features.size(); ++i) {
    auto hg = head.backward(cache.features[i], cache.dlogits[i]);
    detail::accumulate(out.head, hg);
    out.net.add(net.backward(cache.net_caches[i], hg.d_x));
  }
  return out;
}

struct MetricsRow {
  int epoch;
  long step;
  double loss;
  double top1;
  double ortho_error;  // NaN for non-geometric heads
  double wall_ms;
};

struct EvalResult {
  double top1 = 0.0;
  std::vector<double> per_class;      // NaN where the class is absent
  std::vector<long> class_counts;
};

inline EvalResult evaluate(const Model& model, const Dataset& data) {
  data.validate();
  const Eigen::Index c =
      std::visit([](const auto& h) { return h.num_classes(); }, model.head);
  EvalResult r;
  r.per_class.assign(c, 0.0);
  r.class_counts.assign(c, 0);
  long correct = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Eigen::Index y = data.labels(i);
    if (y >= c) throw InvalidSpec("evaluate: label out of range");
    const bool hit = model.predict(data.features.row(i).transpose()) == y;
    correct += hit;
    r.class_counts[y] += 1;
    r.per_class[y] += hit;
  }
  r.top1 = data.size() == 0 ? 0.0 : double(correct) / double(data.size());
  for (Eigen::Index j = 0; j < c; ++j)
    r.per_class[j] = r.class_counts[j] == 0
                         ? std::numeric_limits<double>::quiet_NaN()
                         : r.per_class[j] / double(r.class_counts[j]);
  return r;
}

struct TrainResult {
  Model model;
  std::vector<MetricsRow> log;
  // Final geometric optimizer state (gcr head without the vanilla ablation).
  RsgdState rsgd;
  bool has_rsgd = false;
};

namespace detail {

// SGD with momentum for Euclidean tensors: v <- m v + g + wd w; w <- w - lr v.
struct SgdSlot {
  Matrix vel;
  void step(Matrix& w, const Matrix& g, double lr, double m, double wd) {
    if (vel.size() == 0) vel = Matrix::Zero(w.rows(), w.cols());
    vel = m * vel + g + wd * w;
    w -= lr * vel;
  }
};

}  // namespace detail

inline TrainResult train(const TrainConfig& config, const Dataset& data) {
  config.validate();
  data.validate();
  const Eigen::Index c = data.num_classes();
  if (c < 2) throw InvalidSpec("train: need at least 2 classes");
  const Eigen::Index n = config.feature_dim;

  std::vector<Eigen::Index> sizes;
  sizes.push_back(data.dim());
  for (Eigen::Index h : config.hidden) sizes.push_back(h);
  sizes.push_back(n);

  TrainResult result;
  result.model.net = MlpBackbone::random(sizes, config.seed);
  result.model.kind = config.head;
  switch (config.head) {
    case HeadKind::Linear:
      result.model.head = LinearHead::random(n, c, config.seed + 1);
      break;
    case HeadKind::Cosine:
      result.model.head = CosineHead::random(n, c, config.seed + 1, config.gamma);
      break;
    case HeadKind::Gcr:
      result.model.head = GcrHead{
          ProductGrassmannParam::random_uniform_k(n, c, config.k, config.seed + 1),
          config.gamma, config.normalize};
      break;
  }

  std::vector<detail::SgdSlot> net_w(result.model.net.layers.size());
  std::vector<detail::SgdSlot> net_b(result.model.net.layers.size());
  detail::SgdSlot head_w, head_b;
  RsgdState rsgd;
  Matrix vanilla_vel;
  if (config.head == HeadKind::Gcr && !config.vanilla_geometry)
    rsgd = RsgdState::make(std::get<GcrHead>(result.model.head).param,
                           config.tau, config.mu, config.reorth_period,
                           config.retraction);

  std::mt19937_64 shuffle_gen(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::Index> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  long global_step = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_gen);
    double epoch_loss = 0.0;
    long batches = 0;
    for (Eigen::Index start = 0; start < data.size();
         start += config.batch_size) {
      const Eigen::Index b =
          std::min<Eigen::Index>(config.batch_size, data.size() - start);
      Matrix bx(b, data.dim());
      Eigen::VectorXi by(b);
      for (Eigen::Index i = 0; i < b; ++i) {
        bx.row(i) = data.features.row(order[start + i]);
        by(i) = data.labels(order[start + i]);
      }
      double loss = 0.0;
      MlpBackbone::Grads net_grads;
      std::visit(
          [&](auto& head) {
            ForwardCache cache = forward_loss(result.model.net, head, bx, by);
            loss = cache.loss;
            auto grads = backward(result.model.net, head, cache);
            net_grads = std::move(grads.net);
            using H = std::decay_t<decltype(head)>;
            if constexpr (std::is_same_v<H, LinearHead>) {
              head_w.step(head.weight, grads.head.d_weight, config.lr,
                          config.momentum, config.weight_decay);
              Matrix bmat = head.bias, gmat = grads.head.d_bias;
              head_b.step(bmat, gmat, config.lr, config.momentum, 0.0);
              head.bias = bmat;
            } else if constexpr (std::is_same_v<H, CosineHead>) {
              head_w.step(head.weight, grads.head.d_weight, config.lr,
                          config.momentum, config.weight_decay);
              head.renormalize();
            } else {
              if (config.vanilla_geometry) {
                if (vanilla_vel.size() == 0)
                  vanilla_vel =
                      Matrix::Zero(head.param.n, head.param.total_cols());
                vanilla_vel = config.mu * vanilla_vel + grads.head.d_param;
                head.param.blocks -= config.tau * vanilla_vel;
              } else {
                // rsgd moves along +M; negate for descent
                rsgd.step(Matrix(-grads.head.d_param));
                head.param = rsgd.param;
              }
            }
          },
          result.model.head);
      for (std::size_t l = 0; l < result.model.net.layers.size(); ++l) {
        net_w[l].step(result.model.net.layers[l].weight, net_grads.d_weight[l],
                      config.lr, config.momentum, config.weight_decay);
        Matrix bmat = result.model.net.layers[l].bias;
        Matrix gmat = net_grads.d_bias[l];
        net_b[l].step(bmat, gmat, config.lr, config.momentum, 0.0);
        result.model.net.layers[l].bias = bmat;
      }
      epoch_loss += loss;
      ++batches;
      ++global_step;
    }
    MetricsRow row;
    row.epoch = epoch;
    row.step = global_step;
    row.loss = epoch_loss / double(batches);
    row.top1 = evaluate(result.model, data).top1;
    row.ortho_error =
        config.head == HeadKind::Gcr
            ? orthonormality_error(std::get<GcrHead>(result.model.head).param)
            : std::numeric_limits<double>::quiet_NaN();
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    result.log.push_back(row);
  }
  if (config.head == HeadKind::Gcr && !config.vanilla_geometry) {
    result.rsgd = std::move(rsgd);
    result.has_rsgd = true;
  }
  return result;
}

// Fig.-style toy problem: maximize ||proj_S x0|| over S in G(1, n) by RSGD.
// The analytic optimum is ||x0||.
struct ToyResult {
  SubspaceBasis s;
  std::vector<double> objective;  // per-iteration value of ||S^T x0||
  int iters_to_tol = -1;          // first iteration within tol of the optimum
};

inline ToyResult run_projection_toy(const Vector& x0, SubspaceBasis start,
                                    int max_iters, double tau, double mu,
                                    Retraction retraction,
                                    double tol = 1e-6) {
  if (start.k() != 1 || start.n() != x0.size())
    throw DimensionError("toy: need a line through the origin in R^n");
  ProductGrassmannParam p;
  p.n = x0.size();
  p.dims = {1};
  p.blocks = start.basis;
  RsgdState state = RsgdState::make(std::move(p), tau, mu, 5, retraction);
  const double target = x0.norm();
  ToyResult out;
  for (int it = 0; it < max_iters; ++it) {
    const Vector s = state.param.blocks.col(0);
    const double l = std::abs(s.dot(x0));
    out.objective.push_back(l);
    if (out.iters_to_tol < 0 && target - l <= tol) {
      out.iters_to_tol = it;
      break;
    }
    if (l < 1e-15) throw Error("toy: started orthogonal to x0");
    // ascent direction: d l / d S = x0 x0^T S / l
    Matrix d = x0 * (x0.transpose() * s) / l;
    state.step(d);
  }
  out.s = SubspaceBasis{state.param.blocks};
  return out;
}

}  // namespace gcr
