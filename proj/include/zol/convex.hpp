#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "loss01.hpp"
#include "random.hpp"

namespace zol {

// ---------------------------------------------------------------------------
// Linear SVM
// ---------------------------------------------------------------------------

struct SvmConfig {
  std::vector<double> C_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  std::size_t folds = 5;
  std::size_t epochs = 10;
  double eta0 = 0.1;  // step schedule eta_t = eta0 / (1 + lambda * eta0 * t)
  std::uint64_t seed = 0;

  void validate() const {
    if (C_grid.empty()) throw ConfigError("C grid must be nonempty");
    for (double c : C_grid)
      if (!(c > 0.0)) throw ConfigError("C values must be positive");
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (epochs < 1) throw ConfigError("svm epochs must be >= 1");
    if (!(eta0 > 0.0)) throw ConfigError("eta0 must be positive");
  }
};

namespace detail {

// For fixed w the bias only enters the hinge sum, which is convex and
// piecewise linear in b with kinks at y_i - p_i; its slope is -P plus the
// number of kinks left of b. Returns the midpoint of the minimizing
// interval [kink_P, kink_{P+1}]. The subgradient iterate can sit anywhere in
// that interval (for tiny sets the whole interval may be flat), the midpoint
// is the canonical choice. nullopt for a single class.
inline std::optional<double> hinge_bias(std::span<const double> proj, std::span<const std::int8_t> y) {
  std::vector<double> kinks;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < proj.size(); ++i) {
    kinks.push_back(y[i] - proj[i]);
    pos += y[i] == 1;
  }
  if (pos == 0 || pos == proj.size()) return std::nullopt;
  std::sort(kinks.begin(), kinks.end());
  return 0.5 * (kinks[pos - 1] + kinks[pos]);
}

}  // namespace detail

/// Hinge loss + L2 on w (bias unregularized), minimized by per-sample
/// subgradient descent with a 1/t step schedule, then an exact bias for the
/// final w. lambda = 1 / (C n).
inline LinearModel train_svm_fixed_c(const BinaryDataset& train, std::span<const std::size_t> rows,
                                     double C, std::size_t epochs, double eta0, std::uint64_t seed) {
  const std::size_t d = train.dim();
  const double lambda = 1.0 / (C * static_cast<double>(rows.size()));
  // w = scale * v keeps the shrink step O(1).
  std::vector<double> v(d, 0.0);
  double scale = 1.0;
  double b = 0.0;
  std::vector<std::size_t> order(rows.begin(), rows.end());
  Rng rng(seed);
  double t = 0.0;
  for (std::size_t e = 0; e < epochs; ++e) {
    shuffle(rng, order);
    for (auto i : order) {
      const double eta = eta0 / (1.0 + lambda * eta0 * t);
      t += 1.0;
      const auto x = train.row(i);
      const double y = train.label(i);
      const double margin = y * (scale * projection(v, x) + b);
      scale *= 1.0 - eta * lambda;
      if (margin < 1.0) {
        const double g = eta * y / scale;
        for (std::size_t j = 0; j < d; ++j) v[j] += g * x[j];
        b += eta * y;
      }
      if (scale < 1e-9) {
        for (auto& vj : v) vj *= scale;
        scale = 1.0;
      }
    }
  }
  LinearModel m;
  m.w.resize(d);
  for (std::size_t j = 0; j < d; ++j) m.w[j] = scale * v[j];
  m.w0 = b;
  std::vector<double> proj;
  std::vector<std::int8_t> y;
  for (auto i : rows) {
    proj.push_back(projection(m.w, train.row(i)));
    y.push_back(static_cast<std::int8_t>(train.label(i)));
  }
  if (auto exact = detail::hinge_bias(proj, y)) m.w0 = *exact;
  return m;
}

struct SvmSelection {
  double C = 1.0;
  std::vector<double> cv_accuracy;  // aligned with the sorted grid
  std::vector<double> grid;
};

namespace detail {

// Stratified fold assignment: each class is shuffled and dealt round-robin,
// so every fold sees both classes whenever each class has >= folds members.
inline std::vector<std::size_t> stratified_folds(const BinaryDataset& ds, std::size_t folds, Rng& rng) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < ds.size(); ++i) (ds.label(i) == 1 ? pos : neg).push_back(i);
  shuffle(rng, pos);
  shuffle(rng, neg);
  std::vector<std::size_t> fold_of(ds.size());
  std::size_t next = 0;
  for (auto i : pos) fold_of[i] = next++ % folds;
  for (auto i : neg) fold_of[i] = next++ % folds;
  return fold_of;
}

}  // namespace detail

/// k-fold cross-validated choice of C. Ties go to the smaller C.
inline SvmSelection select_svm_c(const BinaryDataset& train, const SvmConfig& cfg) {
  cfg.validate();
  SvmSelection sel;
  sel.grid = cfg.C_grid;
  std::sort(sel.grid.begin(), sel.grid.end());
  const std::size_t pos = train.count_positive();
  const std::size_t smallest_class = std::min(pos, train.size() - pos);
  const std::size_t folds = std::min(cfg.folds, smallest_class);
  if (folds < 2) {
    sel.C = sel.grid.front();
    sel.cv_accuracy.assign(sel.grid.size(), 0.0);
    return sel;
  }
  Rng rng(derive_seed(cfg.seed, "svm-folds"));
  const auto fold_of = detail::stratified_folds(train, folds, rng);
  double best_acc = -1.0;
  for (std::size_t g = 0; g < sel.grid.size(); ++g) {
    std::size_t correct = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<std::size_t> fit_rows, held_rows;
      for (std::size_t i = 0; i < train.size(); ++i) (fold_of[i] == f ? held_rows : fit_rows).push_back(i);
      auto m = train_svm_fixed_c(train, fit_rows, sel.grid[g], cfg.epochs, cfg.eta0,
                                 derive_seed(cfg.seed, "svm-cv", g * folds + f));
      for (auto i : held_rows) correct += predict_linear(m, train.row(i)) == train.label(i);
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(train.size());
    sel.cv_accuracy.push_back(acc);
    if (acc > best_acc) {
      best_acc = acc;
      sel.C = sel.grid[g];
    }
  }
  return sel;
}

inline LinearModel train_svm(const BinaryDataset& train, const SvmConfig& cfg) {
  if (train.single_class()) throw ConfigError("svm training needs both classes present");
  const auto sel = select_svm_c(train, cfg);
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return train_svm_fixed_c(train, all, sel.C, cfg.epochs, cfg.eta0, derive_seed(cfg.seed, "svm-final"));
}

// ---------------------------------------------------------------------------
// Sigmoid MLP with logistic output
// ---------------------------------------------------------------------------

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out

  bool operator==(const DenseLayer& o) const {
    return W.rows() == o.W.rows() && W.cols() == o.W.cols() && W == o.W && b == o.b;
  }
};

/// Sigmoid hidden layers, single logistic output unit. No hidden layers is
/// logistic regression.
struct SigmoidMlpModel {
  std::vector<DenseLayer> layers;

  std::size_t dim() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().W.cols()); }
  bool operator==(const SigmoidMlpModel&) const = default;
};

struct SgdConfig {
  std::size_t batch = 200;
  double momentum = 0.9;
  double learning_rate = 0.01;  // 0.001 for ImageNet-scale inputs
  std::size_t epochs = 100;
  // Optional early stop once the epoch training loss fails to improve by
  // `tolerance` for `patience` consecutive epochs. 0 disables.
  std::size_t patience = 0;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
  }
};

inline double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace detail {

inline void check_mlp(const SigmoidMlpModel& m, std::size_t x_size) {
  if (m.layers.empty()) throw ConfigError("sigmoid MLP has no layers");
  if (x_size != m.dim())
    throw DimensionError("input has " + std::to_string(x_size) + " features, model expects " +
                         std::to_string(m.dim()));
}

template <typename T>
Eigen::VectorXd to_vector(std::span<const T> x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<Eigen::Index>(i)] = x[i];
  return v;
}

inline Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) { return z.unaryExpr([](double v) { return logistic(v); }); }
inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) { return z.unaryExpr([](double v) { return logistic(v); }); }

}  // namespace detail

inline SigmoidMlpModel make_sigmoid_mlp(std::size_t d, std::span<const std::size_t> hidden, std::uint64_t seed) {
  if (d < 1) throw ConfigError("dimension must be >= 1");
  std::vector<std::size_t> widths{d};
  for (auto h : hidden) {
    if (h < 1) throw ConfigError("hidden layer width must be >= 1");
    widths.push_back(h);
  }
  widths.push_back(1);
  Rng rng(seed);
  SigmoidMlpModel m;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(widths[l]);
    const auto out = static_cast<Eigen::Index>(widths[l + 1]);
    // Glorot uniform.
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) layer.W(r, c) = u(rng);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

namespace detail {

template <typename T>
double mlp_logit_impl(const SigmoidMlpModel& m, std::span<const T> x) {
  check_mlp(m, x.size());
  Eigen::VectorXd a = to_vector(x);
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) a = sigmoid(Eigen::VectorXd(m.layers[l].W * a + m.layers[l].b));
  const auto& out = m.layers.back();
  return (out.W * a + out.b)[0];
}

template <typename T>
std::vector<double> input_gradient_impl(const SigmoidMlpModel& m, std::span<const T> x, int y01) {
  check_mlp(m, x.size());
  std::vector<Eigen::VectorXd> acts{to_vector(x)};
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l)
    acts.push_back(sigmoid(Eigen::VectorXd(m.layers[l].W * acts.back() + m.layers[l].b)));
  const auto& out = m.layers.back();
  const double p = logistic((out.W * acts.back() + out.b)[0]);
  Eigen::VectorXd g = out.W.transpose() * (p - static_cast<double>(y01));
  for (std::size_t l = m.layers.size() - 1; l-- > 0;) {
    const auto& a = acts[l + 1];
    Eigen::VectorXd delta = g.cwiseProduct(a.cwiseProduct(Eigen::VectorXd::Ones(a.size()) - a));
    g = m.layers[l].W.transpose() * delta;
  }
  return {g.data(), g.data() + g.size()};
}

// log(1 + e^z) - y z without overflow.
inline double logistic_loss(double z, double y01) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y01 * z; }

}  // namespace detail

/// Pre-activation of the output unit.
inline double mlp_logit(const SigmoidMlpModel& m, std::span<const float> x) { return detail::mlp_logit_impl(m, x); }
inline double mlp_logit(const SigmoidMlpModel& m, std::span<const double> x) { return detail::mlp_logit_impl(m, x); }

inline double mlp_forward(const SigmoidMlpModel& m, std::span<const float> x) { return logistic(mlp_logit(m, x)); }
inline double mlp_forward(const SigmoidMlpModel& m, std::span<const double> x) { return logistic(mlp_logit(m, x)); }

inline int predict_mlp(const SigmoidMlpModel& m, std::span<const float> x) { return sign01(mlp_logit(m, x)); }

/// Gradient of the logistic loss -[y log p + (1-y) log(1-p)] with respect to
/// the input x, y in {0,1}.
inline std::vector<double> input_gradient(const SigmoidMlpModel& m, std::span<const float> x, int y01) {
  return detail::input_gradient_impl(m, x, y01);
}
inline std::vector<double> input_gradient(const SigmoidMlpModel& m, std::span<const double> x, int y01) {
  return detail::input_gradient_impl(m, x, y01);
}

/// Mean logistic loss over the rows of ds.
inline double mlp_loss(const SigmoidMlpModel& m, const BinaryDataset& ds) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    total += detail::logistic_loss(mlp_logit(m, ds.row(i)), ds.label(i) == 1 ? 1.0 : 0.0);
  return total / static_cast<double>(ds.size());
}

namespace detail {

/// Mean logistic loss of a batch (rows of X, targets y in {0,1}) and its
/// gradient with respect to every layer's parameters. `acts` is scratch.
inline double batch_loss_gradient(const SigmoidMlpModel& m, Eigen::MatrixXd X, const Eigen::VectorXd& y,
                                  std::vector<DenseLayer>& grads, std::vector<Eigen::MatrixXd>& acts) {
  const std::size_t L = m.layers.size();
  const auto B = X.rows();
  acts.resize(L);
  grads.resize(L);
  acts[0] = std::move(X);
  for (std::size_t l = 0; l + 1 < L; ++l) {
    Eigen::MatrixXd z = acts[l] * m.layers[l].W.transpose();
    z.rowwise() += m.layers[l].b.transpose();
    acts[l + 1] = sigmoid(z);
  }
  Eigen::VectorXd z_out = acts[L - 1] * m.layers[L - 1].W.row(0).transpose();
  z_out.array() += m.layers[L - 1].b[0];

  double loss = 0.0;
  Eigen::MatrixXd delta(B, 1);  // dLoss/dz of the current layer, rows = batch
  for (Eigen::Index r = 0; r < B; ++r) {
    loss += logistic_loss(z_out[r], y[r]);
    delta(r, 0) = (logistic(z_out[r]) - y[r]) / static_cast<double>(B);
  }
  for (std::size_t l = L; l-- > 0;) {
    grads[l].W = delta.transpose() * acts[l];
    grads[l].b = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd back = delta * m.layers[l].W;
      delta = back.cwiseProduct(acts[l].cwiseProduct((1.0 - acts[l].array()).matrix()));
    }
  }
  return loss / static_cast<double>(B);
}

inline Eigen::MatrixXd batch_matrix(const BinaryDataset& ds, std::span<const std::size_t> rows, Eigen::VectorXd& y) {
  const auto d = static_cast<Eigen::Index>(ds.dim());
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), d);
  y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto x = ds.row(rows[r]);
    for (Eigen::Index c = 0; c < d; ++c) X(static_cast<Eigen::Index>(r), c) = x[static_cast<std::size_t>(c)];
    y[static_cast<Eigen::Index>(r)] = ds.label(rows[r]) == 1 ? 1.0 : 0.0;
  }
  return X;
}

}  // namespace detail

/// Gradient of mlp_loss(m, ds) with respect to all parameters, layer-shaped.
inline std::vector<DenseLayer> mlp_loss_gradient(const SigmoidMlpModel& m, const BinaryDataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Eigen::VectorXd y;
  auto X = detail::batch_matrix(ds, rows, y);
  std::vector<DenseLayer> grads;
  std::vector<Eigen::MatrixXd> acts;
  detail::batch_loss_gradient(m, std::move(X), y, grads, acts);
  return grads;
}

/// Mini-batch SGD with momentum on the mean logistic loss; labels +1 -> 1,
/// -1 -> 0. Rows are reshuffled every epoch from the seeded generator.
inline SigmoidMlpModel train_mlp(const BinaryDataset& train, std::span<const std::size_t> hidden,
                                 const SgdConfig& cfg) {
  cfg.validate();
  SigmoidMlpModel m = make_sigmoid_mlp(train.dim(), hidden, cfg.seed);
  const std::size_t n = train.size();
  const std::size_t L = m.layers.size();

  std::vector<DenseLayer> velocity;
  for (const auto& layer : m.layers)
    velocity.push_back({Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()), Eigen::VectorXd::Zero(layer.b.size())});

  Rng rng(derive_seed(cfg.seed, "mlp-shuffle"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::vector<DenseLayer> grads;
  std::vector<Eigen::MatrixXd> acts;
  Eigen::VectorXd y;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(rng, order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t end = std::min(n, start + cfg.batch);
      std::span<const std::size_t> rows(order.data() + start, end - start);
      auto X = detail::batch_matrix(train, rows, y);
      epoch_loss += detail::batch_loss_gradient(m, std::move(X), y, grads, acts) * static_cast<double>(rows.size());
      for (std::size_t l = 0; l < L; ++l) {
        velocity[l].W = cfg.momentum * velocity[l].W - cfg.learning_rate * grads[l].W;
        velocity[l].b = cfg.momentum * velocity[l].b - cfg.learning_rate * grads[l].b;
        m.layers[l].W += velocity[l].W;
        m.layers[l].b += velocity[l].b;
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (cfg.patience > 0) {
      if (epoch_loss > best_loss - cfg.tolerance) {
        if (++stale >= cfg.patience) break;
      } else {
        stale = 0;
      }
      best_loss = std::min(best_loss, epoch_loss);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Uniform prediction interface used by ensembles and attacks.
// ---------------------------------------------------------------------------

inline int predict(const LinearModel& m, std::span<const float> x) { return predict_linear(m, x); }
inline int predict(const SigmoidMlpModel& m, std::span<const float> x) { return predict_mlp(m, x); }

}  // namespace zol
