#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "loss01.hpp"
#include "random.hpp"
#include "scd_linear.hpp"

namespace zol {

/// Dual-layer network with sign activations in the hidden and output layers.
/// W is d x k, row-major: W[c * k + j] is the weight of input c into hidden
/// node j.
struct Mlp01Model {
  std::size_t d = 0;
  std::size_t k = 0;
  std::vector<double> W;
  std::vector<double> W0;
  std::vector<double> w;
  double w0 = 0.0;

  std::size_t dim() const { return d; }
  bool operator==(const Mlp01Model&) const = default;
};

inline Mlp01Model init_mlp01(std::size_t d, std::size_t k, std::uint64_t seed) {
  if (d < 1) throw ConfigError("dimension must be >= 1");
  if (k < 1) throw ConfigError("hidden node count must be >= 1 (use scd01 for a linear model)");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mlp01Model m{d, k, std::vector<double>(d * k), std::vector<double>(k), std::vector<double>(k), 0.0};
  for (auto& v : m.W) v = normal(rng);
  for (auto& v : m.W0) v = normal(rng);
  for (auto& v : m.w) v = normal(rng);
  m.w0 = normal(rng);
  return m;
}

namespace detail {

inline void check_dim(const Mlp01Model& m, std::size_t x_size) {
  if (x_size != m.d)
    throw DimensionError("input has " + std::to_string(x_size) + " features, model expects " +
                         std::to_string(m.d));
}

// Hidden pre-activations without the bias: out[j] = sum_c W[c,j] x[c].
inline void hidden_projection(const Mlp01Model& m, std::span<const float> x, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t c = 0; c < m.d; ++c) {
    const double xc = x[c];
    if (xc == 0.0) continue;
    const double* row = m.W.data() + c * m.k;
    for (std::size_t j = 0; j < m.k; ++j) out[j] += row[j] * xc;
  }
}

// Output of the network given hidden activations. Every end-to-end
// evaluation goes through here so cached and fresh paths agree bit for bit.
inline int output_sign(std::span<const double> w, double w0, std::span<const std::int8_t> h) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * h[j];
  return sign01(s + w0);
}

}  // namespace detail

inline std::vector<std::int8_t> hidden_activations(const Mlp01Model& m, std::span<const float> x) {
  detail::check_dim(m, x.size());
  std::vector<double> z(m.k);
  detail::hidden_projection(m, x, z);
  std::vector<std::int8_t> h(m.k);
  for (std::size_t j = 0; j < m.k; ++j) h[j] = static_cast<std::int8_t>(sign01(z[j] + m.W0[j]));
  return h;
}

inline int predict_mlp01(const Mlp01Model& m, std::span<const float> x) {
  auto h = hidden_activations(m, x);
  return detail::output_sign(m.w, m.w0, h);
}

inline int predict(const Mlp01Model& m, std::span<const float> x) { return predict_mlp01(m, x); }

inline double loss01_mlp(const Mlp01Model& m, const BinaryDataset& ds) {
  detail::check_dim(m, ds.dim());
  std::size_t errors = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) errors += predict_mlp01(m, ds.row(i)) != ds.label(i);
  return static_cast<double>(errors) / static_cast<double>(ds.size());
}

namespace detail {

struct HiddenMove {
  std::size_t node = 0;
  std::size_t coord = 0;
  double delta = 0.0;
  double bias = 0.0;
  std::size_t errors = 0;
};

/// Batch-level state of a dual-layer network: pre-activations Z (m x k,
/// without hidden bias) and activations H.
struct BatchState {
  std::size_t m = 0;
  std::size_t k = 0;
  std::vector<double> Z;
  std::vector<std::int8_t> H;
  std::vector<std::int8_t> labels;

  void refresh_activations(const Mlp01Model& model) {
    H.resize(m * k);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j)
        H[i * k + j] = static_cast<std::int8_t>(sign01(Z[i * k + j] + model.W0[j]));
  }
  std::span<const std::int8_t> h(std::size_t i) const { return {H.data() + i * k, k}; }
};

class Mlp01Steps {
 public:
  /// Coordinate step on (w, w0) with the hidden layer frozen; the hidden
  /// activations are the effective inputs.
  std::optional<CoordinateMove> output_step(const Mlp01Model& model, const BatchState& b,
                                            std::size_t features_per_step, double step,
                                            std::size_t cap, Rng& rng) {
    proj_.resize(b.m);
    for (std::size_t i = 0; i < b.m; ++i) {
      double s = 0.0;
      auto h = b.h(i);
      for (std::size_t j = 0; j < b.k; ++j) s += model.w[j] * h[j];
      proj_[i] = s;
    }
    auto coords = sample_without_replacement(rng, b.k, std::min(features_per_step, b.k));
    return search_.run(proj_, b.labels, model.w0, std::move(coords), step, cap, rng,
                       [&](std::size_t j, std::vector<double>& col) {
                         for (std::size_t i = 0; i < b.m; ++i) col[i] = b.H[i * b.k + j];
                       });
  }

  /// Coordinate step on one uniformly chosen hidden node. For each candidate
  /// column perturbation the node's bias is line-searched over the midpoints
  /// of its projections, scored by the end-to-end batch 01 loss.
  template <typename Column>
  std::optional<HiddenMove> hidden_step(const Mlp01Model& model, const BatchState& b,
                                        std::size_t features_per_step, double step, std::size_t cap,
                                        Rng& rng, Column&& column) {
    const std::size_t m = b.m, k = b.k;
    const std::size_t node = uniform_index(rng, k);

    // Output error of each row when this node emits +1 / -1; independent of
    // the node's own weights, so computed once per step.
    cost_pos_.resize(m);
    cost_neg_.resize(m);
    hbuf_.resize(k);
    for (std::size_t i = 0; i < m; ++i) {
      auto h = b.h(i);
      std::copy(h.begin(), h.end(), hbuf_.begin());
      hbuf_[node] = 1;
      cost_pos_[i] = output_sign(model.w, model.w0, hbuf_) != b.labels[i];
      hbuf_[node] = -1;
      cost_neg_[i] = output_sign(model.w, model.w0, hbuf_) != b.labels[i];
    }
    subset_.clear();
    if (m > cap) sample_without_replacement(rng, m, cap, pool_, subset_);

    const double bias = model.W0[node];
    auto evaluate = [&](std::span<const double> p) {
      auto r = scanner_.scan_full(p, cost_pos_, cost_neg_, subset_, bias);
      return std::pair{r.w0, r.errors};
    };

    proj_.resize(m);
    for (std::size_t i = 0; i < m; ++i) proj_[i] = b.Z[i * k + node];
    const auto [base_bias, base_errors] = evaluate(proj_);
    std::size_t best_errors = base_errors;
    hidden_node = node;
    hidden_baseline_bias = base_bias;
    hidden_baseline_errors = base_errors;
    hidden_current_errors = ThresholdScanner::count_errors(proj_, cost_pos_, cost_neg_, bias);

    auto coords = sample_without_replacement(rng, model.d, std::min(features_per_step, model.d));
    std::sort(coords.begin(), coords.end());
    std::optional<HiddenMove> best;
    candidate_.resize(m);
    col_.resize(m);
    for (auto c : coords) {
      column(c, col_);
      for (double delta : {step, -step}) {
        for (std::size_t i = 0; i < m; ++i) candidate_[i] = proj_[i] + delta * col_[i];
        auto [w0, errors] = evaluate(candidate_);
        if (errors < best_errors) {
          best_errors = errors;
          best = HiddenMove{node, c, delta, w0, errors};
        }
      }
    }
    return best;
  }

  const CoordinateSearch& output_search() const { return search_; }

  // From the last hidden_step: the chosen node, its bias re-optimized for
  // the unperturbed column, and end-to-end errors with that bias and with
  // the bias as given.
  std::size_t hidden_node = 0;
  double hidden_baseline_bias = 0.0;
  std::size_t hidden_baseline_errors = 0;
  std::size_t hidden_current_errors = 0;

 private:
  CoordinateSearch search_;
  ThresholdScanner scanner_;
  std::vector<double> proj_, candidate_, col_;
  std::vector<std::uint8_t> cost_pos_, cost_neg_;
  std::vector<std::int8_t> hbuf_;
  std::vector<std::size_t> subset_, pool_;
};

inline BatchState batch_state(const Mlp01Model& m, const BinaryDataset& batch) {
  check_dim(m, batch.dim());
  BatchState b{batch.size(), m.k, std::vector<double>(batch.size() * m.k), {}, batch.labels()};
  for (std::size_t i = 0; i < b.m; ++i)
    hidden_projection(m, batch.row(i), std::span<double>(b.Z.data() + i * m.k, m.k));
  b.refresh_activations(m);
  return b;
}

}  // namespace detail

inline std::pair<Mlp01Model, bool> output_node_step(const Mlp01Model& m, const BinaryDataset& batch,
                                                    const ScdConfig& cfg, Rng& rng) {
  auto b = detail::batch_state(m, batch);
  detail::Mlp01Steps steps;
  auto move = steps.output_step(m, b, cfg.features_per_step, cfg.step_size, cfg.threshold_cap, rng);
  if (!move) return {m, false};
  Mlp01Model out = m;
  out.w[move->coord] += move->delta;
  out.w0 = move->w0;
  return {std::move(out), true};
}

inline std::pair<Mlp01Model, bool> hidden_node_step(const Mlp01Model& m, const BinaryDataset& batch,
                                                    const ScdConfig& cfg, Rng& rng) {
  auto b = detail::batch_state(m, batch);
  detail::Mlp01Steps steps;
  auto move = steps.hidden_step(m, b, cfg.features_per_step, cfg.step_size, cfg.threshold_cap, rng,
                                [&](std::size_t c, std::vector<double>& col) {
                                  for (std::size_t i = 0; i < batch.size(); ++i) col[i] = batch.at(i, c);
                                });
  if (!move) return {m, false};
  Mlp01Model out = m;
  out.W[move->coord * m.k + move->node] += move->delta;
  out.W0[move->node] = move->bias;
  return {std::move(out), true};
}

/// MLP01 training: each iteration draws a batch, then takes one output-node
/// step followed by one hidden-node step. The incumbent is the model with the
/// lowest full-training-set loss seen after any accepted step.
inline TrainedRun<Mlp01Model> train_mlp01(const BinaryDataset& train, const ScdConfig& cfg,
                                          std::size_t hidden) {
  cfg.validate();
  if (hidden < 1) throw ConfigError("hidden node count must be >= 1 (use scd01 for a linear model)");
  const std::size_t n = train.size(), d = train.dim(), k = hidden;

  TrainedRun<Mlp01Model> run;
  run.seed = cfg.seed;
  Mlp01Model current = init_mlp01(d, k, cfg.seed);
  if (train.single_class()) {
    run.degenerate = true;
    std::fill(current.w.begin(), current.w.end(), 0.0);
    current.w0 = train.label(0) == 1 ? 1.0 : -1.0;
    run.model = current;
    run.best_full_loss = loss01_mlp(run.model, train);
    run.incumbent_trace.assign(cfg.iterations, run.best_full_loss);
    return run;
  }

  Rng rng(derive_seed(cfg.seed, "mlp01-steps"));

  // Full-set cache of hidden pre-activations (n x k, no bias).
  detail::BatchState full = detail::batch_state(current, train);
  auto full_errors = [&] {
    std::size_t e = 0;
    for (std::size_t i = 0; i < n; ++i) e += detail::output_sign(current.w, current.w0, full.h(i)) != train.label(i);
    return e;
  };

  // Same as train_scd01: fit the drawn output threshold before searching.
  {
    std::vector<double> out_proj(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto h = full.h(i);
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += current.w[j] * h[j];
      out_proj[i] = s;
    }
    const auto fit = best_threshold(out_proj, train.labels(), cfg.threshold_cap, rng, current.w0);
    const std::size_t drawn = full_errors();
    const double kept = current.w0;
    current.w0 = fit.w0;
    if (full_errors() >= drawn) current.w0 = kept;
  }

  Mlp01Model best = current;
  std::size_t best_errors = full_errors();

  const std::size_t m = detail::batch_size(n, cfg.batch_fraction);
  std::vector<std::size_t> pool, batch;
  detail::BatchState b{m, k, std::vector<double>(m * k), std::vector<std::int8_t>(m * k),
                       std::vector<std::int8_t>(m)};
  detail::Mlp01Steps steps;
  run.incumbent_trace.reserve(cfg.iterations);

  auto track = [&](std::size_t it) {
    const auto errors = full_errors();
    if (errors < best_errors) {
      best_errors = errors;
      best = current;
      run.iteration_of_best = it;
    }
  };

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    sample_without_replacement(rng, n, m, pool, batch);
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(full.Z.begin() + static_cast<std::ptrdiff_t>(batch[i] * k), k,
                  b.Z.begin() + static_cast<std::ptrdiff_t>(i * k));
      std::copy_n(full.H.begin() + static_cast<std::ptrdiff_t>(batch[i] * k), k,
                  b.H.begin() + static_cast<std::ptrdiff_t>(i * k));
      b.labels[i] = static_cast<std::int8_t>(train.label(batch[i]));
    }

    // As in train_scd01, a threshold-only improvement is taken when no
    // perturbation wins.
    if (auto move = steps.output_step(current, b, cfg.features_per_step, cfg.step_size,
                                      cfg.threshold_cap, rng)) {
      current.w[move->coord] += move->delta;
      current.w0 = move->w0;
      track(it);
    } else if (steps.output_search().baseline_errors < steps.output_search().current_errors) {
      current.w0 = steps.output_search().baseline_w0;
      track(it);
    }

    auto move = steps.hidden_step(current, b, cfg.features_per_step, cfg.step_size, cfg.threshold_cap,
                                  rng, [&](std::size_t c, std::vector<double>& col) {
                                    for (std::size_t i = 0; i < m; ++i) col[i] = train.at(batch[i], c);
                                  });
    if (move) {
      const std::size_t j = move->node;
      current.W[move->coord * k + j] += move->delta;
      current.W0[j] = move->bias;
      for (std::size_t i = 0; i < n; ++i) {
        double& z = full.Z[i * k + j];
        z += move->delta * train.at(i, move->coord);
        full.H[i * k + j] = static_cast<std::int8_t>(sign01(z + current.W0[j]));
      }
      track(it);
    } else if (steps.hidden_baseline_errors < steps.hidden_current_errors) {
      const std::size_t j = steps.hidden_node;
      current.W0[j] = steps.hidden_baseline_bias;
      for (std::size_t i = 0; i < n; ++i)
        full.H[i * k + j] = static_cast<std::int8_t>(sign01(full.Z[i * k + j] + current.W0[j]));
      track(it);
    }
    run.incumbent_trace.push_back(static_cast<double>(best_errors) / static_cast<double>(n));
  }

  run.model = std::move(best);
  run.best_full_loss = loss01_mlp(run.model, train);
  return run;
}

}  // namespace zol
