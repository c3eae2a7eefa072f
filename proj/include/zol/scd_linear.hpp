#pragma once

#include <algorithm>
#include <cmath>
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

namespace zol {

struct ScdConfig {
  std::size_t iterations = 1000;
  std::size_t features_per_step = 64;  // 64 MNIST, 128 CIFAR10, 256 STL10/ImageNet
  double step_size = 0.17;
  double batch_fraction = 0.25;
  std::size_t threshold_cap = 1000;
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (features_per_step < 1) throw ConfigError("features_per_step must be >= 1");
    if (!(step_size > 0.0)) throw ConfigError("step_size must be > 0");
    if (!(batch_fraction > 0.0 && batch_fraction <= 1.0))
      throw ConfigError("batch_fraction must lie in (0, 1]");
    if (threshold_cap < 2) throw ConfigError("threshold_cap must be >= 2");
  }
};

/// Features-per-step default by input width: 64 up to MNIST size, 128 up to
/// CIFAR10 size, 256 beyond.
inline std::size_t default_features_per_step(std::size_t d) {
  if (d <= 1024) return std::min<std::size_t>(64, d);
  if (d <= 3072) return 128;
  return 256;
}

template <typename Model>
struct TrainedRun {
  Model model;
  double best_full_loss = 1.0;
  std::uint64_t seed = 0;
  std::size_t iteration_of_best = 0;
  bool degenerate = false;
  // Incumbent full-set loss after each iteration.
  std::vector<double> incumbent_trace;
};

inline LinearModel init_linear(std::size_t d, std::uint64_t seed) {
  if (d < 1) throw ConfigError("dimension must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LinearModel m;
  m.w.resize(d);
  for (auto& v : m.w) v = normal(rng);
  m.w0 = normal(rng);
  return m;
}

namespace detail {

struct CoordinateMove {
  std::size_t coord = 0;
  double delta = 0.0;
  double w0 = 0.0;
  std::size_t errors = 0;
};

/// One stochastic coordinate-descent step on a batch. `proj` holds the
/// current w . x for each batch row, `column(j, buf)` fills buf with feature
/// j of every batch row. Each sampled coordinate is moved by +step and -step,
/// the threshold is re-optimized, and the largest strict decrease of batch
/// errors (versus the current w with its own re-optimized threshold) wins.
class CoordinateSearch {
 public:
  template <typename Column>
  std::optional<CoordinateMove> run(std::span<const double> proj, std::span<const std::int8_t> labels,
                                    double current_w0, std::vector<std::size_t> coords, double step,
                                    std::size_t cap, Rng& rng, Column&& column) {
    const std::size_t m = proj.size();
    label_costs(labels, pos_, neg_);
    subset_.clear();
    if (m > cap) sample_without_replacement(rng, m, cap, pool_, subset_);

    auto evaluate = [&](std::span<const double> p) {
      auto r = scanner_.scan_full(p, pos_, neg_, subset_, current_w0);
      return std::pair{r.w0, r.errors};
    };

    const auto [base_w0, baseline] = evaluate(proj);
    baseline_w0 = base_w0;
    current_errors = ThresholdScanner::count_errors(proj, pos_, neg_, current_w0);
    std::optional<CoordinateMove> best;
    std::size_t best_errors = baseline;
    std::sort(coords.begin(), coords.end());
    candidate_.resize(m);
    col_.resize(m);
    for (auto j : coords) {
      column(j, col_);
      for (double delta : {step, -step}) {
        for (std::size_t i = 0; i < m; ++i) candidate_[i] = proj[i] + delta * col_[i];
        auto [w0, errors] = evaluate(candidate_);
        if (errors < best_errors) {
          best_errors = errors;
          best = CoordinateMove{j, delta, w0, errors};
        }
      }
    }
    baseline_errors = baseline;
    return best;
  }

  // From the last run: the current w with its re-optimized threshold, and
  // the errors of the threshold as given, both over the whole batch.
  std::size_t baseline_errors = 0;
  double baseline_w0 = 0.0;
  std::size_t current_errors = 0;

 private:
  ThresholdScanner scanner_;
  std::vector<std::uint8_t> pos_, neg_;
  std::vector<std::size_t> subset_, pool_;
  std::vector<double> candidate_, col_;
};

inline std::size_t batch_size(std::size_t n, double fraction) {
  auto m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(m, 1, n);
}

}  // namespace detail

/// Single coordinate-descent step of a linear 01-loss model on `batch`.
inline std::pair<LinearModel, bool> coordinate_step(const LinearModel& m, const BinaryDataset& batch,
                                                    const ScdConfig& cfg, Rng& rng) {
  if (batch.dim() != m.dim()) throw DimensionError("batch and model dimensions differ");
  if (cfg.features_per_step > m.dim())
    throw ConfigError("features_per_step " + std::to_string(cfg.features_per_step) +
                      " exceeds dimension " + std::to_string(m.dim()));
  std::vector<double> proj(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) proj[i] = projection(m.w, batch.row(i));
  auto coords = sample_without_replacement(rng, m.dim(), cfg.features_per_step);
  detail::CoordinateSearch search;
  auto move = search.run(proj, batch.labels(), m.w0, std::move(coords), cfg.step_size,
                         cfg.threshold_cap, rng, [&](std::size_t j, std::vector<double>& col) {
                           for (std::size_t i = 0; i < batch.size(); ++i) col[i] = batch.at(i, j);
                         });
  if (!move) return {m, false};
  LinearModel out = m;
  out.w[move->coord] += move->delta;
  out.w0 = move->w0;
  return {std::move(out), true};
}

/// SCD01: stochastic coordinate descent on the 01 loss, keeping the model
/// with the lowest full-training-set loss seen.
inline TrainedRun<LinearModel> train_scd01(const BinaryDataset& train, const ScdConfig& cfg) {
  cfg.validate();
  const std::size_t n = train.size();
  const std::size_t d = train.dim();
  if (cfg.features_per_step > d)
    throw ConfigError("features_per_step " + std::to_string(cfg.features_per_step) +
                      " exceeds dimension " + std::to_string(d));

  TrainedRun<LinearModel> run;
  run.seed = cfg.seed;
  if (train.single_class()) {
    // Threshold-only model predicting the single class present.
    run.degenerate = true;
    run.model.w.assign(d, 0.0);
    run.model.w0 = train.label(0) == 1 ? 1.0 : -1.0;
    run.best_full_loss = loss01_linear(run.model, train);
    run.incumbent_trace.assign(cfg.iterations, run.best_full_loss);
    return run;
  }

  LinearModel current = init_linear(d, cfg.seed);
  Rng rng(derive_seed(cfg.seed, "scd01-steps"));

  std::vector<double> full_proj(n);
  for (std::size_t i = 0; i < n; ++i) full_proj[i] = projection(current.w, train.row(i));
  auto full_errors = [&](double w0) {
    std::size_t e = 0;
    for (std::size_t i = 0; i < n; ++i) e += sign01(full_proj[i] + w0) != train.label(i);
    return e;
  };

  // The drawn threshold is only a starting point: replace it by a fitted one
  // when that is strictly better on the full set. A tie keeps the draw, since
  // the tie rule favours constant classifiers.
  {
    const auto fit = best_threshold(full_proj, train.labels(), cfg.threshold_cap, rng, current.w0);
    if (full_errors(fit.w0) < full_errors(current.w0)) current.w0 = fit.w0;
  }

  LinearModel best = current;
  std::size_t best_errors = full_errors(current.w0);

  const std::size_t m = detail::batch_size(n, cfg.batch_fraction);
  std::vector<std::size_t> pool, batch;
  std::vector<double> batch_proj(m);
  std::vector<std::int8_t> batch_labels(m);
  std::vector<std::size_t> coord_pool, coords;
  detail::CoordinateSearch search;
  run.incumbent_trace.reserve(cfg.iterations);

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    sample_without_replacement(rng, n, m, pool, batch);
    for (std::size_t i = 0; i < m; ++i) {
      batch_proj[i] = full_proj[batch[i]];
      batch_labels[i] = static_cast<std::int8_t>(train.label(batch[i]));
    }
    sample_without_replacement(rng, d, cfg.features_per_step, coord_pool, coords);
    auto move = search.run(batch_proj, batch_labels, current.w0, coords, cfg.step_size,
                           cfg.threshold_cap, rng, [&](std::size_t j, std::vector<double>& col) {
                             for (std::size_t i = 0; i < m; ++i) col[i] = train.at(batch[i], j);
                           });
    // No move won, but the threshold alone can be improved on this batch.
    const bool refit = !move && search.baseline_errors < search.current_errors;
    if (move) {
      current.w[move->coord] += move->delta;
      current.w0 = move->w0;
      for (std::size_t i = 0; i < n; ++i) full_proj[i] += move->delta * train.at(i, move->coord);
    } else if (refit) {
      current.w0 = search.baseline_w0;
    }
    if (move || refit) {
      const auto errors = full_errors(current.w0);
      if (errors < best_errors) {
        best_errors = errors;
        best = current;
        run.iteration_of_best = it;
      }
    }
    run.incumbent_trace.push_back(static_cast<double>(best_errors) / static_cast<double>(n));
  }

  run.model = std::move(best);
  run.best_full_loss = loss01_linear(run.model, train);
  return run;
}

}  // namespace zol
