#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "convex.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "loss01.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "scd_linear.hpp"

namespace zol {

/// A target model reachable only through its predicted label. Every call to
/// query() is counted; the counter is safe under concurrent queries.
class TargetOracle {
 public:
  using Labeler = std::function<int(std::span<const float>)>;

  explicit TargetOracle(Labeler labeler) : labeler_(std::move(labeler)) {}
  TargetOracle(const TargetOracle&) = delete;
  TargetOracle& operator=(const TargetOracle&) = delete;

  int query(std::span<const float> x) const {
    queries_.fetch_add(1, std::memory_order_relaxed);
    return labeler_(x);
  }
  std::uint64_t query_count() const { return queries_.load(); }

 private:
  Labeler labeler_;
  mutable std::atomic<std::uint64_t> queries_{0};
};

/// Wraps any model with a `predict(model, x)` overload. The model must
/// outlive the oracle.
template <typename Model>
TargetOracle make_oracle(const Model& model) {
  return TargetOracle([&model](std::span<const float> x) { return predict(model, x); });
}

enum class SubstituteKind { mlp, scd01 };

struct AttackConfig {
  double epsilon = 0.0625;  // MNIST 0.2; CIFAR10/STL10/ImageNet 0.0625; GTSRB 0.03125
  std::size_t epochs = 20;
  SubstituteKind substitute = SubstituteKind::mlp;
  std::vector<std::size_t> substitute_hidden{200, 200};
  SgdConfig substitute_sgd{200, 0.9, 0.01, 50, 10, 1e-4, 0};
  ScdConfig substitute_scd{};
  // Attacker pool cap, as a multiple of the initial pool size.
  double max_set_factor = 8.0;
  std::uint64_t seed = 0;
  // Overrides the derived substitute seed (e.g. to share a target's seed).
  std::optional<std::uint64_t> substitute_seed;
  unsigned jobs = 1;

  void validate(std::size_t d) const {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in [0, 1)");
    if (epochs < 1) throw ConfigError("attack epochs must be >= 1");
    if (!(max_set_factor >= 1.0)) throw ConfigError("max_set_factor must be >= 1");
    if (substitute == SubstituteKind::mlp) {
      for (auto h : substitute_hidden)
        if (h < 1) throw ConfigError("substitute hidden widths must be >= 1");
      substitute_sgd.validate();
    } else {
      substitute_scd.validate();
      if (substitute_scd.features_per_step > d)
        throw ConfigError("substitute features_per_step exceeds input dimension");
    }
  }
};

struct AttackEpoch {
  std::size_t epoch = 0;
  double adv_acc = 0.0;
  // Empty at epoch 0, where no substitute exists yet.
  std::optional<double> match_clean;
  std::optional<double> match_adv;
  std::optional<double> sub_train_acc;
  std::uint64_t queries = 0;

  bool operator==(const AttackEpoch&) const = default;
};

struct AttackTrace {
  std::vector<AttackEpoch> rows;
  // Largest |x' - x| over every generated adversary and coordinate, and
  // whether every adversary stayed inside [0,1]^d.
  double max_perturbation = 0.0;
  bool in_unit_box = true;
  std::size_t adversaries_generated = 0;
};

/// x + delta clamped to [0,1], rounded to float so that |x' - x| <= |delta|
/// holds exactly.
inline float perturb_clamped(float x, double delta) {
  const double target = std::clamp(static_cast<double>(x) + delta, 0.0, 1.0);
  float out = static_cast<float>(target);
  if (std::abs(static_cast<double>(out) - static_cast<double>(x)) > std::abs(delta)) out = std::nextafter(out, x);
  return out;
}

/// Untargeted FGSM against a sigmoid substitute: one step of epsilon along the
/// sign of the input gradient of the logistic loss at label y (+1/-1).
inline std::vector<float> fgsm(const SigmoidMlpModel& m, std::span<const float> x, int y, double epsilon) {
  const auto grad = input_gradient(m, x, y == 1 ? 1 : 0);
  std::vector<float> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = perturb_clamped(x[j], epsilon * sign01(grad[j]));
  return out;
}

/// Adversary from a linear classifier: x' = clamp(x - epsilon y sign(w)).
inline std::vector<float> linear_adversary(const LinearModel& m, std::span<const float> x, int y, double epsilon) {
  if (x.size() != m.dim()) throw DimensionError("input and model dimensions differ");
  std::vector<float> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = perturb_clamped(x[j], -epsilon * y * sign01(m.w[j]));
  return out;
}

/// Row-major feature rows without labels.
struct RowSet {
  std::span<const float> data;
  std::size_t d = 0;

  std::size_t size() const { return d == 0 ? 0 : data.size() / d; }
  std::span<const float> row(std::size_t i) const { return data.subspan(i * d, d); }
};

inline RowSet rows_of(const BinaryDataset& ds) { return {ds.features(), ds.dim()}; }

template <typename A, typename B>
double label_match_rate(A&& a, B&& b, RowSet X) {
  if (X.size() == 0) throw EmptyDatasetError("label match rate over an empty row set");
  std::size_t same = 0;
  for (std::size_t i = 0; i < X.size(); ++i) same += a(X.row(i)) == b(X.row(i));
  return static_cast<double>(same) / static_cast<double>(X.size());
}

namespace detail {

inline double mean_equal(std::span<const int> a, std::span<const int> b) {
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

// What the attack loop needs from a substitute: fit on labeled rows, label a
// row, and craft an adversary for a row given the target's label.
struct MlpSubstitute {
  const AttackConfig& cfg;
  SigmoidMlpModel model;

  void fit(const BinaryDataset& s, std::uint64_t seed) {
    SgdConfig sgd = cfg.substitute_sgd;
    sgd.seed = seed;
    model = train_mlp(s, cfg.substitute_hidden, sgd);
  }
  int label(std::span<const float> x) const { return predict_mlp(model, x); }
  std::vector<float> adversary(std::span<const float> x, int y) const { return fgsm(model, x, y, cfg.epsilon); }
};

struct ScdSubstitute {
  const AttackConfig& cfg;
  LinearModel model;

  void fit(const BinaryDataset& s, std::uint64_t seed) {
    ScdConfig scd = cfg.substitute_scd;
    scd.seed = seed;
    model = train_scd01(s, scd).model;
  }
  int label(std::span<const float> x) const { return predict_linear(model, x); }
  std::vector<float> adversary(std::span<const float> x, int y) const {
    return linear_adversary(model, x, y, cfg.epsilon);
  }
};

template <typename Substitute>
AttackTrace substitute_attack(const TargetOracle& target, const BinaryDataset& eval_pool, const AttackConfig& cfg,
                              Substitute sub, const BinaryDataset* seed_pool) {
  const std::size_t n = eval_pool.size(), d = eval_pool.dim();
  cfg.validate(d);
  if (seed_pool && seed_pool->dim() != d) throw DimensionError("seed pool and eval pool dimensions differ");

  AttackTrace trace;
  auto query_all = [&](RowSet X, std::vector<int>& out) {
    out.resize(X.size());
    parallel_for(X.size(), cfg.jobs, [&](std::size_t i) { out[i] = target.query(X.row(i)); });
  };

  std::vector<int> truth(n);
  for (std::size_t i = 0; i < n; ++i) truth[i] = eval_pool.label(i);
  std::vector<int> clean_target;
  query_all(rows_of(eval_pool), clean_target);
  trace.rows.push_back({0, mean_equal(clean_target, truth), {}, {}, {}, target.query_count()});

  // Attacker's labeled pool S_1.
  std::vector<float> pool_x;
  std::vector<std::int8_t> pool_y;
  if (seed_pool) {
    std::vector<int> seed_labels;
    query_all(rows_of(*seed_pool), seed_labels);
    pool_x = seed_pool->features();
    for (int y : seed_labels) pool_y.push_back(static_cast<std::int8_t>(y));
  } else {
    pool_x = eval_pool.features();
    for (int y : clean_target) pool_y.push_back(static_cast<std::int8_t>(y));
  }
  const auto max_set = static_cast<std::size_t>(cfg.max_set_factor * static_cast<double>(pool_y.size()));
  const std::uint64_t sub_seed = cfg.substitute_seed.value_or(derive_seed(cfg.seed, "substitute"));

  std::vector<float> adv(n * d);
  std::vector<int> adv_target, sub_clean(n), sub_adv(n);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const BinaryDataset S(pool_x, pool_y, d);
    sub.fit(S, sub_seed);

    parallel_for(n, cfg.jobs, [&](std::size_t i) {
      auto x = eval_pool.row(i);
      auto xa = sub.adversary(x, clean_target[i]);
      std::copy(xa.begin(), xa.end(), adv.begin() + static_cast<std::ptrdiff_t>(i * d));
      sub_clean[i] = sub.label(x);
      sub_adv[i] = sub.label(xa);
    });
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const float a = adv[i * d + j];
        trace.max_perturbation = std::max(
            trace.max_perturbation, std::abs(static_cast<double>(a) - static_cast<double>(eval_pool.at(i, j))));
        if (!(a >= 0.0f && a <= 1.0f)) trace.in_unit_box = false;
      }
    }
    trace.adversaries_generated += n;

    const RowSet adv_rows{adv, d};
    query_all(adv_rows, adv_target);

    std::size_t sub_correct = 0;
    for (std::size_t i = 0; i < S.size(); ++i) sub_correct += sub.label(S.row(i)) == S.label(i);

    trace.rows.push_back({epoch, mean_equal(adv_target, truth), mean_equal(sub_clean, clean_target),
                          mean_equal(sub_adv, adv_target),
                          static_cast<double>(sub_correct) / static_cast<double>(S.size()), target.query_count()});

    if (epoch == cfg.epochs) break;
    // S_{t+1} = S_t plus the adversaries with their fresh target labels,
    // uniformly subsampled down to max_set when it overflows.
    pool_x.insert(pool_x.end(), adv.begin(), adv.end());
    for (int y : adv_target) pool_y.push_back(static_cast<std::int8_t>(y));
    if (pool_y.size() > max_set) {
      Rng rng(derive_seed(cfg.seed, "augment", epoch));
      auto keep = sample_without_replacement(rng, pool_y.size(), max_set);
      std::sort(keep.begin(), keep.end());
      std::vector<float> kx;
      std::vector<std::int8_t> ky;
      kx.reserve(max_set * d);
      for (auto i : keep) {
        kx.insert(kx.end(), pool_x.begin() + static_cast<std::ptrdiff_t>(i * d),
                  pool_x.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
        ky.push_back(pool_y[i]);
      }
      pool_x = std::move(kx);
      pool_y = std::move(ky);
    }
  }
  return trace;
}

}  // namespace detail

/// Substitute-model black-box attack. Epoch 0 records the target's clean
/// accuracy; each later epoch retrains the substitute from a fresh seeded
/// initialization on the attacker pool, crafts one adversary per eval row
/// (FGSM for a sigmoid substitute, the sign(w) rule for an SCD01 one),
/// measures the target on them, and grows the pool with the adversaries
/// labeled by the target. With `seed_pool` the attacker's initial pool is
/// that set instead of the eval rows.
inline AttackTrace run_substitute_attack(const TargetOracle& target, const BinaryDataset& eval_pool,
                                         const AttackConfig& cfg, const BinaryDataset* seed_pool = nullptr) {
  if (cfg.substitute == SubstituteKind::scd01)
    return detail::substitute_attack(target, eval_pool, cfg, detail::ScdSubstitute{cfg, {}}, seed_pool);
  return detail::substitute_attack(target, eval_pool, cfg, detail::MlpSubstitute{cfg, {}}, seed_pool);
}

/// Same protocol with a single SCD01 run as the substitute.
inline AttackTrace scd01_substitute_attack(const TargetOracle& target, const BinaryDataset& eval_pool,
                                           AttackConfig cfg, const BinaryDataset* seed_pool = nullptr) {
  cfg.substitute = SubstituteKind::scd01;
  return run_substitute_attack(target, eval_pool, cfg, seed_pool);
}

/// Queries the attack makes: one per eval row for the clean pass, one per seed
/// pool row when a separate pool is used, and one per eval row per epoch.
inline std::uint64_t expected_queries(std::size_t eval_rows, std::size_t seed_rows, std::size_t epochs) {
  return eval_rows + seed_rows + epochs * eval_rows;
}

}  // namespace zol
