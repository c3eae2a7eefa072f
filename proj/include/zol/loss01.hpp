#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "random.hpp"

namespace zol {

/// sign(0) is -1: points on the boundary are classified negative.
inline int sign01(double z) { return z > 0.0 ? 1 : -1; }

struct LinearModel {
  std::vector<double> w;
  double w0 = 0.0;

  std::size_t dim() const { return w.size(); }
  bool operator==(const LinearModel&) const = default;
};

inline LinearModel negated(LinearModel m) {
  for (auto& v : m.w) v = -v;
  m.w0 = -m.w0;
  return m;
}

/// w . x without the threshold.
inline double projection(std::span<const double> w, std::span<const float> x) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
  return s;
}

inline int predict_linear(const LinearModel& m, std::span<const float> x) {
  if (x.size() != m.dim())
    throw DimensionError("input has " + std::to_string(x.size()) + " features, model expects " +
                         std::to_string(m.dim()));
  return sign01(projection(m.w, x) + m.w0);
}

inline double loss01_linear(const LinearModel& m, const BinaryDataset& ds) {
  if (ds.dim() != m.dim()) throw DimensionError("dataset and model dimensions differ");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    errors += sign01(projection(m.w, ds.row(i)) + m.w0) != ds.label(i);
  return static_cast<double>(errors) / static_cast<double>(ds.size());
}

struct ThresholdSearchResult {
  double w0 = 0.0;
  double loss = 0.0;
};

/// Threshold line search over per-point costs. A point with projection p is
/// predicted +1 iff p + w0 > 0 and then contributes cost_pos, otherwise
/// cost_neg. Candidates: the negated midpoints between consecutive distinct
/// sorted projections, one threshold below the minimum and one above the
/// maximum, plus an optional incumbent. Ties go to the smallest w0.
///
/// Holds scratch buffers; reuse one instance per training run.
class ThresholdScanner {
 public:
  struct Result {
    double w0 = 0.0;
    std::size_t errors = 0;  // over the scanned points
  };

  /// Scans the points named by `subset` (all points when empty).
  Result scan(std::span<const double> proj, std::span<const std::uint8_t> cost_pos,
              std::span<const std::uint8_t> cost_neg, std::span<const std::size_t> subset,
              std::optional<double> incumbent) {
    points_.clear();
    if (subset.empty()) {
      for (std::size_t i = 0; i < proj.size(); ++i) points_.push_back({proj[i], cost_pos[i], cost_neg[i]});
    } else {
      for (auto i : subset) points_.push_back({proj[i], cost_pos[i], cost_neg[i]});
    }
    std::sort(points_.begin(), points_.end(),
              [](const Point& a, const Point& b) { return a.p < b.p; });

    // Start with every point predicted -1 (threshold above the maximum) and
    // sweep the threshold downwards, so w0 = -threshold increases.
    long errors = 0;
    for (const auto& pt : points_) errors += pt.neg;
    Result best{-(points_.back().p + 1.0), static_cast<std::size_t>(errors)};
    std::size_t i = points_.size();
    while (i > 0) {
      const double value = points_[i - 1].p;
      while (i > 0 && points_[i - 1].p == value) {
        errors += static_cast<long>(points_[i - 1].pos) - static_cast<long>(points_[i - 1].neg);
        --i;
      }
      double threshold;
      if (i == 0) {
        threshold = value - 1.0;
        if (threshold >= value) threshold = std::nextafter(value, -std::numeric_limits<double>::infinity());
      } else {
        const double lower = points_[i - 1].p;
        threshold = lower + 0.5 * (value - lower);
        if (threshold >= value) threshold = lower;
      }
      if (static_cast<std::size_t>(errors) < best.errors) best = {-threshold, static_cast<std::size_t>(errors)};
    }

    if (incumbent) {
      std::size_t inc_errors = 0;
      for (const auto& pt : points_) inc_errors += (pt.p + *incumbent > 0.0) ? pt.pos : pt.neg;
      if (inc_errors < best.errors || (inc_errors == best.errors && *incumbent < best.w0))
        best = {*incumbent, inc_errors};
    }
    return best;
  }

  /// scan() on the subset, with errors reported over all points. When
  /// subsampling, an incumbent that is better over all points is kept.
  Result scan_full(std::span<const double> proj, std::span<const std::uint8_t> cost_pos,
                   std::span<const std::uint8_t> cost_neg, std::span<const std::size_t> subset,
                   std::optional<double> incumbent) {
    auto r = scan(proj, cost_pos, cost_neg, subset, incumbent);
    if (subset.empty()) return r;
    r.errors = count_errors(proj, cost_pos, cost_neg, r.w0);
    if (incumbent && *incumbent != r.w0) {
      const auto inc = count_errors(proj, cost_pos, cost_neg, *incumbent);
      if (inc < r.errors || (inc == r.errors && *incumbent < r.w0)) r = {*incumbent, inc};
    }
    return r;
  }

  static std::size_t count_errors(std::span<const double> proj, std::span<const std::uint8_t> cost_pos,
                                  std::span<const std::uint8_t> cost_neg, double w0) {
    std::size_t errors = 0;
    for (std::size_t i = 0; i < proj.size(); ++i) errors += (proj[i] + w0 > 0.0) ? cost_pos[i] : cost_neg[i];
    return errors;
  }

 private:
  struct Point {
    double p;
    std::uint8_t pos;
    std::uint8_t neg;
  };
  std::vector<Point> points_;
};

namespace detail {

inline void label_costs(std::span<const std::int8_t> labels, std::vector<std::uint8_t>& cost_pos,
                        std::vector<std::uint8_t>& cost_neg) {
  cost_pos.resize(labels.size());
  cost_neg.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    cost_pos[i] = labels[i] == -1;
    cost_neg[i] = labels[i] == 1;
  }
}

inline void check_threshold_input(std::span<const double> proj, std::span<const std::int8_t> labels) {
  if (proj.empty()) throw EmptyDatasetError("threshold search on empty input");
  if (proj.size() != labels.size()) throw DimensionError("projection and label counts differ");
}

}  // namespace detail

/// Threshold search on at most `cap` uniformly subsampled projections; the
/// reported loss is that of the chosen w0 on all projections.
inline ThresholdSearchResult best_threshold(std::span<const double> proj,
                                            std::span<const std::int8_t> labels, std::size_t cap,
                                            Rng& rng, std::optional<double> incumbent = std::nullopt) {
  detail::check_threshold_input(proj, labels);
  if (cap < 2) throw ConfigError("threshold cap must be at least 2");
  std::vector<std::uint8_t> pos, neg;
  detail::label_costs(labels, pos, neg);
  std::vector<std::size_t> subset;
  if (proj.size() > cap) subset = sample_without_replacement(rng, proj.size(), cap);
  ThresholdScanner scanner;
  const auto r = scanner.scan_full(proj, pos, neg, subset, incumbent);
  return {r.w0, static_cast<double>(r.errors) / static_cast<double>(proj.size())};
}

/// Exhaustive search over every midpoint candidate, no cap.
inline ThresholdSearchResult best_threshold_exact(std::span<const double> proj,
                                                  std::span<const std::int8_t> labels,
                                                  std::optional<double> incumbent = std::nullopt) {
  detail::check_threshold_input(proj, labels);
  std::vector<std::uint8_t> pos, neg;
  detail::label_costs(labels, pos, neg);
  ThresholdScanner scanner;
  auto r = scanner.scan(proj, pos, neg, {}, incumbent);
  return {r.w0, static_cast<double>(r.errors) / static_cast<double>(proj.size())};
}

}  // namespace zol
