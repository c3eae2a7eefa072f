#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "convex.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "mlp01.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace zol {

enum class VoteMode { restart, bootstrap };

inline VoteMode parse_vote_mode(const std::string& s) {
  if (s == "restart") return VoteMode::restart;
  if (s == "bootstrap") return VoteMode::bootstrap;
  throw ConfigError("unknown vote mode '" + s + "' (expected restart or bootstrap)");
}

inline const char* to_string(VoteMode m) { return m == VoteMode::restart ? "restart" : "bootstrap"; }

/// Majority vote over independently trained members. An exact tie votes +1.
template <typename Model>
struct VoteEnsemble {
  std::vector<Model> members;
  std::vector<std::uint64_t> member_seeds;

  std::size_t dim() const { return members.empty() ? 0 : members.front().dim(); }
  bool operator==(const VoteEnsemble&) const = default;
};

/// n rows drawn with replacement.
inline std::vector<std::size_t> bootstrap_rows(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = uniform_index(rng, n);
  return rows;
}

/// Trains n_votes members with seeds base_seed + i. restart: each member sees
/// the full set; bootstrap: member i sees a seeded resample of size n.
/// `trainer(const BinaryDataset&, std::uint64_t seed) -> Model`.
template <typename Trainer>
auto train_vote(Trainer&& trainer, const BinaryDataset& train, std::size_t n_votes, std::uint64_t base_seed,
                VoteMode mode, unsigned jobs = 1) {
  using Model = decltype(trainer(train, std::uint64_t{}));
  if (n_votes < 1) throw ConfigError("vote count must be >= 1");
  VoteEnsemble<Model> e;
  e.members.resize(n_votes);
  e.member_seeds.resize(n_votes);
  parallel_for(n_votes, jobs, [&](std::size_t i) {
    const std::uint64_t seed = base_seed + i;
    e.member_seeds[i] = seed;
    if (mode == VoteMode::restart) {
      e.members[i] = trainer(train, seed);
    } else {
      auto rows = bootstrap_rows(train.size(), derive_seed(seed, "bootstrap"));
      e.members[i] = trainer(subset(train, rows), seed);
    }
  });
  return e;
}

template <typename Model>
int predict_vote(const VoteEnsemble<Model>& e, std::span<const float> x) {
  if (e.members.empty()) throw ConfigError("empty ensemble");
  long sum = 0;
  for (const auto& m : e.members) sum += predict(m, x);
  return sum >= 0 ? 1 : -1;
}

template <typename Model>
int predict(const VoteEnsemble<Model>& e, std::span<const float> x) {
  return predict_vote(e, x);
}

/// Fraction of rows whose label `model` predicts correctly.
template <typename Model>
double accuracy(const Model& model, const BinaryDataset& ds) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) correct += predict(model, ds.row(i)) == ds.label(i);
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

template <typename Model>
double vote_accuracy(const VoteEnsemble<Model>& e, const BinaryDataset& ds) {
  if (e.members.empty()) throw ConfigError("empty ensemble");
  return accuracy(e, ds);
}

}  // namespace zol
