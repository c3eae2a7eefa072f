#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "synth.hpp"
#include "zol/vote.hpp"

namespace {

// Linear models that ignore the input and always vote `v`.
zol::LinearModel constant(int v, std::size_t d = 2) { return {std::vector<double>(d, 0.0), v > 0 ? 1.0 : -1.0}; }

zol::VoteEnsemble<zol::LinearModel> ensemble_of(std::vector<zol::LinearModel> members) {
  zol::VoteEnsemble<zol::LinearModel> e;
  e.member_seeds.resize(members.size());
  std::iota(e.member_seeds.begin(), e.member_seeds.end(), 0);
  e.members = std::move(members);
  return e;
}

double stddev(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("predict_vote examples", "[vote]") {
  const std::vector<float> x{0.3f, 0.6f};
  CHECK(zol::predict_vote(ensemble_of({constant(1), constant(1), constant(-1)}), x) == 1);
  CHECK(zol::predict_vote(ensemble_of({constant(-1), constant(-1), constant(1)}), x) == -1);

  std::vector<zol::LinearModel> split;
  for (int i = 0; i < 32; ++i) split.push_back(constant(i % 2 ? 1 : -1));
  CHECK(zol::predict_vote(ensemble_of(split), x) == 1);
  CHECK(zol::predict_vote(ensemble_of({constant(-1), constant(1)}), x) == 1);

  const zol::LinearModel m{{1.0, -2.0}, 0.4};
  const auto same = ensemble_of({m, m, m, m});
  const auto ds = synth::blobs(40, 2, 1);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(zol::predict_vote(same, ds.row(i)) == zol::predict_linear(m, ds.row(i)));

  CHECK_THROWS_AS(zol::predict_vote(zol::VoteEnsemble<zol::LinearModel>{}, x), zol::ConfigError);
  CHECK_THROWS_AS(zol::vote_accuracy(zol::VoteEnsemble<zol::LinearModel>{}, ds), zol::ConfigError);
}

TEST_CASE("vote_accuracy", "[vote]") {
  const auto ds = synth::blobs(60, 2, 2);
  // Blobs overlap, so perfect members need a separable set.
  const auto sep = synth::make({{0.1f, 0.5f}, {0.2f, 0.4f}, {0.8f, 0.5f}, {0.9f, 0.1f}}, {-1, -1, 1, 1});
  const zol::LinearModel perfect{{1.0, 0.0}, -0.5};
  CHECK(zol::vote_accuracy(ensemble_of({perfect, perfect, perfect}), sep) == 1.0);

  const auto e = ensemble_of({zol::LinearModel{{1.0, 0.0}, -0.5}, zol::LinearModel{{0.0, 1.0}, -0.5},
                              zol::LinearModel{{-1.0, 1.0}, 0.1}});
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) wrong += zol::predict_vote(e, ds.row(i)) != ds.label(i);
  CHECK(zol::vote_accuracy(e, ds) + static_cast<double>(wrong) / 60.0 == Catch::Approx(1.0).epsilon(1e-15));

  // Two disagreeing members: +1 unless both say -1.
  const zol::LinearModel a{{1.0, 0.0}, -0.5}, b{{0.0, 1.0}, -0.5};
  std::size_t ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int pa = zol::predict_linear(a, ds.row(i)), pb = zol::predict_linear(b, ds.row(i));
    const int vote = (pa == -1 && pb == -1) ? -1 : 1;
    ok += vote == ds.label(i);
  }
  CHECK(zol::vote_accuracy(ensemble_of({a, b}), ds) == static_cast<double>(ok) / 60.0);
}

TEST_CASE("vote invariances", "[vote][property]") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 1 + gen() % 4;
    const auto ds = synth::blobs(20, d, gen());
    std::vector<zol::LinearModel> ms(1 + gen() % 9);
    for (auto& m : ms) {
      m.w.resize(d);
      for (auto& v : m.w) v = g(gen);
      m.w0 = g(gen);
    }
    auto shuffled = ms;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);

    // A model and its negation cancel, unless the model sits on its boundary.
    const zol::LinearModel extra{std::vector<double>(d, 0.0), 0.7};
    auto padded = ms;
    padded.push_back(extra);
    padded.push_back(zol::negated(extra));

    const auto e = ensemble_of(ms), p = ensemble_of(shuffled), q = ensemble_of(padded);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK(zol::predict_vote(p, ds.row(i)) == zol::predict_vote(e, ds.row(i)));
      long sum = 0;
      for (const auto& m : ms) sum += zol::predict_linear(m, ds.row(i));
      if (sum != 0) CHECK(zol::predict_vote(q, ds.row(i)) == zol::predict_vote(e, ds.row(i)));
    }
  }
}

TEST_CASE("train_vote", "[vote][train]") {
  const auto ds = synth::blobs(80, 3, 4);
  auto trainer = [](const zol::BinaryDataset& train, std::uint64_t seed) {
    zol::ScdConfig cfg;
    cfg.features_per_step = 3;
    cfg.iterations = 50;
    cfg.seed = seed;
    return zol::train_scd01(train, cfg).model;
  };

  SECTION("one vote is the single model") {
    const auto e = zol::train_vote(trainer, ds, 1, 17, zol::VoteMode::restart);
    REQUIRE(e.members.size() == 1);
    CHECK(e.members[0] == trainer(ds, 17));
    CHECK(e.member_seeds == std::vector<std::uint64_t>{17});
    for (std::size_t i = 0; i < ds.size(); ++i)
      CHECK(zol::predict_vote(e, ds.row(i)) == zol::predict_linear(e.members[0], ds.row(i)));
  }
  SECTION("restart members use consecutive seeds on the full set") {
    const auto e = zol::train_vote(trainer, ds, 5, 100, zol::VoteMode::restart);
    CHECK(e.member_seeds == std::vector<std::uint64_t>{100, 101, 102, 103, 104});
    for (std::size_t i = 0; i < 5; ++i) CHECK(e.members[i] == trainer(ds, 100 + i));
    CHECK(e == zol::train_vote(trainer, ds, 5, 100, zol::VoteMode::restart));
    CHECK_FALSE(e == zol::train_vote(trainer, ds, 5, 101, zol::VoteMode::restart));
  }
  SECTION("bootstrap replicas have n rows and differ per member") {
    std::vector<std::vector<float>> seen(6);
    auto recorder = [&](const zol::BinaryDataset& train, std::uint64_t seed) {
      CHECK(train.size() == ds.size());
      seen[seed - 50] = train.features();
      return trainer(train, seed);
    };
    const auto e = zol::train_vote(recorder, ds, 6, 50, zol::VoteMode::bootstrap);
    for (std::size_t i = 0; i < 6; ++i) {
      const auto rows = zol::bootstrap_rows(ds.size(), zol::derive_seed(50 + i, "bootstrap"));
      CHECK(seen[i] == zol::subset(ds, rows).features());
      CHECK(e.members[i] == trainer(zol::subset(ds, rows), 50 + i));
      for (std::size_t j = 0; j < i; ++j) CHECK(seen[i] != seen[j]);
    }
  }
  SECTION("bootstrap rows are uniform with replacement") {
    const auto rows = zol::bootstrap_rows(10000, 5);
    CHECK(rows.size() == 10000);
    CHECK(*std::max_element(rows.begin(), rows.end()) < 10000);
    std::vector<bool> hit(10000);
    for (auto r : rows) hit[r] = true;
    // Expected distinct fraction 1 - 1/e ~ 0.632.
    const double distinct = static_cast<double>(std::count(hit.begin(), hit.end(), true)) / 10000.0;
    CHECK(distinct > 0.62);
    CHECK(distinct < 0.645);
  }
  SECTION("parallel training matches sequential") {
    for (auto mode : {zol::VoteMode::restart, zol::VoteMode::bootstrap}) {
      const auto one = zol::train_vote(trainer, ds, 7, 9, mode, 1);
      const auto four = zol::train_vote(trainer, ds, 7, 9, mode, 4);
      CHECK(one == four);
    }
  }
  SECTION("errors") {
    CHECK_THROWS_AS(zol::train_vote(trainer, ds, 0, 1, zol::VoteMode::restart), zol::ConfigError);
    CHECK_THROWS_AS(zol::parse_vote_mode("bagging"), zol::ConfigError);
    CHECK(zol::parse_vote_mode("bootstrap") == zol::VoteMode::bootstrap);
    CHECK(std::string(zol::to_string(zol::VoteMode::restart)) == "restart");
  }
}

TEST_CASE("votes are more stable than single runs", "[vote][property]") {
  // Ten ensemble/run pairs on noisy image-like data; the spread of the
  // ensemble's test accuracy should not exceed that of one run.
  const auto train = synth::templates(300, 30, 60, 0.35, 0.1);
  const auto test = synth::templates(1000, 30, 61, 0.35, 0.0);
  auto trainer = [](const zol::BinaryDataset& t, std::uint64_t seed) {
    zol::ScdConfig cfg;
    cfg.features_per_step = 16;
    cfg.iterations = 200;
    cfg.seed = seed;
    return zol::train_scd01(t, cfg).model;
  };
  std::vector<double> single, voted;
  for (std::uint64_t pair = 0; pair < 10; ++pair) {
    single.push_back(zol::accuracy(trainer(train, 1000 * pair), test));
    voted.push_back(zol::vote_accuracy(zol::train_vote(trainer, train, 32, 1000 * pair + 1, zol::VoteMode::restart), test));
  }
  INFO("single sd " << stddev(single) << " vote sd " << stddev(voted));
  CHECK(stddev(voted) <= stddev(single));
}
