#include <catch_amalgamated.hpp>

#include "synth.hpp"
#include "zol/zol.hpp"

using nlohmann::json;

TEST_CASE("config JSON round trip", "[experiment]") {
  zol::ExperimentConfig c;
  c.source = "mnist";
  c.dataset = {"a.bds", "b.bds"};
  c.class_a = 3;
  c.class_b = 8;
  c.model = "mlp01";
  c.votes = 32;
  c.k_features = 17;
  c.substitute_seed = 99;
  c.svm_c_grid = {0.5, 2.0};
  c.seed = 12345678901234ull;
  const auto j = zol::to_json(c);
  const auto back = zol::config_from_json(j);
  CHECK(zol::to_json(back) == j);
  CHECK(back.k_features == std::optional<std::size_t>(17));
  CHECK(back.substitute_seed == std::optional<std::uint64_t>(99));
  CHECK(back.class_a == 3);
  CHECK(back.class_b == 8);

  // Through text as well, the way manifests are re-read.
  CHECK(zol::to_json(zol::config_from_json(json::parse(j.dump(2)))) == j);

  // Missing keys keep their defaults.
  const auto d = zol::config_from_json(json::parse(R"({"model": "svm"})"));
  CHECK(d.model == "svm");
  CHECK(d.iterations == zol::ExperimentConfig{}.iterations);
  CHECK_FALSE(d.k_features.has_value());
}

TEST_CASE("config validation", "[experiment][errors]") {
  CHECK_THROWS_AS(zol::config_from_json(json::array()), zol::ConfigError);
  CHECK_THROWS_AS(zol::config_from_json(json::parse(R"({"modle": "svm"})")), zol::ConfigError);
  CHECK_THROWS_AS(zol::config_from_json(json::parse(R"({"votes": "many"})")), zol::ConfigError);
  CHECK_THROWS_AS(zol::config_from_json(json::parse(R"({"classes": [1]})")), zol::ConfigError);

  zol::ExperimentConfig c;
  c.model = "cnn";
  CHECK_THROWS_AS(zol::effective_vote_mode(c), zol::ConfigError);
  c.model = "scd01";
  c.eta = 0;
  CHECK_THROWS_AS(zol::scd_config(c, 10), zol::ConfigError);
  c = {};
  c.k_features = 11;
  c.substitute = "scd01";
  CHECK_THROWS_AS(zol::attack_config(c, 10), zol::ConfigError);
  c = {};
  c.substitute = "cnn";
  CHECK_THROWS_AS(zol::attack_config(c, 10), zol::ConfigError);
  c = {};
  c.epsilon = 1.5;
  CHECK_THROWS_AS(zol::attack_config(c, 10), zol::ConfigError);
}

TEST_CASE("vote mode defaults by model family", "[experiment]") {
  zol::ExperimentConfig c;
  for (const char* m : {"scd01", "mlp01"}) {
    c.model = m;
    CHECK(zol::effective_vote_mode(c) == zol::VoteMode::restart);
  }
  for (const char* m : {"svm", "mlp"}) {
    c.model = m;
    CHECK(zol::effective_vote_mode(c) == zol::VoteMode::bootstrap);
  }
  c.vote_mode = "restart";
  CHECK(zol::effective_vote_mode(c) == zol::VoteMode::restart);
}

TEST_CASE("attack config mapping", "[experiment]") {
  zol::ExperimentConfig c;
  c.epsilon = 0.2;
  c.epochs = 7;
  c.substitute = "scd01";
  c.substitute_epochs = 12;
  c.substitute_patience = 3;
  c.seed = 5;
  c.jobs = 3;
  const auto a = zol::attack_config(c, 64);
  CHECK(a.epsilon == 0.2);
  CHECK(a.epochs == 7);
  CHECK(a.substitute == zol::SubstituteKind::scd01);
  CHECK(a.substitute_sgd.epochs == 12);
  CHECK(a.substitute_sgd.patience == 3);
  CHECK(a.seed == zol::derive_seed(5, "attack"));
  CHECK(a.jobs == 3);
  CHECK(a.substitute_scd.features_per_step == zol::default_features_per_step(64));
  CHECK_FALSE(a.substitute_seed.has_value());
}

TEST_CASE("train_ensemble", "[experiment][train]") {
  const auto train = synth::blobs(60, 4, 1);
  zol::ExperimentConfig c;
  c.iterations = 30;
  c.seed = 3;

  SECTION("every kind trains, and repeats exactly") {
    for (const char* m : {"scd01", "mlp01", "svm", "mlp"}) {
      INFO(m);
      c.model = m;
      c.votes = 3;
      c.hidden = 4;
      c.mlp_epochs = 5;
      c.svm_epochs = 2;
      const auto a = zol::train_ensemble(c, train);
      CHECK(zol::to_string(a.kind) == std::string(m));
      CHECK(a.size() == 3);
      CHECK(a.dim() == 4);
      CHECK(zol::encode_ensemble(a) == zol::encode_ensemble(zol::train_ensemble(c, train)));
      const auto base = zol::derive_seed(3, "train");
      CHECK(a.member_seeds() == std::vector<std::uint64_t>{base, base + 1, base + 2});
    }
  }
  SECTION("bootstrap svm votes record every member seed") {
    c.model = "svm";
    c.votes = 32;
    c.svm_epochs = 2;
    c.svm_c_grid = {1.0};
    const auto e = zol::train_ensemble(c, train);
    CHECK(e.member_seeds().size() == 32);
  }
  SECTION("jobs do not change the result") {
    c.votes = 4;
    const auto one = zol::train_ensemble(c, train);
    c.jobs = 4;
    CHECK(zol::encode_ensemble(zol::train_ensemble(c, train)) == zol::encode_ensemble(one));
  }
  SECTION("mlp01 needs hidden nodes") {
    c.model = "mlp01";
    c.hidden = 0;
    CHECK_THROWS_AS(zol::train_ensemble(c, train), zol::ConfigError);
  }
}
