// zol: prepare / train / attack / report front end.
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "zol/zol.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags given on the command line; each overrides the JSON config.
struct Overrides {
  std::string config;
  std::string source;
  std::vector<std::string> dataset;
  std::string test;
  std::vector<unsigned> classes;
  std::string model;
  std::size_t votes = 0;
  std::string vote_mode;
  std::size_t iters = 0;
  double eta = 0;
  std::size_t k_features = 0;
  double batch_frac = 0;
  std::size_t hidden = 0;
  std::size_t mlp_epochs = 0;
  double learning_rate = 0;
  std::string target;
  std::string seed_pool;
  double epsilon = 0;
  std::size_t epochs = 0;
  std::string substitute;
  std::uint64_t substitute_seed = 0;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string out;
};

class Options {
 public:
  explicit Options(CLI::App& cmd) : cmd_(cmd) {}

  template <typename T>
  Options& add(const std::string& flag, T& field, const std::string& help) {
    opts_.push_back(cmd_.add_option(flag, field, help));
    return *this;
  }
  bool given(const std::string& name) const {
    for (auto* opt : opts_)
      if (opt->check_name(name) && opt->count() > 0) return true;
    return false;
  }

 private:
  CLI::App& cmd_;
  std::vector<CLI::Option*> opts_;
};

zol::ExperimentConfig resolve(const Options& opt, const Overrides& o) {
  zol::ExperimentConfig c;
  if (opt.given("--config")) {
    json j;
    try {
      j = json::parse(zol::read_text(o.config));
    } catch (const json::parse_error& e) {
      throw zol::ConfigError(o.config + ": " + e.what());
    }
    c = zol::config_from_json(j);
  }
  if (opt.given("--source")) c.source = o.source;
  if (opt.given("--dataset")) c.dataset = o.dataset;
  if (opt.given("--test")) c.test = o.test;
  if (opt.given("--classes")) {
    c.class_a = o.classes.at(0);
    c.class_b = o.classes.at(1);
  }
  if (opt.given("--model")) c.model = o.model;
  if (opt.given("--votes")) c.votes = o.votes;
  if (opt.given("--vote-mode")) c.vote_mode = o.vote_mode;
  if (opt.given("--iters")) c.iterations = o.iters;
  if (opt.given("--eta")) c.eta = o.eta;
  if (opt.given("--k-features")) c.k_features = o.k_features;
  if (opt.given("--batch-frac")) c.batch_frac = o.batch_frac;
  if (opt.given("--hidden")) c.hidden = o.hidden;
  if (opt.given("--mlp-epochs")) c.mlp_epochs = o.mlp_epochs;
  if (opt.given("--lr")) c.learning_rate = o.learning_rate;
  if (opt.given("--target")) c.target = o.target;
  if (opt.given("--seed-pool")) c.seed_pool = o.seed_pool;
  if (opt.given("--epsilon")) c.epsilon = o.epsilon;
  if (opt.given("--epochs")) c.epochs = o.epochs;
  if (opt.given("--substitute")) c.substitute = o.substitute;
  if (opt.given("--substitute-seed")) c.substitute_seed = o.substitute_seed;
  if (opt.given("--seed")) c.seed = o.seed;
  if (opt.given("--jobs")) c.jobs = o.jobs;
  if (opt.given("--out")) c.out = o.out;
  if (c.jobs < 1) throw zol::ConfigError("--jobs must be >= 1");
  return c;
}

std::string balance_line(const char* name, const zol::BinaryDataset& ds) {
  const auto pos = ds.count_positive();
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s: n=%zu d=%zu positive=%zu negative=%zu%s", name, ds.size(), ds.dim(), pos,
                ds.size() - pos, ds.single_class() ? " (single class)" : "");
  return buf;
}

void need_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw zol::IoError("missing file " + p.string());
}

fs::path output_dir(const zol::ExperimentConfig& c) {
  fs::path out(c.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw zol::IoError("cannot create " + out.string() + ": " + ec.message());
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_json(const fs::path& p, const json& j) { zol::write_text(p, j.dump(2) + "\n"); }

int cmd_prepare(const zol::ExperimentConfig& c) {
  if (c.dataset.empty()) throw zol::ConfigError("prepare needs --dataset");
  const auto out = output_dir(c);
  if (c.source == "container") {
    // Validate, then copy the bytes untouched.
    const char* names[] = {"train.bds", "test.bds"};
    if (c.dataset.size() > 2) throw zol::ConfigError("container source takes at most two files (train, test)");
    for (std::size_t i = 0; i < c.dataset.size(); ++i) {
      const auto bytes = zol::detail::read_file(c.dataset[i]);
      const auto ds = zol::decode_container(bytes);
      zol::detail::write_file(out / names[i], bytes);
      std::cout << balance_line(i == 0 ? "train" : "test", ds) << "\n";
    }
    return 0;
  }
  if (c.dataset.size() != 1) throw zol::ConfigError("--dataset must name the directory holding the raw files");
  const fs::path dir(c.dataset.front());
  zol::RawImageSet train_raw, test_raw;
  if (c.source == "mnist") {
    for (const char* f : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                          "t10k-labels-idx1-ubyte"})
      need_file(dir / f);
    train_raw = zol::load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
    test_raw = zol::load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  } else if (c.source == "cifar10") {
    std::vector<fs::path> batches;
    for (int b = 1; b <= 5; ++b) batches.push_back(dir / ("data_batch_" + std::to_string(b) + ".bin"));
    const std::vector<fs::path> test_batch{dir / "test_batch.bin"};
    for (const auto& p : batches) need_file(p);
    need_file(test_batch.front());
    train_raw = zol::load_cifar10_bin(batches);
    test_raw = zol::load_cifar10_bin(test_batch);
  } else {
    throw zol::ConfigError("unknown source '" + c.source + "' (expected mnist, cifar10 or container)");
  }
  const auto train = zol::select_binary(train_raw, c.class_a, c.class_b);
  const auto test = zol::select_binary(test_raw, c.class_a, c.class_b);
  zol::save_container(train, out / "train.bds");
  zol::save_container(test, out / "test.bds");
  std::cout << balance_line("train", train) << "\n" << balance_line("test", test) << "\n";
  return 0;
}

int cmd_train(const zol::ExperimentConfig& c) {
  if (c.dataset.size() != 1) throw zol::ConfigError("train needs exactly one --dataset container");
  const auto t0 = std::chrono::steady_clock::now();
  const auto train = zol::load_container(c.dataset.front());
  std::optional<zol::BinaryDataset> test;
  if (!c.test.empty()) {
    test = zol::load_container(c.test);
    if (test->dim() != train.dim()) throw zol::DimensionError("train and test containers differ in dimension");
  }
  const auto out = output_dir(c);
  // Accuracies are measured on the stored (float32) parameters, the model
  // every later step sees.
  const auto model = zol::quantized(zol::train_ensemble(c, train));
  zol::save_ensemble(model, out / "model.m01v");

  json report = {
      {"version", zol::kVersion},
      {"command", "train"},
      {"config", zol::to_json(c)},
      {"model_kind", zol::to_string(model.kind)},
      {"vote_mode", zol::to_string(zol::effective_vote_mode(c))},
      {"member_seeds", model.member_seeds()},
      {"train_rows", train.size()},
      {"dim", train.dim()},
      {"train_accuracy", zol::accuracy(model, train)},
      {"test_accuracy", test ? json(zol::accuracy(model, *test)) : json(nullptr)},
      {"wall_clock_seconds", seconds_since(t0)},
  };
  write_json(out / "train_report.json", report);
  std::cout << "model " << report["model_kind"].get<std::string>() << " x" << model.size() << " train_acc "
            << report["train_accuracy"].dump();
  if (test) std::cout << " test_acc " << report["test_accuracy"].dump();
  std::cout << "\n";
  return 0;
}

int cmd_attack(const zol::ExperimentConfig& c) {
  if (c.target.empty()) throw zol::ConfigError("attack needs --target");
  if (c.dataset.size() != 1) throw zol::ConfigError("attack needs exactly one --dataset (the eval pool)");
  const auto t0 = std::chrono::steady_clock::now();
  need_file(c.target);
  const auto model = zol::load_ensemble(c.target);
  const auto eval = zol::load_container(c.dataset.front());
  if (model.dim() != eval.dim())
    throw zol::DimensionError("target expects " + std::to_string(model.dim()) + " features, eval pool has " +
                              std::to_string(eval.dim()));
  std::optional<zol::BinaryDataset> pool;
  if (!c.seed_pool.empty()) pool = zol::load_container(c.seed_pool);
  const auto cfg = zol::attack_config(c, eval.dim());
  const auto out = output_dir(c);

  const auto oracle = zol::make_oracle(model);
  const auto trace = zol::run_substitute_attack(oracle, eval, cfg, pool ? &*pool : nullptr);
  zol::write_text(out / "trace.csv", zol::trace_to_csv(trace));

  json manifest = {
      {"version", zol::kVersion},
      {"command", "attack"},
      {"config", zol::to_json(c)},
      {"attack_seed", cfg.seed},
      {"substitute_seed", cfg.substitute_seed.value_or(zol::derive_seed(cfg.seed, "substitute"))},
      {"target_kind", zol::to_string(model.kind)},
      {"target_member_seeds", model.member_seeds()},
      {"eval_rows", eval.size()},
      {"queries", oracle.query_count()},
      {"adversaries", trace.adversaries_generated},
      {"max_perturbation", trace.max_perturbation},
      {"in_unit_box", trace.in_unit_box},
      {"wall_clock_seconds", seconds_since(t0)},
  };
  write_json(out / "attack_manifest.json", manifest);
  const auto& last = trace.rows.back();
  std::printf("clean_acc %.6f epoch %zu adv_acc %.6f queries %llu\n", trace.rows.front().adv_acc, last.epoch,
              last.adv_acc, static_cast<unsigned long long>(last.queries));
  return 0;
}

// A trace argument is NAME=PATH or PATH; a bare path is named after its
// directory when the file is the default trace.csv, else after its stem.
zol::NamedTrace read_named_trace(const std::string& arg) {
  std::string name, path = arg;
  if (auto eq = arg.find('='); eq != std::string::npos) {
    name = arg.substr(0, eq);
    path = arg.substr(eq + 1);
  }
  const fs::path p(path);
  if (name.empty()) {
    name = p.stem().string();
    if (name == "trace" && p.has_parent_path()) name = fs::absolute(p).parent_path().filename().string();
  }
  try {
    return {name, zol::trace_from_csv(zol::read_text(p))};
  } catch (const zol::FormatError& e) {
    throw zol::FormatError(path + ": " + e.what());
  }
}

int cmd_report(const std::vector<std::string>& traces, const zol::ExperimentConfig& c) {
  std::vector<zol::NamedTrace> named;
  for (const auto& t : traces) named.push_back(read_named_trace(t));
  const auto rep = zol::merge_traces(named);
  const auto out = output_dir(c);
  zol::write_text(out / "merged.csv", rep.merged_csv);
  zol::write_text(out / "summary.csv", rep.summary_csv);
  std::cout << rep.summary_csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"01-loss classifiers and substitute-model black-box attacks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", zol::kVersion);

  Overrides o;
  auto common = [&](CLI::App& cmd) {
    auto opt = std::make_unique<Options>(cmd);
    opt->add("--config", o.config, "JSON experiment config; flags override it")
        .add("--dataset", o.dataset, "input data (see command help)")
        .add("--seed", o.seed, "global seed")
        .add("--jobs", o.jobs, "worker threads")
        .add("--out", o.out, "output directory");
    return opt;
  };

  auto* prepare = app.add_subcommand("prepare", "extract a two-class subset into train.bds/test.bds");
  auto prep_opt = common(*prepare);
  prep_opt->add("--source", o.source, "mnist (directory of IDX files), cifar10 (directory of .bin batches) or container")
      .add("--classes", o.classes, "class_a (+1) and class_b (-1)");
  prepare->get_option("--classes")->expected(2);

  auto* train = app.add_subcommand("train", "train a vote ensemble and write model.m01v + train_report.json");
  auto train_opt = common(*train);
  train_opt->add("--test", o.test, "held-out container for test accuracy")
      .add("--model", o.model, "scd01 | mlp01 | svm | mlp")
      .add("--votes", o.votes, "ensemble size")
      .add("--vote-mode", o.vote_mode, "restart | bootstrap")
      .add("--iters", o.iters, "coordinate-descent iterations")
      .add("--eta", o.eta, "coordinate step size")
      .add("--k-features", o.k_features, "coordinates sampled per step")
      .add("--batch-frac", o.batch_frac, "batch fraction per iteration")
      .add("--hidden", o.hidden, "hidden nodes (mlp01, mlp)")
      .add("--mlp-epochs", o.mlp_epochs, "SGD epochs for the sigmoid MLP")
      .add("--lr", o.learning_rate, "SGD learning rate");

  auto* attack = app.add_subcommand("attack", "run the substitute attack and write trace.csv + attack_manifest.json");
  auto attack_opt = common(*attack);
  attack_opt->add("--target", o.target, "target model blob (.m01v)")
      .add("--seed-pool", o.seed_pool, "separate attacker seed pool container")
      .add("--epsilon", o.epsilon, "per-feature perturbation")
      .add("--epochs", o.epochs, "augmentation epochs")
      .add("--substitute", o.substitute, "mlp | scd01")
      .add("--substitute-seed", o.substitute_seed, "fixed substitute seed")
      .add("--iters", o.iters, "scd01 substitute iterations")
      .add("--eta", o.eta, "scd01 substitute step size")
      .add("--k-features", o.k_features, "scd01 substitute coordinates per step")
      .add("--batch-frac", o.batch_frac, "scd01 substitute batch fraction")
      .add("--lr", o.learning_rate, "mlp substitute learning rate");

  auto* report = app.add_subcommand("report", "merge trace CSVs into merged.csv + summary.csv");
  std::vector<std::string> trace_args;
  report->add_option("traces", trace_args, "trace CSVs, optionally NAME=PATH")->required();
  Options report_opt(*report);
  report_opt.add("--out", o.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(resolve(*prep_opt, o));
    if (train->parsed()) return cmd_train(resolve(*train_opt, o));
    if (attack->parsed()) return cmd_attack(resolve(*attack_opt, o));
    return cmd_report(trace_args, resolve(report_opt, o));
  } catch (const zol::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
  }
  return 1;
}
