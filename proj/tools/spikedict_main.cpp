#include "spikedict/config.hpp"
#include "spikedict/data.hpp"
#include "spikedict/plasticity.hpp"
#include "spikedict/runner.hpp"
#include "spikedict/version.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  long seed = -1; // overrides the config's seed key when >= 0
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file")->required();
  cmd->add_option("--out-dir", args.out_dir, "artifact directory");
  cmd->add_option("--seed", args.seed, "RNG seed (overrides the config's `seed` key)");
}

std::uint64_t resolve_seed(const spikedict::Config& cfg, const CommonArgs& args) {
  if (args.seed >= 0) return static_cast<std::uint64_t>(args.seed);
  return static_cast<std::uint64_t>(cfg.get_long("seed", 0));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spiking sparse-coding and dictionary-learning experiments"};
  app.set_version_flag("--version", spikedict::kVersion);
  app.require_subcommand(1);

  CommonArgs encode_args, train_args, sgd_args, eval_args;
  CLI::App* encode = app.add_subcommand("encode", "sparse-code inputs and compare to the oracle");
  add_common(encode, encode_args);
  CLI::App* train = app.add_subcommand("train", "online dictionary learning in the spiking network");
  add_common(train, train_args);
  CLI::App* train_sgd = app.add_subcommand("train-sgd", "projected-SGD baseline training");
  add_common(train_sgd, sgd_args);
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a test set");
  add_common(eval, eval_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (encode->parsed()) {
      const auto cfg = spikedict::Config::parse_file(encode_args.config_path);
      return spikedict::run_encode(cfg, encode_args.out_dir, resolve_seed(cfg, encode_args));
    }
    if (train->parsed()) {
      const auto cfg = spikedict::Config::parse_file(train_args.config_path);
      return spikedict::run_train(cfg, train_args.out_dir, resolve_seed(cfg, train_args));
    }
    if (train_sgd->parsed()) {
      const auto cfg = spikedict::Config::parse_file(sgd_args.config_path);
      return spikedict::run_train_sgd(cfg, sgd_args.out_dir, resolve_seed(cfg, sgd_args));
    }
    if (eval->parsed()) {
      const auto cfg = spikedict::Config::parse_file(eval_args.config_path);
      return spikedict::run_eval(cfg, eval_args.out_dir, resolve_seed(cfg, eval_args));
    }
  } catch (const spikedict::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const spikedict::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
