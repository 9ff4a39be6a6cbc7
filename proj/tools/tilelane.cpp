// Command-line front end: gen-data, train, infer, calibrate, eval.

#include "tilelane/commands.hpp"
#include "tilelane/config.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace tilelane;

int main(int argc, char** argv) {
  CLI::App app{"Tile-based 3D lane detection experiments"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "experiment config (JSON)")->check(CLI::ExistingFile);

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  std::string gen_out;
  int gen_n = 0;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out)->required();
  gen->add_option("-n,--scenes", gen_n)->required();
  gen->add_option("--seed-base", gen_seed);

  auto* train = app.add_subcommand("train", "train a checkpoint");
  TrainArgs targs;
  std::string stage = "both";
  train->add_option("--data", targs.data_path)->required()->check(CLI::ExistingFile);
  train->add_option("--out", targs.out_path)->required();
  train->add_option("--stage", stage)->check(CLI::IsMember({"means", "uncertainty", "both"}));
  train->add_option("--seed", targs.seed);
  train->add_option("--init", targs.init_checkpoint, "means checkpoint for --stage uncertainty");
  train->add_option("--log", targs.log_path, "JSON-Lines training log");

  auto* infer = app.add_subcommand("infer", "decode and cluster lanes");
  InferArgs iargs;
  std::string method;
  infer->add_option("--checkpoint", iargs.checkpoint_path)->required()->check(CLI::ExistingFile);
  infer->add_option("--data", iargs.data_path)->required()->check(CLI::ExistingFile);
  infer->add_option("--out", iargs.out_path)->required();
  infer->add_option("--clustering", method)->check(CLI::IsMember({"embedding", "greedy"}));
  infer->add_option("--calibration", iargs.calibration_path)->check(CLI::ExistingFile);

  auto* cal = app.add_subcommand("calibrate", "fit variance temperatures on a held-out split");
  std::string cal_ckpt, cal_data, cal_out;
  cal->add_option("--checkpoint", cal_ckpt)->required()->check(CLI::ExistingFile);
  cal->add_option("--data", cal_data)->required()->check(CLI::ExistingFile);
  cal->add_option("--out", cal_out)->required();

  auto* ev = app.add_subcommand("eval", "score detections against ground truth");
  EvalArgs eargs;
  ev->add_option("--detections", eargs.detections_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--data", eargs.data_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--out", eargs.out_path)->required();
  ev->add_option("--calibration", eargs.calibration_path)->check(CLI::ExistingFile);
  ev->add_option("--compare", eargs.compare_path, "second detection set")->check(CLI::ExistingFile);
  ev->add_option("--csv", eargs.csv_path, "RMV/RMSE bins");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    cfg.validate();
    if (gen->parsed()) {
      cmd_gen_data(cfg, gen_out, gen_n, gen_seed, std::cout);
    } else if (train->parsed()) {
      targs.stage = stage == "means"         ? StageSelection::kMeans
                    : stage == "uncertainty" ? StageSelection::kUncertainty
                                             : StageSelection::kBoth;
      cmd_train(cfg, targs, std::cout);
    } else if (infer->parsed()) {
      if (!method.empty()) iargs.method = method == "greedy" ? ClusterMethod::kGreedy : ClusterMethod::kEmbedding;
      cmd_infer(cfg, iargs, std::cout);
    } else if (cal->parsed()) {
      cmd_calibrate(cfg, cal_ckpt, cal_data, cal_out, std::cout);
    } else if (ev->parsed()) {
      cmd_eval(cfg, eargs, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
