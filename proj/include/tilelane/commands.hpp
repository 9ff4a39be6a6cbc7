#pragma once

// Subcommand implementations shared by the command-line tool and the tests.
// Each throws on failure; messages name the offending value.

#include "tilelane/config.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace tilelane {

void cmd_gen_data(const ExperimentConfig& cfg, const std::string& out_path, int n_scenes,
                  std::uint64_t seed_base, std::ostream& msg);

enum class StageSelection { kMeans, kUncertainty, kBoth };

struct TrainArgs {
  std::string data_path;
  std::string out_path;
  StageSelection stage = StageSelection::kBoth;
  std::uint64_t seed = 0;
  std::string init_checkpoint;  // required for the uncertainty stage alone
  std::string log_path;         // JSON-Lines; empty disables
};

void cmd_train(const ExperimentConfig& cfg, const TrainArgs& args, std::ostream& msg);

struct InferArgs {
  std::string checkpoint_path;
  std::string data_path;
  std::string out_path;
  std::optional<ClusterMethod> method;  // defaults to the config
  std::string calibration_path;
};

void cmd_infer(const ExperimentConfig& cfg, const InferArgs& args, std::ostream& msg);

void cmd_calibrate(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                   const std::string& calib_data_path, const std::string& out_path, std::ostream& msg);

struct EvalArgs {
  std::string detections_path;
  std::string data_path;
  std::string out_path;
  std::string calibration_path;
  std::string compare_path;
  std::string csv_path;
};

void cmd_eval(const ExperimentConfig& cfg, const EvalArgs& args, std::ostream& msg);

}  // namespace tilelane
