#include "tilelane/commands.hpp"

#include "tilelane/pipeline.hpp"
#include "tilelane/serialization.hpp"
#include "tilelane/training.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace tilelane {

using nlohmann::json;

namespace {

void require_grid(const GridConfig& expected, const GridConfig& got, const std::string& what) {
  if (!same_grid(expected, got)) {
    throw std::runtime_error(what + " was produced with grid " + grid_to_json(got).dump() +
                             ", config has " + grid_to_json(expected).dump());
  }
}

void require_model(const ModelConfig& cfg, const ModelConfig& ckpt) {
  auto check = [](const char* name, int a, int b) {
    if (a != b) {
      throw std::runtime_error(std::string(name) + " mismatch: checkpoint has " + std::to_string(b) +
                               ", config has " + std::to_string(a));
    }
  };
  check("n_bins", cfg.n_bins, ckpt.n_bins);
  check("embedding_dim", cfg.embedding_dim, ckpt.embedding_dim);
  check("hidden", cfg.hidden, ckpt.hidden);
  check("patch_k", cfg.patch_k, ckpt.patch_k);
  check("upsample", cfg.upsample, ckpt.upsample);
  check("position_features", cfg.position_features, ckpt.position_features);
}

TemperatureParams read_temperature(const std::string& path) {
  const json j = read_json(path);
  return TemperatureParams{{j.at("T_r").get<double>(), j.at("T_phi").get<double>(), j.at("T_dz").get<double>()}};
}

std::string seeds_text(const SeedRange& r) {
  return r.empty() ? std::string("[]") : "[" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]";
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json evaluation_json(const Evaluation& ev, const DetectionSet& set) {
  json thr = json::array();
  for (const ThresholdResult& t : ev.report.thresholds) {
    thr.push_back({{"iou", t.iou_threshold},
                   {"ap", t.ap},
                   {"recall", t.recall},
                   {"precision", t.precision},
                   {"tp", t.tp},
                   {"fp", t.fp},
                   {"fn", t.fn}});
  }
  const LateralErrors& le = ev.report.lateral;
  json j = {{"clustering", to_string(set.method)},
            {"supervision", to_string(set.supervision)},
            {"AP", ev.report.ap},
            {"AP_50", ev.report.ap50},
            {"AP_90", ev.report.ap90},
            {"per_threshold", thr},
            {"lateral_error_m", {{"near_0_30", optional_json(le.near)}, {"far_30_80", optional_json(le.far)}}},
            {"dz_error_m", {{"near_0_30", optional_json(le.dz_near)}, {"far_30_80", optional_json(le.dz_far)}}},
            {"n_detections", ev.report.n_detections},
            {"n_gt", ev.report.n_gt}};
  if (ev.calibration) {
    json bins = json::array();
    for (const CalibrationBin& b : ev.calibration->bins) {
      bins.push_back({{"rmv", b.rmv}, {"rmse", b.rmse}, {"count", b.count}});
    }
    j["calibration"] = {{"ence", ev.calibration->ence}, {"n_records", ev.n_calibration_records}, {"bins", bins}};
  } else {
    j["calibration"] = nullptr;
  }
  return j;
}

void write_csv(const std::string& path, const CalibrationReport& rep) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "bin,rmv,rmse\n";
  char line[96];
  for (size_t b = 0; b < rep.bins.size(); ++b) {
    std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g\n", b, rep.bins[b].rmv, rep.bins[b].rmse);
    out << line;
  }
}

void apply_temperature(DetectionSet& set, const TemperatureParams& t) {
  if (set.temperature) throw std::runtime_error("detections already carry a temperature; refusing to apply twice");
  for (SceneDetections& sd : set.scenes) {
    for (LaneDetection& d : sd.lanes) {
      for (LanePoint& p : d.points) {
        for (int q = 0; q < 3; ++q) p.variance[q] *= t.t[q];
        p.covariance = propagate_covariance(p.variance[0], p.variance[1], p.variance[2], p.r, p.phi, p.dz,
                                            tile_center(set.grid, p.i, p.j), sd.pose);
      }
    }
  }
  set.temperature = t;
}

}  // namespace

void cmd_gen_data(const ExperimentConfig& cfg, const std::string& out_path, int n_scenes,
                  std::uint64_t seed_base, std::ostream& msg) {
  if (n_scenes < 0) throw std::invalid_argument("scene count must be >= 0");
  const auto samples = make_samples(cfg, seed_base, n_scenes);
  write_dataset(out_path, samples, config_hash(cfg), cfg.grid);
  std::map<std::string, int> counts;
  for (const SceneSample& s : samples) ++counts[std::string(to_string(s.scene.topology))];
  msg << "wrote " << n_scenes << " scenes to " << out_path << '\n';
  for (const auto& [name, count] : counts) msg << "  " << name << ": " << count << '\n';
}

void cmd_train(const ExperimentConfig& cfg, const TrainArgs& args, std::ostream& msg) {
  const Dataset data = read_dataset(args.data_path);
  if (data.samples.empty()) throw std::runtime_error("dataset " + args.data_path + " is empty");
  require_grid(cfg.grid, data.grid, "dataset " + args.data_path);

  std::ofstream log;
  if (!args.log_path.empty()) {
    log.open(args.log_path, std::ios::binary);
    if (!log) throw std::runtime_error("cannot write " + args.log_path);
    log << meta_json(config_hash(cfg), cfg.grid).dump() << '\n';
  }
  const TrainLogger logger = [&](const TrainLogEntry& e) {
    if (log.is_open()) log << json{{"stage", e.stage}, {"step", e.step}, {"loss", e.loss}, {"lr", e.lr}}.dump() << '\n';
  };

  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.seed = args.seed;
  ckpt.train_seeds = data.seeds();
  ckpt.supervision = cfg.train.supervision;
  try {
    if (args.stage == StageSelection::kUncertainty) {
      if (args.init_checkpoint.empty()) throw std::runtime_error("--stage uncertainty needs --init <means checkpoint>");
      const Checkpoint init = read_checkpoint(args.init_checkpoint);
      require_model(cfg.model, init.config.model);
      require_grid(cfg.grid, init.config.grid, "checkpoint " + args.init_checkpoint);
      ckpt.model = init.model;
      ckpt.seed = init.seed;
      ckpt.train_seeds = init.train_seeds;
    } else {
      ckpt.model = train_means(data.samples, cfg, args.seed, logger).model;
      msg << "stage 1 finished (" << cfg.train.steps_means << " steps)\n";
    }
    ckpt.stage = CheckpointStage::kMeans;
    if (args.stage != StageSelection::kMeans) {
      ckpt.model = train_uncertainty(ckpt.model, data.samples, cfg, cfg.train.supervision, logger).model;
      ckpt.stage = CheckpointStage::kUncertainty;
      msg << "stage 2 finished (" << cfg.train.steps_uncertainty << " steps, "
          << to_string(cfg.train.supervision) << " supervision)\n";
    }
  } catch (const DivergenceError& e) {
    throw std::runtime_error(std::string(e.what()) + "; last good step " + std::to_string(e.last_good_step));
  }
  write_checkpoint(args.out_path, ckpt);
  msg << "wrote " << args.out_path << '\n';
}

void cmd_infer(const ExperimentConfig& cfg, const InferArgs& args, std::ostream& msg) {
  const Checkpoint ckpt = read_checkpoint(args.checkpoint_path);
  require_model(cfg.model, ckpt.config.model);
  require_grid(cfg.grid, ckpt.config.grid, "checkpoint " + args.checkpoint_path);
  const Dataset data = read_dataset(args.data_path);
  if (!data.samples.empty()) require_grid(cfg.grid, data.grid, "dataset " + args.data_path);

  DetectionSet set;
  set.config_hash = config_hash(cfg);
  set.method = args.method.value_or(cfg.eval.clustering);
  set.supervision = ckpt.supervision;
  set.grid = cfg.grid;
  if (!args.calibration_path.empty()) set.temperature = read_temperature(args.calibration_path);
  for (const SceneSample& s : data.samples) {
    set.scenes.push_back(infer_scene(ckpt.model, s, cfg, set.method, set.temperature));
  }
  write_json(args.out_path, detections_to_json(set));
  size_t lanes = 0;
  for (const auto& s : set.scenes) lanes += s.lanes.size();
  msg << "wrote " << lanes << " lanes over " << set.scenes.size() << " scenes to " << args.out_path << '\n';
}

void cmd_calibrate(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                   const std::string& calib_data_path, const std::string& out_path, std::ostream& msg) {
  const Checkpoint ckpt = read_checkpoint(checkpoint_path);
  require_model(cfg.model, ckpt.config.model);
  const Dataset data = read_dataset(calib_data_path);
  if (data.samples.empty()) throw std::runtime_error("calibration dataset " + calib_data_path + " is empty");
  require_grid(cfg.grid, data.grid, "dataset " + calib_data_path);
  if (ckpt.train_seeds.overlaps(data.seeds())) {
    throw std::runtime_error("calibration seeds " + seeds_text(data.seeds()) + " overlap the training seeds " +
                             seeds_text(ckpt.train_seeds) + "; calibrate on a disjoint split");
  }
  const std::vector<SERecord> recs = collect_se(ckpt.model, data.samples, cfg, ckpt.supervision);
  const TemperatureParams t = fit_temperature(recs);
  std::array<double, 3> check{0.0, 0.0, 0.0};
  for (const SERecord& r : recs) {
    for (int q = 0; q < 3; ++q) check[q] += r.se[q] / (t.t[q] * r.variance[q]);
  }
  for (double& c : check) c /= static_cast<double>(recs.size());

  std::vector<CalibrationRecord> before, after;
  for (const SceneSample& s : data.samples) {
    const PredictionGrid preds = predict(ckpt.model, s.raster, cfg.grid);
    const auto b = calibration_records(detect_scene(preds, s.scene, cfg, cfg.eval.clustering, std::nullopt), s.scene, cfg);
    const auto a = calibration_records(detect_scene(preds, s.scene, cfg, cfg.eval.clustering, t), s.scene, cfg);
    before.insert(before.end(), b.begin(), b.end());
    after.insert(after.end(), a.begin(), a.end());
  }
  json j;
  j["meta"] = meta_json(config_hash(cfg), cfg.grid);
  j["supervision"] = to_string(ckpt.supervision);
  j["T_r"] = t.t[0];
  j["T_phi"] = t.t[1];
  j["T_dz"] = t.t[2];
  j["n_records"] = recs.size();
  j["nll_pre"] = mean_nll(recs, TemperatureParams{});
  j["nll_post"] = mean_nll(recs, t);
  j["mean_scaled_se"] = check;
  j["calib_seeds"] = {data.seeds().lo, data.seeds().hi};
  const int bins = cfg.eval.ence_bins;
  j["ence_pre"] = before.size() >= static_cast<size_t>(bins) ? json(ence(before, bins).ence) : json(nullptr);
  j["ence_post"] = after.size() >= static_cast<size_t>(bins) ? json(ence(after, bins).ence) : json(nullptr);
  write_json(out_path, j);
  msg << "T = (" << t.t[0] << ", " << t.t[1] << ", " << t.t[2] << ") from " << recs.size() << " records\n";
}

void cmd_eval(const ExperimentConfig& cfg, const EvalArgs& args, std::ostream& msg) {
  const Dataset data = read_dataset(args.data_path);
  if (!data.samples.empty()) require_grid(cfg.grid, data.grid, "dataset " + args.data_path);
  auto load = [&](const std::string& path) {
    DetectionSet set = detections_from_json(read_json(path));
    require_grid(cfg.grid, set.grid, "detections " + path);
    if (!args.calibration_path.empty()) apply_temperature(set, read_temperature(args.calibration_path));
    return set;
  };
  const DetectionSet primary = load(args.detections_path);
  const Evaluation ev = evaluate(primary.scenes, data.samples, cfg);
  json j;
  j["meta"] = meta_json(config_hash(cfg), cfg.grid);
  j["primary"] = evaluation_json(ev, primary);
  msg << to_string(primary.method) << ": AP " << ev.report.ap << ", AP_50 " << ev.report.ap50 << ", AP_90 "
      << ev.report.ap90 << '\n';
  std::optional<Evaluation> other;
  if (!args.compare_path.empty()) {
    const DetectionSet cmp = load(args.compare_path);
    other = evaluate(cmp.scenes, data.samples, cfg);
    j["compare"] = evaluation_json(*other, cmp);
    msg << to_string(cmp.method) << ": AP " << other->report.ap << ", AP_50 " << other->report.ap50
        << ", AP_90 " << other->report.ap90 << '\n';
  }
  write_json(args.out_path, j);
  if (!args.csv_path.empty()) {
    if (ev.calibration) write_csv(args.csv_path, *ev.calibration);
    if (other && other->calibration) write_csv(args.csv_path + ".compare.csv", *other->calibration);
  }
}

}  // namespace tilelane
