#include "tilelane/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace tilelane {

using nlohmann::json;

std::string to_string(UncertaintySupervision s) {
  return s == UncertaintySupervision::kGlobal ? "global" : "tile_local";
}

std::string to_string(ClusterMethod m) { return m == ClusterMethod::kEmbedding ? "embedding" : "greedy"; }

namespace {

UncertaintySupervision supervision_from_string(const std::string& s) {
  if (s == "global") return UncertaintySupervision::kGlobal;
  if (s == "tile_local") return UncertaintySupervision::kTileLocal;
  throw ConfigError("train.supervision: expected \"global\" or \"tile_local\", got \"" + s + "\"");
}

ClusterMethod cluster_from_string(const std::string& s) {
  if (s == "embedding") return ClusterMethod::kEmbedding;
  if (s == "greedy") return ClusterMethod::kGreedy;
  throw ConfigError("eval.clustering: expected \"embedding\" or \"greedy\", got \"" + s + "\"");
}

// Reads keys of one section, remembering which ones were consumed.
class Section {
 public:
  Section(const json& root, const std::string& name) : name_(name) {
    if (root.contains(name)) {
      node_ = &root.at(name);
      if (!node_->is_object()) throw ConfigError(name + ": expected an object");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    known_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    try {
      out = node_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  const json* raw(const char* key) {
    known_.insert(key);
    if (!node_ || !node_->contains(key)) return nullptr;
    return &node_->at(key);
  }

  void finish() const {
    if (!node_) return;
    for (auto it = node_->begin(); it != node_->end(); ++it) {
      if (!known_.count(it.key())) throw ConfigError("unknown config key: " + name_ + "." + it.key());
    }
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> known_;
};

}  // namespace

void ExperimentConfig::validate() const {
  try {
    grid.validate();
    scene.validate();
    noise.validate();
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(loss.delta_pull > 0.0) || !(loss.delta_push > loss.delta_pull)) {
    throw ConfigError("loss: need 0 < delta_pull < delta_push");
  }
  if (loss.embedding_weight < 0.0) throw ConfigError("loss.embedding_weight must be >= 0");
  if (train.steps_means < 0 || train.steps_uncertainty < 0) throw ConfigError("train: steps must be >= 0");
  if (train.batch_scenes < 1) throw ConfigError("train.batch_scenes must be >= 1");
  if (!(train.lr > 0.0) || !(train.lr_uncertainty > 0.0)) throw ConfigError("train: learning rates must be > 0");
  if (train.beta1 < 0.0 || train.beta1 >= 1.0 || train.beta2 <= 0.0 || train.beta2 >= 1.0) {
    throw ConfigError("train: betas must lie in [0, 1)");
  }
  if (train.log_every < 1) throw ConfigError("train.log_every must be >= 1");
  if (eval.score_threshold < 0.0 || eval.score_threshold > 1.0) {
    throw ConfigError("eval.score_threshold must lie in [0, 1]");
  }
  if (!(eval.assoc_distance > 0.0)) throw ConfigError("eval.assoc_distance must be > 0");
  if (eval.iou_thresholds.empty()) throw ConfigError("eval.iou_thresholds must not be empty");
  for (double t : eval.iou_thresholds) {
    if (!(t > 0.0) || t > 1.0) throw ConfigError("eval.iou_thresholds must lie in (0, 1]");
  }
  if (!(eval.se_iou > 0.0) || eval.se_iou > 1.0) throw ConfigError("eval.se_iou must lie in (0, 1]");
  if (eval.ence_bins < 1) throw ConfigError("eval.ence_bins must be >= 1");
  if (splits.n_train < 0 || splits.n_calib < 0 || splits.n_test < 0) {
    throw ConfigError("splits: counts must be >= 0");
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["grid"] = {{"width_tiles", c.grid.width_tiles},
               {"height_tiles", c.grid.height_tiles},
               {"tile_width", c.grid.tile_width},
               {"tile_length", c.grid.tile_length},
               {"origin", {c.grid.origin.x(), c.grid.origin.y()}}};
  const SceneConfig& s = c.scene;
  j["scene"] = {{"topology", s.topology ? std::string(to_string(*s.topology)) : std::string("mixed")},
                {"min_lanes", s.min_lanes},
                {"max_lanes", s.max_lanes},
                {"lane_spacing", s.lane_spacing},
                {"max_heading", s.max_heading},
                {"max_quadratic", s.max_quadratic},
                {"max_cubic", s.max_cubic},
                {"curve_curvature_min", s.curve_curvature_min},
                {"curve_curvature_max", s.curve_curvature_max},
                {"split_ramp", s.split_ramp},
                {"short_start_min", s.short_start_min},
                {"short_start_max", s.short_start_max},
                {"surface_waves", s.surface_waves},
                {"max_amplitude", s.max_amplitude},
                {"min_wavelength", s.min_wavelength},
                {"max_wavelength", s.max_wavelength},
                {"pitch_min", s.pitch_min},
                {"pitch_max", s.pitch_max},
                {"height_min", s.height_min},
                {"height_max", s.height_max},
                {"sample_step", s.sample_step},
                {"min_lane_length", s.min_lane_length}};
  const NoiseConfig& n = c.noise;
  j["noise"] = {{"paint_radius", n.paint_radius},
                {"jitter", n.jitter_m},
                {"dropout", n.dropout},
                {"max_occlusions", n.max_occlusions},
                {"occlusion_min_width", n.occlusion_min_width},
                {"occlusion_max_width", n.occlusion_max_width},
                {"occlusion_min_length", n.occlusion_min_length},
                {"occlusion_max_length", n.occlusion_max_length},
                {"height_noise", n.height_noise},
                {"clutter", n.clutter}};
  const ModelConfig& m = c.model;
  j["model"] = {{"n_bins", m.n_bins},
                {"embedding_dim", m.embedding_dim},
                {"hidden", m.hidden},
                {"patch_k", m.patch_k},
                {"upsample", m.upsample},
                {"position_features", m.position_features}};
  j["loss"] = {{"delta_pull", c.loss.delta_pull},
               {"delta_push", c.loss.delta_push},
               {"embedding_weight", c.loss.embedding_weight}};
  const TrainConfig& t = c.train;
  j["train"] = {{"steps_means", t.steps_means},
                {"steps_uncertainty", t.steps_uncertainty},
                {"batch_scenes", t.batch_scenes},
                {"lr", t.lr},
                {"lr_uncertainty", t.lr_uncertainty},
                {"decay_fraction", t.decay_fraction},
                {"decay_factor", t.decay_factor},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"log_every", t.log_every},
                {"supervision", to_string(t.supervision)}};
  const EvalConfig& e = c.eval;
  j["eval"] = {{"score_threshold", e.score_threshold},
               {"assoc_distance", e.assoc_distance},
               {"iou_thresholds", e.iou_thresholds},
               {"se_iou", e.se_iou},
               {"ence_bins", e.ence_bins},
               {"clustering", to_string(e.clustering)}};
  const SplitConfig& p = c.splits;
  j["splits"] = {{"train_seed", p.train_seed}, {"n_train", p.n_train}, {"calib_seed", p.calib_seed},
                 {"n_calib", p.n_calib},       {"test_seed", p.test_seed}, {"n_test", p.n_test}};
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  static const std::set<std::string> kSections = {"grid", "scene", "noise", "model",
                                                  "loss", "train",  "eval",  "splits"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!kSections.count(it.key())) throw ConfigError("unknown config key: " + it.key());
  }
  ExperimentConfig c;
  {
    Section s(j, "grid");
    s.get("width_tiles", c.grid.width_tiles);
    s.get("height_tiles", c.grid.height_tiles);
    s.get("tile_width", c.grid.tile_width);
    s.get("tile_length", c.grid.tile_length);
    bool origin_given = false;
    if (const json* o = s.raw("origin")) {
      if (!o->is_array() || o->size() != 2) throw ConfigError("grid.origin: expected [x, y]");
      c.grid.origin = Vec2((*o)[0].get<double>(), (*o)[1].get<double>());
      origin_given = true;
    }
    if (!origin_given) c.grid.origin = Vec2(-0.5 * c.grid.width_tiles * c.grid.tile_width, 0.0);
    s.finish();
  }
  {
    Section s(j, "scene");
    SceneConfig& v = c.scene;
    std::string topo = "mixed";
    s.get("topology", topo);
    if (topo == "mixed") {
      v.topology.reset();
    } else {
      try {
        v.topology = topology_from_string(topo);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("scene.topology: ") + e.what());
      }
    }
    s.get("min_lanes", v.min_lanes);
    s.get("max_lanes", v.max_lanes);
    s.get("lane_spacing", v.lane_spacing);
    s.get("max_heading", v.max_heading);
    s.get("max_quadratic", v.max_quadratic);
    s.get("max_cubic", v.max_cubic);
    s.get("curve_curvature_min", v.curve_curvature_min);
    s.get("curve_curvature_max", v.curve_curvature_max);
    s.get("split_ramp", v.split_ramp);
    s.get("short_start_min", v.short_start_min);
    s.get("short_start_max", v.short_start_max);
    s.get("surface_waves", v.surface_waves);
    s.get("max_amplitude", v.max_amplitude);
    s.get("min_wavelength", v.min_wavelength);
    s.get("max_wavelength", v.max_wavelength);
    s.get("pitch_min", v.pitch_min);
    s.get("pitch_max", v.pitch_max);
    s.get("height_min", v.height_min);
    s.get("height_max", v.height_max);
    s.get("sample_step", v.sample_step);
    s.get("min_lane_length", v.min_lane_length);
    s.finish();
  }
  {
    Section s(j, "noise");
    NoiseConfig& v = c.noise;
    s.get("paint_radius", v.paint_radius);
    s.get("jitter", v.jitter_m);
    s.get("dropout", v.dropout);
    s.get("max_occlusions", v.max_occlusions);
    s.get("occlusion_min_width", v.occlusion_min_width);
    s.get("occlusion_max_width", v.occlusion_max_width);
    s.get("occlusion_min_length", v.occlusion_min_length);
    s.get("occlusion_max_length", v.occlusion_max_length);
    s.get("height_noise", v.height_noise);
    s.get("clutter", v.clutter);
    s.finish();
  }
  {
    Section s(j, "model");
    ModelConfig& v = c.model;
    s.get("n_bins", v.n_bins);
    s.get("embedding_dim", v.embedding_dim);
    s.get("hidden", v.hidden);
    s.get("patch_k", v.patch_k);
    s.get("upsample", v.upsample);
    s.get("position_features", v.position_features);
    s.finish();
  }
  {
    Section s(j, "loss");
    s.get("delta_pull", c.loss.delta_pull);
    s.get("delta_push", c.loss.delta_push);
    s.get("embedding_weight", c.loss.embedding_weight);
    s.finish();
  }
  {
    Section s(j, "train");
    TrainConfig& v = c.train;
    s.get("steps_means", v.steps_means);
    s.get("steps_uncertainty", v.steps_uncertainty);
    s.get("batch_scenes", v.batch_scenes);
    s.get("lr", v.lr);
    s.get("lr_uncertainty", v.lr_uncertainty);
    s.get("decay_fraction", v.decay_fraction);
    s.get("decay_factor", v.decay_factor);
    s.get("beta1", v.beta1);
    s.get("beta2", v.beta2);
    s.get("log_every", v.log_every);
    std::string sup = to_string(v.supervision);
    s.get("supervision", sup);
    v.supervision = supervision_from_string(sup);
    s.finish();
  }
  {
    Section s(j, "eval");
    EvalConfig& v = c.eval;
    s.get("score_threshold", v.score_threshold);
    s.get("assoc_distance", v.assoc_distance);
    s.get("iou_thresholds", v.iou_thresholds);
    s.get("se_iou", v.se_iou);
    s.get("ence_bins", v.ence_bins);
    std::string method = to_string(v.clustering);
    s.get("clustering", method);
    v.clustering = cluster_from_string(method);
    s.finish();
  }
  {
    Section s(j, "splits");
    SplitConfig& v = c.splits;
    s.get("train_seed", v.train_seed);
    s.get("n_train", v.n_train);
    s.get("calib_seed", v.calib_seed);
    s.get("n_calib", v.n_calib);
    s.get("test_seed", v.test_seed);
    s.get("n_test", v.n_test);
    s.finish();
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(to_json(cfg).dump())));
  return buf;
}

}  // namespace tilelane
