#include "tilelane/serialization.hpp"

#include "tilelane/base64.hpp"

#include <fstream>
#include <sstream>

namespace tilelane {

using nlohmann::json;

SeedRange Dataset::seeds() const {
  SeedRange r;
  for (const SceneSample& s : samples) {
    if (r.empty()) {
      r.lo = r.hi = s.scene.seed;
    } else {
      r.lo = std::min(r.lo, s.scene.seed);
      r.hi = std::max(r.hi, s.scene.seed);
    }
  }
  return r;
}

json grid_to_json(const GridConfig& g) {
  return {{"width_tiles", g.width_tiles},
          {"height_tiles", g.height_tiles},
          {"tile_width", g.tile_width},
          {"tile_length", g.tile_length},
          {"origin", {g.origin.x(), g.origin.y()}}};
}

GridConfig grid_from_json(const json& j) {
  GridConfig g;
  g.width_tiles = j.at("width_tiles").get<int>();
  g.height_tiles = j.at("height_tiles").get<int>();
  g.tile_width = j.at("tile_width").get<double>();
  g.tile_length = j.at("tile_length").get<double>();
  g.origin = Vec2(j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>());
  return g;
}

bool same_grid(const GridConfig& a, const GridConfig& b) {
  return a.width_tiles == b.width_tiles && a.height_tiles == b.height_tiles &&
         a.tile_width == b.tile_width && a.tile_length == b.tile_length && a.origin == b.origin;
}

json meta_json(const std::string& config_hash, const GridConfig& grid) {
  return {{"config_hash", config_hash}, {"tool_version", kToolVersion}, {"grid", grid_to_json(grid)}};
}

namespace {

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json pose_json(const CameraPose& p) { return {{"pitch", p.pitch}, {"height", p.height}}; }

CameraPose pose_from(const json& j) {
  CameraPose p;
  p.pitch = j.at("pitch").get<double>();
  p.height = j.at("height").get<double>();
  return p;
}

json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", encode_array(data)}};
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  const auto r = j.at("rows").get<Eigen::Index>();
  const auto c = j.at("cols").get<Eigen::Index>();
  if (r != rows || c != cols) {
    throw FormatError("checkpoint array " + name + " is " + std::to_string(r) + "x" + std::to_string(c) +
                      ", config expects " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  const auto data = decode_array<double>(j.at("data").get<std::string>());
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw FormatError("checkpoint array " + name + " has the wrong number of values");
  }
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

}  // namespace

json scene_to_json(const Scene& scene) {
  json waves = json::array();
  for (const SurfaceWave& w : scene.surface.waves) {
    waves.push_back({w.amplitude, w.wavelength, w.direction, w.phase});
  }
  json lanes = json::array();
  for (const Lane3D& l : scene.lanes) {
    std::vector<double> flat;
    for (const Vec3& p : l.points) flat.insert(flat.end(), {p.x(), p.y(), p.z()});
    lanes.push_back({{"id", l.id}, {"points", flat}});
  }
  return {{"seed", scene.seed},
          {"topology", std::string(to_string(scene.topology))},
          {"pose", pose_json(scene.pose)},
          {"surface", waves},
          {"lanes", lanes}};
}

Scene scene_from_json(const json& j) {
  Scene s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.topology = topology_from_string(j.at("topology").get<std::string>());
  s.pose = pose_from(j.at("pose"));
  for (const json& w : j.at("surface")) {
    s.surface.waves.push_back({w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(),
                               w.at(3).get<double>()});
  }
  for (const json& l : j.at("lanes")) {
    Lane3D lane;
    lane.id = l.at("id").get<int>();
    const auto flat = l.at("points").get<std::vector<double>>();
    if (flat.size() % 3 != 0) throw FormatError("lane points are not xyz triples");
    for (size_t k = 0; k < flat.size(); k += 3) lane.points.emplace_back(flat[k], flat[k + 1], flat[k + 2]);
    s.lanes.push_back(std::move(lane));
  }
  return s;
}

json raster_to_json(const ObservationRaster& r) {
  return {{"width", r.width},
          {"height", r.height},
          {"cell_width", r.cell_width},
          {"cell_length", r.cell_length},
          {"origin", {r.origin.x(), r.origin.y()}},
          {"evidence", encode_array(r.evidence)},
          {"heights", encode_array(r.heights)}};
}

ObservationRaster raster_from_json(const json& j) {
  ObservationRaster r;
  r.width = j.at("width").get<int>();
  r.height = j.at("height").get<int>();
  r.cell_width = j.at("cell_width").get<double>();
  r.cell_length = j.at("cell_length").get<double>();
  r.origin = Vec2(j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>());
  r.evidence = decode_array<float>(j.at("evidence").get<std::string>());
  r.heights = decode_array<float>(j.at("heights").get<std::string>());
  const size_t n = static_cast<size_t>(r.width) * r.height;
  if (r.evidence.size() != n || r.heights.size() != n) throw FormatError("raster size mismatch");
  return r;
}

void write_dataset(const std::string& path, const std::vector<SceneSample>& samples,
                   const std::string& config_hash, const GridConfig& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const json meta = meta_json(config_hash, grid);
  for (const SceneSample& s : samples) {
    json line = {{"meta", meta}, {"scene", scene_to_json(s.scene)}, {"raster", raster_to_json(s.raster)}};
    out << line.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  Dataset d;
  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string hash = j.at("meta").at("config_hash").get<std::string>();
      const GridConfig grid = grid_from_json(j.at("meta").at("grid"));
      if (first) {
        d.config_hash = hash;
        d.grid = grid;
        first = false;
      } else if (hash != d.config_hash || !same_grid(grid, d.grid)) {
        throw FormatError("scene generated with a different config");
      }
      d.samples.push_back({scene_from_json(j.at("scene")), raster_from_json(j.at("raster"))});
    } catch (const std::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return d;
}

std::string to_string(CheckpointStage s) { return s == CheckpointStage::kMeans ? "means" : "uncertainty"; }

json checkpoint_to_json(const Checkpoint& c) {
  json j;
  j["format"] = "tilelane-checkpoint";
  j["version"] = c.version;
  j["meta"] = meta_json(config_hash(c.config), c.config.grid);
  j["config"] = to_json(c.config);
  j["stage"] = to_string(c.stage);
  j["seed"] = c.seed;
  j["train_seeds"] = {c.train_seeds.lo, c.train_seeds.hi};
  j["supervision"] = to_string(c.supervision);
  j["weights"] = {{"w1", matrix_json(c.model.w1)},
                  {"b1", matrix_json(c.model.b1)},
                  {"w2", matrix_json(c.model.w2)},
                  {"b2", matrix_json(c.model.b2)}};
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("format", std::string()) != "tilelane-checkpoint") throw FormatError("not a checkpoint file");
  const int version = j.at("version").get<int>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  c.version = version;
  c.config = config_from_json(j.at("config"));
  const std::string stage = j.at("stage").get<std::string>();
  if (stage == "means") {
    c.stage = CheckpointStage::kMeans;
  } else if (stage == "uncertainty") {
    c.stage = CheckpointStage::kUncertainty;
  } else {
    throw FormatError("unknown checkpoint stage " + stage);
  }
  c.seed = j.at("seed").get<std::uint64_t>();
  c.train_seeds.lo = j.at("train_seeds").at(0).get<std::uint64_t>();
  c.train_seeds.hi = j.at("train_seeds").at(1).get<std::uint64_t>();
  c.supervision = j.at("supervision").get<std::string>() == "tile_local" ? UncertaintySupervision::kTileLocal
                                                                        : UncertaintySupervision::kGlobal;
  const ModelConfig& mc = c.config.model;
  c.model = ToyPredictor::zeros(mc);
  const json& w = j.at("weights");
  c.model.w1 = matrix_from(w.at("w1"), mc.hidden, mc.input_dim(), "w1");
  c.model.b1 = matrix_from(w.at("b1"), mc.hidden, 1, "b1");
  c.model.w2 = matrix_from(w.at("w2"), mc.output_dim(), mc.hidden, "w2");
  c.model.b2 = matrix_from(w.at("b2"), mc.output_dim(), 1, "b2");
  if (!c.model.finite()) throw FormatError("checkpoint contains non-finite weights");
  return c;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_json(path, checkpoint_to_json(ckpt));
}

Checkpoint read_checkpoint(const std::string& path) {
  try {
    return checkpoint_from_json(read_json(path));
  } catch (const FormatError&) {
    throw;
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

json detections_to_json(const DetectionSet& set) {
  json scenes = json::array();
  for (const SceneDetections& sd : set.scenes) {
    json lanes = json::array();
    for (const LaneDetection& d : sd.lanes) {
      json pts = json::array();
      for (const LanePoint& p : d.points) {
        std::vector<double> cov(p.covariance.data(), p.covariance.data() + 9);
        pts.push_back({{"tile", {p.i, p.j}},
                       {"r", p.r},
                       {"phi", p.phi},
                       {"dz", p.dz},
                       {"variance", p.variance},
                       {"road", vec3_json(p.road_point)},
                       {"camera", vec3_json(p.point)},
                       {"direction", vec3_json(p.direction)},
                       {"covariance", cov},
                       {"score", p.score}});
      }
      lanes.push_back({{"score", d.score}, {"members", d.members}, {"points", pts}});
    }
    scenes.push_back({{"seed", sd.seed}, {"pose", pose_json(sd.pose)}, {"lanes", lanes}});
  }
  json j;
  j["format"] = "tilelane-detections";
  j["meta"] = meta_json(set.config_hash, set.grid);
  j["clustering"] = to_string(set.method);
  j["supervision"] = to_string(set.supervision);
  if (set.temperature) {
    j["temperature"] = {{"T_r", set.temperature->t[0]}, {"T_phi", set.temperature->t[1]},
                        {"T_dz", set.temperature->t[2]}};
  }
  j["scenes"] = scenes;
  return j;
}

DetectionSet detections_from_json(const json& j) {
  if (j.value("format", std::string()) != "tilelane-detections") throw FormatError("not a detections file");
  DetectionSet set;
  set.config_hash = j.at("meta").at("config_hash").get<std::string>();
  set.grid = grid_from_json(j.at("meta").at("grid"));
  set.method = j.at("clustering").get<std::string>() == "greedy" ? ClusterMethod::kGreedy : ClusterMethod::kEmbedding;
  set.supervision = j.at("supervision").get<std::string>() == "tile_local" ? UncertaintySupervision::kTileLocal
                                                                          : UncertaintySupervision::kGlobal;
  if (j.contains("temperature")) {
    const json& t = j.at("temperature");
    set.temperature = TemperatureParams{{t.at("T_r").get<double>(), t.at("T_phi").get<double>(),
                                         t.at("T_dz").get<double>()}};
  }
  for (const json& s : j.at("scenes")) {
    SceneDetections sd;
    sd.seed = s.at("seed").get<std::uint64_t>();
    sd.pose = pose_from(s.at("pose"));
    for (const json& l : s.at("lanes")) {
      LaneDetection d;
      d.score = l.at("score").get<double>();
      d.members = l.at("members").get<std::vector<int>>();
      for (const json& p : l.at("points")) {
        LanePoint lp;
        lp.i = p.at("tile").at(0).get<int>();
        lp.j = p.at("tile").at(1).get<int>();
        lp.r = p.at("r").get<double>();
        lp.phi = p.at("phi").get<double>();
        lp.dz = p.at("dz").get<double>();
        lp.variance = p.at("variance").get<std::array<double, 3>>();
        lp.road_point = vec3_from(p.at("road"));
        lp.point = vec3_from(p.at("camera"));
        lp.direction = vec3_from(p.at("direction"));
        const auto cov = p.at("covariance").get<std::vector<double>>();
        if (cov.size() != 9) throw FormatError("covariance must have 9 entries");
        lp.covariance = Eigen::Map<const Mat3>(cov.data());
        lp.score = p.at("score").get<double>();
        d.points.push_back(lp);
      }
      sd.lanes.push_back(std::move(d));
    }
    set.scenes.push_back(std::move(sd));
  }
  return set;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& j, int indent) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(indent) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace tilelane
