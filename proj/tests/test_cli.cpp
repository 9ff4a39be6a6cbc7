#include <doctest.h>

#include "tilelane/base64.hpp"
#include "tilelane/commands.hpp"
#include "tilelane/pipeline.hpp"
#include "tilelane/serialization.hpp"

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

using namespace tilelane;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("tilelane_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.model.hidden = 8;
  cfg.train.steps_means = 30;
  cfg.train.steps_uncertainty = 10;
  cfg.train.batch_scenes = 2;
  cfg.train.log_every = 5;
  cfg.train.supervision = UncertaintySupervision::kTileLocal;
  return cfg;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults carry the published constants") {
  const ExperimentConfig cfg;
  CHECK(cfg.grid.width_tiles == 16);
  CHECK(cfg.grid.height_tiles == 26);
  CHECK(cfg.grid.tile_width == 1.28);
  CHECK(cfg.grid.tile_length == 3.0);
  CHECK(cfg.loss.delta_pull == 0.1);
  CHECK(cfg.loss.delta_push == 3.0);
  CHECK(cfg.eval.score_threshold == 0.3);
  CHECK(cfg.eval.assoc_distance == 1.0);
  REQUIRE(cfg.eval.iou_thresholds.size() == 9);
  for (int k = 0; k < 9; ++k) CHECK(cfg.eval.iou_thresholds[k] == doctest::Approx((k + 1) / 10.0));
}

TEST_CASE("config parsing") {
  const ExperimentConfig cfg = small_config();
  const ExperimentConfig back = config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK(config_hash(back) == config_hash(cfg));

  const ExperimentConfig partial = config_from_json(nlohmann::json::parse(R"({"loss": {"delta_push": 4.0}})"));
  CHECK(partial.loss.delta_push == 4.0);
  CHECK(partial.loss.delta_pull == 0.1);
  CHECK(config_hash(partial) != config_hash(ExperimentConfig{}));

  const std::string unknown = error_of([] { config_from_json(nlohmann::json::parse(R"({"loss": {"delta_psh": 1}})")); });
  CHECK(unknown.find("loss.delta_psh") != std::string::npos);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"grid": {"width_tiles": "wide"}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"loss": {"delta_pull": 5.0}})")), ConfigError);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("base64 reference vectors and arrays") {
  const std::pair<std::string, std::string> vectors[] = {{"", ""},         {"f", "Zg=="},     {"fo", "Zm8="},
                                                         {"foo", "Zm9v"},  {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="},
                                                         {"foobar", "Zm9vYmFy"}};
  for (const auto& [plain, coded] : vectors) {
    CHECK(base64_encode(reinterpret_cast<const std::uint8_t*>(plain.data()), plain.size()) == coded);
    const auto bytes = base64_decode(coded);
    CHECK(std::string(bytes.begin(), bytes.end()) == plain);
  }
  CHECK_THROWS(base64_decode("Zm9"));
  CHECK_THROWS(base64_decode("Zm9*"));

  const std::vector<double> d{0.0, -1.5, 3.25e-7, 1e300};
  CHECK(decode_array<double>(encode_array(d)) == d);
  const std::vector<float> f{1.0f, 0.5f, -2.0f};
  CHECK(decode_array<float>(encode_array(f)) == f);
  CHECK_THROWS(decode_array<double>(encode_array(f)));
}

TEST_CASE("scenes, rasters and checkpoints survive serialization") {
  const ExperimentConfig cfg = small_config();
  const SceneSample s = make_sample(cfg, 3);
  CHECK(scene_to_json(scene_from_json(scene_to_json(s.scene))) == scene_to_json(s.scene));
  CHECK(raster_to_json(raster_from_json(raster_to_json(s.raster))) == raster_to_json(s.raster));

  Checkpoint c;
  c.config = cfg;
  c.model = ToyPredictor::initialize(cfg.model, 5);
  c.train_seeds = {10, 19};
  const Checkpoint back = checkpoint_from_json(checkpoint_to_json(c));
  CHECK(checkpoint_to_json(back) == checkpoint_to_json(c));
  CHECK(back.train_seeds.lo == 10);

  nlohmann::json bad = checkpoint_to_json(c);
  bad["version"] = kCheckpointVersion + 1;
  CHECK_THROWS_AS(checkpoint_from_json(bad), FormatError);
}

TEST_CASE("commands are byte-for-byte deterministic") {
  TempDir dir;
  const ExperimentConfig cfg = small_config();
  std::ostringstream msg;
  for (const char* run : {"a", "b"}) {
    const std::string r(run);
    cmd_gen_data(cfg, dir / ("data_" + r), 6, 0, msg);
    cmd_gen_data(cfg, dir / ("test_" + r), 4, 500, msg);
    TrainArgs t;
    t.data_path = dir / ("data_" + r);
    t.out_path = dir / ("ckpt_" + r);
    t.log_path = dir / ("log_" + r);
    cmd_train(cfg, t, msg);
    InferArgs i;
    i.checkpoint_path = t.out_path;
    i.data_path = dir / ("test_" + r);
    i.out_path = dir / ("det_" + r);
    cmd_infer(cfg, i, msg);
    EvalArgs e;
    e.detections_path = i.out_path;
    e.data_path = i.data_path;
    e.out_path = dir / ("eval_" + r);
    e.csv_path = dir / ("csv_" + r);
    cmd_eval(cfg, e, msg);
  }
  for (const char* name : {"data_", "test_", "ckpt_", "log_", "det_", "eval_"}) {
    const std::string a = slurp(dir / (std::string(name) + "a"));
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(dir / (std::string(name) + "b")));
  }
  const std::string data = slurp(dir / "data_a");
  CHECK(std::count(data.begin(), data.end(), '\n') == 6);
}

TEST_CASE("commands refuse inconsistent inputs") {
  TempDir dir;
  const ExperimentConfig cfg = small_config();
  std::ostringstream msg;
  cmd_gen_data(cfg, dir / "train", 4, 0, msg);
  cmd_gen_data(cfg, dir / "empty", 0, 900, msg);
  TrainArgs t;
  t.data_path = dir / "train";
  t.out_path = dir / "ckpt";
  cmd_train(cfg, t, msg);

  InferArgs i;
  i.checkpoint_path = t.out_path;
  i.data_path = dir / "empty";
  i.out_path = dir / "det";
  cmd_infer(cfg, i, msg);
  CHECK(detections_from_json(read_json(i.out_path)).scenes.empty());

  ExperimentConfig other = cfg;
  other.model.n_bins = 12;
  const std::string mismatch = error_of([&] { cmd_infer(other, i, msg); });
  CHECK(mismatch.find("n_bins") != std::string::npos);
  CHECK(mismatch.find("16") != std::string::npos);
  CHECK(mismatch.find("12") != std::string::npos);

  const std::string overlap = error_of([&] { cmd_calibrate(cfg, t.out_path, dir / "train", dir / "cal", msg); });
  CHECK(overlap.find("overlap") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "cal"));

  ExperimentConfig wide = cfg;
  wide.grid.width_tiles = 20;
  wide.grid.origin = Vec2(-12.8, 0.0);
  EvalArgs e;
  e.detections_path = i.out_path;
  e.data_path = dir / "train";
  e.out_path = dir / "eval";
  CHECK(error_of([&] { cmd_eval(wide, e, msg); }).find("grid") != std::string::npos);

  TrainArgs u = t;
  u.stage = StageSelection::kUncertainty;
  CHECK_THROWS(cmd_train(cfg, u, msg));
  CHECK_THROWS(cmd_train(cfg, TrainArgs{dir / "empty", dir / "x"}, msg));
}
