// Copyright 2026 The laneval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch.hpp>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "laneval/scene_io.hpp"
#include "laneval/synthetic.hpp"

using namespace laneval;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("laneval_io_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

SceneArchive sample_scene() {
  SceneSpec spec;
  spec.frames = 3;
  spec.lanes = 3;
  spec.areas = 2;
  spec.traffic_elements = 2;
  spec.seed = 42;
  return generate_scene(spec);
}

}  // namespace

TEST_CASE("scene archives round-trip through JSON", "[scene_io]") {
  TempDir dir;
  const SceneArchive original = sample_scene();
  const std::string path = dir.file("scene.json");
  write_scene(original, path);
  const SceneArchive loaded = load_ground_truth(path);

  CHECK(loaded.scene_id == original.scene_id);
  REQUIRE(loaded.frames.size() == original.frames.size());
  for (std::size_t f = 0; f < loaded.frames.size(); ++f) {
    const Frame& a = loaded.frames[f];
    const Frame& b = original.frames[f];
    CHECK(a.frame_id == b.frame_id);
    REQUIRE(a.lane_segments.size() == b.lane_segments.size());
    for (std::size_t i = 0; i < a.lane_segments.size(); ++i) {
      CHECK(a.lane_segments[i].id == b.lane_segments[i].id);
      CHECK(a.lane_segments[i].left_type == b.lane_segments[i].left_type);
      for (std::size_t k = 0; k < a.lane_segments[i].centerline.size(); ++k)
        CHECK(point_distance(a.lane_segments[i].centerline[k],
                             b.lane_segments[i].centerline[k]) < 1e-9);
    }
    CHECK(a.topology.ll_scores == b.topology.ll_scores);
    CHECK(a.topology.lt_scores == b.topology.lt_scores);
    REQUIRE(loaded.sd_maps[f].has_value());
    CHECK(loaded.sd_maps[f]->polylines.size() ==
          original.sd_maps[f]->polylines.size());
  }

  // Serialization is canonical: write(load(write(x))) == write(x).
  const std::string again = dir.file("again.json");
  write_scene(loaded, again);
  CHECK(read_text_file(path) == read_text_file(again));
}

TEST_CASE("loader rejects planted invariant violations", "[scene_io]") {
  TempDir dir;
  const SceneArchive scene = sample_scene();

  SECTION("short lane polyline names the instance") {
    SceneArchive bad = scene;
    bad.frames[1].lane_segments[0].centerline.points.resize(10);
    const std::string path = dir.file("bad.json");
    write_scene(bad, path);
    CHECK_THROWS_WITH(load_ground_truth(path),
                      Catch::Contains("lane_segment id=1") &&
                          Catch::Contains("centerline"));
  }
  SECTION("non-binary ground-truth topology") {
    SceneArchive bad = scene;
    bad.frames[0].topology.ll_scores.at(0, 1) = 0.5;
    const std::string path = dir.file("bad.json");
    write_scene(bad, path);
    CHECK_THROWS_AS(load_ground_truth(path), io_error);
    CHECK_NOTHROW(load_predictions(path));
  }
  SECTION("degenerate traffic element box") {
    SceneArchive bad = scene;
    bad.frames[0].traffic_elements[0].box.x2 =
        bad.frames[0].traffic_elements[0].box.x1;
    const std::string path = dir.file("bad.json");
    write_scene(bad, path);
    CHECK_THROWS_WITH(load_ground_truth(path), Catch::Contains("degenerate box"));
  }
  SECTION("duplicate instance id") {
    SceneArchive bad = scene;
    bad.frames[0].areas[1].id = bad.frames[0].areas[0].id;
    const std::string path = dir.file("bad.json");
    write_scene(bad, path);
    CHECK_THROWS_WITH(load_ground_truth(path), Catch::Contains("duplicate"));
  }
  SECTION("out-of-range geometry") {
    SceneArchive bad = scene;
    for (Point3& p : bad.frames[0].areas[0].curve.points) p.x += 200.0;
    const std::string path = dir.file("bad.json");
    write_scene(bad, path);
    CHECK_THROWS_WITH(load_ground_truth(path), Catch::Contains("BEV range"));
  }
  SECTION("unsorted frame ids") {
    SceneArchive bad = scene;
    std::swap(bad.frames[0], bad.frames[1]);
    const std::string path = dir.file("bad.json");
    write_scene(bad, path);
    CHECK_THROWS_WITH(load_ground_truth(path), Catch::Contains("sorted"));
  }
  SECTION("confidence outside the unit interval") {
    SceneArchive bad = scene;
    bad.frames[0].lane_segments[0].confidence = 1.5;
    const std::string path = dir.file("bad.json");
    write_scene(bad, path);
    CHECK_THROWS_WITH(load_predictions(path), Catch::Contains("confidence"));
  }
  SECTION("line type outside the vocabulary") {
    SceneArchive bad = scene;
    bad.frames[0].lane_segments[0].left_type = 9;
    const std::string path = dir.file("bad.json");
    write_scene(bad, path);
    CHECK_THROWS_WITH(load_ground_truth(path), Catch::Contains("line type"));
  }
  SECTION("area class outside the vocabulary") {
    SceneArchive bad = scene;
    bad.frames[0].areas[0].class_id = 5;
    const std::string path = dir.file("bad.json");
    write_scene(bad, path);
    CHECK_THROWS_WITH(load_ground_truth(path), Catch::Contains("area class"));
  }
  SECTION("negative pixel coordinates") {
    SceneArchive bad = scene;
    bad.frames[0].traffic_elements[0].box.x1 = -10.0;
    const std::string path = dir.file("bad.json");
    write_scene(bad, path);
    CHECK_THROWS_WITH(load_ground_truth(path), Catch::Contains("negative pixel"));
  }
  SECTION("degenerate single-point polyline") {
    SceneArchive bad = scene;
    for (Point3& p : bad.frames[0].areas[0].curve.points) p = {1.0, 2.0, 0.0};
    const std::string path = dir.file("bad.json");
    write_scene(bad, path);
    CHECK_THROWS_WITH(load_ground_truth(path), Catch::Contains("degenerate polyline"));
  }
}

TEST_CASE("loader reports schema and parse problems precisely", "[scene_io]") {
  TempDir dir;

  SECTION("version mismatch") {
    const std::string path = dir.file("version.json");
    std::ofstream(path) << R"({"schema_version":"2.4","scene_id":"x","frames":[]})";
    try {
      load_scene(path);
      FAIL("expected io_error");
    } catch (const io_error& e) {
      CHECK(e.kind() == io_error::Kind::kVersion);
      CHECK(std::string(e.what()).find("2.4") != std::string::npos);
    }
  }
  SECTION("malformed JSON carries a location") {
    const std::string path = dir.file("broken.json");
    std::ofstream(path) << "{\"schema_version\": \"1.0\", \"frames\": [}";
    try {
      load_scene(path);
      FAIL("expected io_error");
    } catch (const io_error& e) {
      CHECK(e.kind() == io_error::Kind::kParse);
    }
  }
  SECTION("missing field names its path") {
    const std::string path = dir.file("field.json");
    std::ofstream(path)
        << R"({"schema_version":"1.0","scene_id":"x","frames":[{"frame_id":"0",)"
        << R"("lane_segments":[{"id":1,"class_id":0,"confidence":1.0}]}]})";
    CHECK_THROWS_WITH(load_scene(path), Catch::Contains("centerline"));
  }
  SECTION("topology edge index out of range") {
    const std::string path = dir.file("edge.json");
    std::ofstream(path)
        << R"({"schema_version":"1.0","scene_id":"x","frames":[{"frame_id":"0",)"
        << R"("topology":{"ll_edges":[[0,4]]}}]})";
    CHECK_THROWS_WITH(load_scene(path), Catch::Contains("out of range"));
  }
  SECTION("missing file") {
    CHECK_THROWS_AS(load_scene(dir.file("absent.json")), io_error);
  }
}

TEST_CASE("sparse edges accept implicit and explicit scores", "[scene_io]") {
  TempDir dir;
  const std::string path = dir.file("edges.json");
  std::ofstream(path) << R"({
    "schema_version": "1.0",
    "scene_id": "x",
    "frames": [{
      "frame_id": "0",
      "lane_segments": [],
      "areas": [],
      "traffic_elements": [
        {"id": 1, "class_id": 0, "confidence": 0.9, "box": [0, 0, 10, 10]},
        {"id": 2, "class_id": 0, "confidence": 0.8, "box": [20, 0, 30, 10]}
      ],
      "topology": {"ll_edges": [], "lt_edges": []}
    }]
  })";
  const SceneArchive scene = load_predictions(path);
  CHECK(scene.frames[0].traffic_elements.size() == 2);

  // Prediction scores serialize explicitly, implicit ones read back as 1.
  SceneArchive out = scene;
  out.frames[0].lane_segments.clear();
  write_scene(out, dir.file("echo.json"));
  CHECK_NOTHROW(load_predictions(dir.file("echo.json")));
}

TEST_CASE("datasets load from files and directories alike", "[scene_io]") {
  TempDir dir;
  for (int s = 0; s < 3; ++s) {
    SceneSpec spec;
    spec.lanes = 2;
    spec.areas = 1;
    spec.traffic_elements = 1;
    spec.seed = static_cast<std::uint64_t>(s);
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04d.json", s);
    write_scene(generate_scene(spec), dir.file(name));
  }
  const auto scenes = load_dataset(dir.path.string(), {.ground_truth = true});
  REQUIRE(scenes.size() == 3);
  CHECK(scenes[0].scene_id == "synth-0");
  CHECK(scenes[2].scene_id == "synth-2");

  const auto single = load_dataset(dir.file("scene_0000.json"));
  CHECK(single.size() == 1);

  CHECK_THROWS_AS(load_dataset((dir.path / "empty").string()), io_error);
}

TEST_CASE("reports serialize with sorted keys and an embedded config",
          "[scene_io]") {
  MetricsReport report;
  report.det_l = 0.5;
  report.det_a = 0.25;
  report.det_t = 1.0;
  report.top_ll = 0.36;
  report.top_lt = 0.49;
  report.olus = olus(0.5, 0.25, 1.0, 0.36, 0.49);
  report.per_class["det_t/class=0"] = 1.0;
  report.per_threshold["det_l/frechet@1"] = 0.5;

  const std::string json_text = report_to_json(report, MetricConfig{});
  const auto doc = nlohmann::json::parse(json_text);
  CHECK(doc["schema_version"] == "1.0");
  CHECK(doc["metrics"]["olus"].get<double>() == Approx(report.olus));
  CHECK(doc["config"]["frechet_thresholds"].size() == 3);
  CHECK(doc["config"].find("workers") == doc["config"].end());
  CHECK(doc["per_threshold"]["det_l/frechet@1"] == 0.5);

  const std::string table = report_to_table(report);
  CHECK(table.find("OLUS") != std::string::npos);
  CHECK(table.find("0.5") != std::string::npos);

  TempDir dir;
  write_report(report, MetricConfig{}, dir.file("report.json"));
  CHECK(read_text_file(dir.file("report.json")) == json_text);
}
