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

#include <cmath>
#include <random>

#include "laneval/metrics.hpp"
#include "laneval/synthetic.hpp"

using namespace laneval;

namespace {

Polyline3 straight_line(double x0, double x1, double y, int n = 11) {
  Polyline3 line;
  for (int k = 0; k < n; ++k)
    line.points.push_back({x0 + (x1 - x0) * k / (n - 1), y, 0.0});
  return line;
}

std::vector<Frame> frames_of(const SceneArchive& scene) { return scene.frames; }

Frame shift_centerlines(Frame frame, double dy) {
  for (LaneSegment& ls : frame.lane_segments)
    for (Point3& p : ls.centerline.points) p.y += dy;
  return frame;
}

// Removes lane `index` from a frame, shrinking the topology matrices.
Frame remove_lane(Frame frame, std::size_t index) {
  frame.lane_segments.erase(frame.lane_segments.begin() +
                            static_cast<long>(index));
  const std::size_t n = frame.lane_segments.size();
  ScoreMatrix ll(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      ll.at(i, j) = frame.topology.ll_scores.at(i < index ? i : i + 1,
                                                j < index ? j : j + 1);
  ScoreMatrix lt(n, frame.traffic_elements.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < lt.cols(); ++j)
      lt.at(i, j) = frame.topology.lt_scores.at(i < index ? i : i + 1, j);
  frame.topology.ll_scores = std::move(ll);
  frame.topology.lt_scores = std::move(lt);
  return frame;
}

}  // namespace

TEST_CASE("identity evaluation scores exactly one everywhere", "[metrics]") {
  for (LaneLayout layout : {LaneLayout::kStraight, LaneLayout::kArc}) {
    SceneSpec spec;
    spec.frames = 5;
    spec.lanes = 4;
    spec.areas = 3;
    spec.traffic_elements = 3;
    spec.layout = layout;
    spec.seed = 11;
    const SceneArchive scene = generate_scene(spec);
    const MetricsReport report =
        evaluate_dataset(frames_of(scene), frames_of(scene));
    CHECK(report.det_l == 1.0);
    CHECK(report.det_a == 1.0);
    CHECK(report.det_t == 1.0);
    CHECK(report.top_ll == 1.0);
    CHECK(report.top_lt == 1.0);
    CHECK(report.olus == 1.0);
    for (const auto& [key, ap] : report.per_class) {
      INFO(key);
      CHECK(ap == 1.0);
    }
  }
}

TEST_CASE("missing predictions zero the detection metrics", "[metrics]") {
  const SceneArchive scene = generate_scene(3, 2, 2, LaneLayout::kStraight, 3);
  std::vector<Frame> empty = frames_of(scene);
  for (Frame& f : empty) {
    f.lane_segments.clear();
    f.areas.clear();
    f.traffic_elements.clear();
    f.topology = TopologyPrediction{ScoreMatrix(0, 0), ScoreMatrix(0, 0)};
  }
  const MetricsReport report = evaluate_dataset(empty, frames_of(scene));
  CHECK(report.det_l == 0.0);
  CHECK(report.det_a == 0.0);
  CHECK(report.det_t == 0.0);
  CHECK(report.top_ll == 0.0);
  CHECK(report.top_lt == 0.0);
  CHECK(report.olus == 0.0);
}

TEST_CASE("a rigid centerline offset gates the Frechet family", "[metrics]") {
  const SceneArchive scene = generate_scene(4, 0, 0, LaneLayout::kStraight, 5);
  std::vector<Frame> preds;
  for (const Frame& f : scene.frames) preds.push_back(shift_centerlines(f, 1.5));

  const MetricValue value = det_l(preds, frames_of(scene));
  // Frechet distance is exactly 1.5: thresholds 2 and 3 pass, 1 does not.
  CHECK(value.per_threshold.at("det_l/frechet@1") == 0.0);
  CHECK(value.per_threshold.at("det_l/frechet@2") == 1.0);
  CHECK(value.per_threshold.at("det_l/frechet@3") == 1.0);
  CHECK(value.per_class.at("det_l/frechet/class=0") == Approx(2.0 / 3.0));
  // Boundaries untouched: the Chamfer family stays perfect.
  CHECK(value.per_class.at("det_l/chamfer/class=0") == 1.0);
  CHECK(value.value == Approx((2.0 / 3.0 + 1.0) / 2.0));
}

TEST_CASE("area metric averages its two classes", "[metrics]") {
  const SceneArchive scene = generate_scene(2, 2, 0, LaneLayout::kStraight, 7);
  // Keep pedestrian crossings, miss every road boundary.
  std::vector<Frame> preds = frames_of(scene);
  for (Frame& f : preds) {
    std::vector<AreaInstance> kept;
    for (const AreaInstance& a : f.areas)
      if (a.class_id == kAreaPedestrianCrossing) kept.push_back(a);
    f.areas = std::move(kept);
  }
  const MetricValue value = det_a(preds, frames_of(scene));
  CHECK(value.value == Approx(0.5));
  CHECK(value.per_class.at("det_a/class=pedestrian_crossing") == 1.0);
  CHECK(value.per_class.at("det_a/class=road_boundary") == 0.0);
}

TEST_CASE("families without annotations score vacuously perfect", "[metrics]") {
  // No areas anywhere: nothing annotated, nothing claimed.
  const SceneArchive scene = generate_scene(3, 0, 2, LaneLayout::kStraight, 19);
  CHECK(det_a(frames_of(scene), frames_of(scene)).value == 1.0);

  // Entirely empty frames still evaluate to a perfect identity.
  const SceneArchive empty = generate_scene(0, 0, 0, LaneLayout::kStraight, 20);
  const MetricsReport report =
      evaluate_dataset(frames_of(empty), frames_of(empty));
  CHECK(report.olus == 1.0);
}

TEST_CASE("traffic metric respects the IoU gate", "[metrics]") {
  Frame gt;
  gt.frame_id = "000000";
  for (int k = 0; k < 3; ++k) {
    TrafficElement te;
    te.id = k + 1;
    te.class_id = 0;
    te.box = {100.0 + 200.0 * k, 100, 180.0 + 200.0 * k, 180};
    gt.traffic_elements.push_back(te);
  }
  gt.topology.ll_scores = ScoreMatrix(0, 0);
  gt.topology.lt_scores = ScoreMatrix(0, 3, 0.0);

  SECTION("IoU one half fails the 0.75 gate") {
    Frame pred = gt;
    for (TrafficElement& te : pred.traffic_elements) {
      const double w = te.box.width();
      const double shift = w / 3.0;  // IoU (w-s)/(w+s) = 0.5 at s = w/3
      te.box.x1 += shift;
      te.box.x2 += shift;
    }
    CHECK(det_t({pred}, {gt}).value == 0.0);
  }
  SECTION("an absent class halves the mean") {
    Frame two_class_gt = gt;
    two_class_gt.traffic_elements[2].class_id = 1;
    Frame pred = two_class_gt;
    pred.traffic_elements.pop_back();  // drop the only class-1 box
    const MetricValue value = det_t({pred}, {two_class_gt});
    CHECK(value.value == Approx(0.5));
    CHECK(value.per_class.at("det_t/class=0") == 1.0);
    CHECK(value.per_class.at("det_t/class=1") == 0.0);
  }
}

TEST_CASE("pred-only classes follow the vacuous policy flag", "[metrics]") {
  Frame gt;
  gt.frame_id = "000000";
  TrafficElement te;
  te.id = 1;
  te.class_id = 0;
  te.box = {100, 100, 180, 180};
  gt.traffic_elements.push_back(te);
  gt.topology.ll_scores = ScoreMatrix(0, 0);
  gt.topology.lt_scores = ScoreMatrix(0, 1, 0.0);

  Frame pred = gt;
  TrafficElement stray = te;
  stray.id = 2;
  stray.class_id = 5;
  stray.box = {500, 100, 580, 180};
  pred.traffic_elements.push_back(stray);
  pred.topology.lt_scores = ScoreMatrix(0, 2, 0.0);

  CHECK(det_t({pred}, {gt}).value == 1.0);  // default: excluded

  MetricConfig include;
  include.include_pred_only_classes = true;
  CHECK(det_t({pred}, {gt}, include).value == Approx(0.5));
}

TEST_CASE("lane-lane topology scores ranked edges per vertex", "[metrics]") {
  const SceneArchive scene = generate_scene(3, 0, 0, LaneLayout::kStraight, 2);
  const std::vector<Frame> gts = frames_of(scene);

  SECTION("binary-perfect scores give one") {
    CHECK(top_ll(gts, gts).value == 1.0);
  }
  SECTION("silent heads give zero") {
    std::vector<Frame> preds = gts;
    preds[0].topology.ll_scores = ScoreMatrix(3, 3, 0.0);
    CHECK(top_ll(preds, gts).value == 0.0);
  }
  SECTION("correct ranking with soft scores still gives one") {
    std::vector<Frame> preds = gts;
    ScoreMatrix soft(3, 3, 0.1);
    soft.at(0, 1) = 0.9;
    soft.at(1, 2) = 0.9;
    for (std::size_t i = 0; i < 3; ++i) soft.at(i, i) = 0.0;
    preds[0].topology.ll_scores = soft;
    CHECK(top_ll(preds, gts).value == 1.0);
  }
  SECTION("dimension mismatch is a hard error") {
    std::vector<Frame> preds = gts;
    preds[0].topology.ll_scores = ScoreMatrix(2, 2, 0.0);
    CHECK_THROWS_AS(top_ll(preds, gts), std::invalid_argument);
  }
}

TEST_CASE("lane-traffic topology follows detection quality", "[metrics]") {
  SceneSpec spec;
  spec.lanes = 4;
  spec.traffic_elements = 4;
  spec.areas = 0;
  spec.seed = 6;
  const SceneArchive scene = generate_scene(spec);
  const std::vector<Frame> gts = frames_of(scene);

  SECTION("perfect everything") { CHECK(top_lt(gts, gts).value == 1.0); }
  SECTION("undetected traffic elements zero the metric") {
    std::vector<Frame> preds = gts;
    preds[0].traffic_elements.clear();
    preds[0].topology.lt_scores = ScoreMatrix(4, 0);
    CHECK(top_lt(preds, gts).value == 0.0);
  }
  SECTION("half the edges zeroed halves the mean") {
    std::vector<Frame> preds = gts;
    preds[0].topology.lt_scores.at(0, 0) = 0.0;
    preds[0].topology.lt_scores.at(1, 1) = 0.0;
    CHECK(top_lt(preds, gts).value == Approx(0.5));
  }
}

TEST_CASE("the aggregate reproduces its closed form and rejects bad input",
          "[metrics]") {
  CHECK(olus(1, 1, 1, 1, 1) == 1.0);
  CHECK(olus(0, 0, 0, 0, 0) == 0.0);
  CHECK(olus(0.4295, 0.3472, 0.8215, 0.3648, 0.4191) ==
        Approx(0.56992).margin(1e-4));
  CHECK_THROWS_AS(olus(1.2, 0, 0, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(olus(0, 0, 0, -0.1, 0), std::invalid_argument);
}

TEST_CASE("the square root lifts topology terms above the plain mean",
          "[metrics]") {
  std::mt19937 rng(15);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  for (int iter = 0; iter < 100; ++iter) {
    const double a = unit(rng), b = unit(rng), c = unit(rng);
    const double d = unit(rng), e = unit(rng);
    CHECK(olus(a, b, c, d, e) > (a + b + c + d + e) / 5.0);
  }
}

TEST_CASE("deleting a matching prediction never raises detection metrics",
          "[metrics]") {
  SceneSpec spec;
  spec.frames = 3;
  spec.lanes = 5;
  spec.areas = 2;
  spec.traffic_elements = 2;
  spec.seed = 23;
  const SceneArchive scene = generate_scene(spec);
  const std::vector<Frame> gts = frames_of(scene);
  std::vector<Frame> preds = gts;

  double previous = det_l(preds, gts).value;
  CHECK(previous == 1.0);
  for (std::size_t removed = 0; removed < 4; ++removed) {
    preds[0] = remove_lane(preds[0], 0);
    const double current = det_l(preds, gts).value;
    CHECK(current <= previous + 1e-12);
    previous = current;
  }
}

TEST_CASE("zeroing a true edge never raises topology metrics", "[metrics]") {
  const SceneArchive scene = generate_scene(5, 0, 3, LaneLayout::kStraight, 29);
  const std::vector<Frame> gts = frames_of(scene);
  std::vector<Frame> preds = gts;
  double previous = top_ll(preds, gts).value;
  for (std::size_t i = 0; i + 1 < 5; ++i) {
    preds[0].topology.ll_scores.at(i, i + 1) = 0.0;
    const double current = top_ll(preds, gts).value;
    CHECK(current <= previous + 1e-12);
    previous = current;
  }
  CHECK(previous == 0.0);
}

TEST_CASE("the planar flag projects distances onto the BEV plane", "[metrics]") {
  const SceneArchive scene = generate_scene(3, 2, 0, LaneLayout::kStraight, 41);
  std::vector<Frame> preds = frames_of(scene);
  for (Frame& f : preds) {
    for (LaneSegment& ls : f.lane_segments)
      for (Polyline3* line : {&ls.centerline, &ls.left_boundary, &ls.right_boundary})
        for (Point3& p : line->points) p.z += 2.0;
    for (AreaInstance& a : f.areas)
      for (Point3& p : a.curve.points) p.z += 2.0;
  }

  // Full 3D: the 2 m vertical offset exceeds every Chamfer gate and the
  // tightest Frechet gate, leaving thresholds 2 and 3 passing.
  const MetricsReport spatial = evaluate_dataset(preds, frames_of(scene));
  CHECK(spatial.det_a == 0.0);
  CHECK(spatial.det_l == Approx((2.0 / 3.0 + 0.0) / 2.0));

  MetricConfig planar;
  planar.planar_distances = true;
  const MetricsReport flat = evaluate_dataset(preds, frames_of(scene), planar);
  CHECK(flat.det_a == 1.0);
  CHECK(flat.det_l == 1.0);
}

TEST_CASE("evaluation rejects misaligned frames", "[metrics]") {
  const SceneArchive scene = generate_scene(2, 1, 1, LaneLayout::kStraight, 1);
  std::vector<Frame> preds = frames_of(scene);
  SECTION("count mismatch") {
    preds.pop_back();
    CHECK_THROWS_WITH(evaluate_dataset(preds, frames_of(scene)),
                      Catch::Contains("frame count"));
  }
  SECTION("id mismatch names the frame") {
    preds[0].frame_id = "999999";
    CHECK_THROWS_WITH(evaluate_dataset(preds, frames_of(scene)),
                      Catch::Contains("999999"));
  }
}

TEST_CASE("metric config validation", "[metrics]") {
  MetricConfig cfg;
  cfg.frechet_thresholds = {2.0, 1.0};
  CHECK_THROWS_AS(cfg.require_valid(), std::invalid_argument);
  cfg.frechet_thresholds = {};
  CHECK_THROWS_AS(cfg.require_valid(), std::invalid_argument);
  cfg.frechet_thresholds = {-1.0};
  CHECK_THROWS_AS(cfg.require_valid(), std::invalid_argument);
  cfg = MetricConfig{};
  cfg.workers = 0;
  CHECK_THROWS_AS(cfg.require_valid(), std::invalid_argument);
  CHECK_NOTHROW(MetricConfig{}.require_valid());
}

TEST_CASE("worker counts never change the report", "[metrics]") {
  SceneSpec spec;
  spec.frames = 30;
  spec.lanes = 6;
  spec.areas = 4;
  spec.traffic_elements = 4;
  spec.seed = 99;
  const SceneArchive scene = generate_scene(spec);
  PerturbationSpec noise;
  noise.point_jitter_sigma = 0.7;
  noise.jitter_mode = JitterMode::kPerPoint;
  noise.drop_rate = 0.2;
  noise.false_positive_count = 2;
  noise.confidence_noise = 0.3;
  noise.seed = 12;
  const PerturbResult perturbed = perturb(scene, noise);

  MetricConfig serial;
  serial.workers = 1;
  MetricConfig parallel;
  parallel.workers = 4;
  const MetricsReport a =
      evaluate_dataset(perturbed.predictions.frames, frames_of(scene), serial);
  const MetricsReport b =
      evaluate_dataset(perturbed.predictions.frames, frames_of(scene), parallel);
  CHECK(a.det_l == b.det_l);
  CHECK(a.det_a == b.det_a);
  CHECK(a.det_t == b.det_t);
  CHECK(a.top_ll == b.top_ll);
  CHECK(a.top_lt == b.top_lt);
  CHECK(a.olus == b.olus);
  CHECK(a.per_class == b.per_class);
  CHECK(a.per_threshold == b.per_threshold);
}
