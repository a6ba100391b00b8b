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
#include "laneval/types.hpp"

using namespace laneval;

namespace {

Polyline3 straight_line(double x0, double x1, double y, int n = 11) {
  Polyline3 line;
  for (int k = 0; k < n; ++k)
    line.points.push_back({x0 + (x1 - x0) * k / (n - 1), y, 0.0});
  return line;
}

LaneSegment make_lane(std::int64_t id, double y) {
  LaneSegment ls;
  ls.id = id;
  ls.centerline = straight_line(0, 10, y);
  ls.left_boundary = straight_line(0, 10, y + 1.75);
  ls.right_boundary = straight_line(0, 10, y - 1.75);
  ls.left_type = kLineSolid;
  ls.right_type = kLineDashed;
  ls.confidence = 1.0;
  return ls;
}

Frame make_frame() {
  Frame frame;
  frame.frame_id = "000000";
  frame.lane_segments = {make_lane(1, 0.0), make_lane(2, 3.5)};
  AreaInstance area;
  area.id = 101;
  area.class_id = kAreaPedestrianCrossing;
  area.curve = {{0, 6, 0}, {4, 6, 0}, {4, 10, 0}, {0, 10, 0}, {0, 6, 0}};
  frame.areas = {area};
  TrafficElement te;
  te.id = 201;
  te.class_id = 2;
  te.box = {100, 200, 180, 320};
  frame.traffic_elements = {te};
  frame.topology.ll_scores = ScoreMatrix(2, 2, 0.0);
  frame.topology.ll_scores.at(0, 1) = 1.0;
  frame.topology.lt_scores = ScoreMatrix(2, 1, 0.0);
  frame.topology.lt_scores.at(0, 0) = 1.0;
  return frame;
}

}  // namespace

TEST_CASE("validate_frame passes a well-formed frame", "[types]") {
  CHECK(validate_frame(make_frame(), BevGridSpec{}).empty());
}

TEST_CASE("validate_frame names short lane polylines", "[types]") {
  Frame frame = make_frame();
  frame.lane_segments[0].centerline.points.pop_back();  // 10 of 11 points
  const auto violations = validate_frame(frame, BevGridSpec{});
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].subject == "lane_segment id=1");
  CHECK(violations[0].field == "centerline");
}

TEST_CASE("validate_frame flags degenerate boxes", "[types]") {
  Frame frame = make_frame();
  frame.traffic_elements[0].box.x2 = frame.traffic_elements[0].box.x1;
  const auto violations = validate_frame(frame, BevGridSpec{});
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].message == "degenerate box");
}

TEST_CASE("validate_frame detects one corrupted field at a time", "[types]") {
  std::mt19937 rng(314);
  for (int corruption = 0; corruption < 12; ++corruption) {
    Frame frame = make_frame();
    switch (corruption) {
      case 0: frame.lane_segments[0].centerline[3].x = std::nan(""); break;
      case 1: frame.lane_segments[0].left_boundary.points.resize(5); break;
      case 2: frame.lane_segments[1].class_id = 99; break;
      case 3: frame.lane_segments[1].left_type = -1; break;
      case 4: frame.lane_segments[0].confidence = 1.5; break;
      case 5: frame.areas[0].class_id = 7; break;
      case 6: frame.areas[0].curve.points = {{0, 6, 0}}; break;
      case 7: frame.traffic_elements[0].box.x1 = -4.0; break;
      case 8: frame.traffic_elements[0].class_id = 13; break;
      case 9: frame.topology.ll_scores.at(1, 0) = 1.5; break;
      case 10: frame.topology.lt_scores = ScoreMatrix(2, 3, 0.0); break;
      case 11: frame.lane_segments[1].id = frame.lane_segments[0].id; break;
    }
    INFO("corruption " << corruption);
    CHECK_FALSE(validate_frame(frame, BevGridSpec{}).empty());
  }
  (void)rng;
}

TEST_CASE("validate_frame enforces ground-truth strictness on demand", "[types]") {
  Frame frame = make_frame();
  frame.lane_segments[0].confidence = 0.7;
  frame.topology.ll_scores.at(1, 0) = 0.4;
  CHECK(validate_frame(frame, BevGridSpec{}).empty());

  ValidationOptions opts;
  opts.ground_truth = true;
  const auto violations = validate_frame(frame, BevGridSpec{}, opts);
  CHECK(violations.size() == 2);
}

TEST_CASE("validate_frame applies the range margin", "[types]") {
  Frame frame = make_frame();
  frame.lane_segments[0].centerline[0].x = 59.0;  // within the 10 m margin
  CHECK(validate_frame(frame, BevGridSpec{}).empty());
  frame.lane_segments[0].centerline[0].x = 61.0;
  CHECK_FALSE(validate_frame(frame, BevGridSpec{}).empty());
}

TEST_CASE("BevGridSpec rejects inverted or empty grids", "[types]") {
  BevGridSpec bad;
  bad.x_max = bad.x_min;
  CHECK_THROWS_AS(bad.require_valid(), std::invalid_argument);
  BevGridSpec zero;
  zero.rows = 0;
  CHECK_THROWS_AS(zero.require_valid(), std::invalid_argument);
  CHECK(BevGridSpec{}.cell_size_x() == Approx(0.5));
  CHECK(BevGridSpec{}.cell_size_y() == Approx(0.5));
}

TEST_CASE("loss weight defaults carry the published values", "[types]") {
  const LossWeights w;
  CHECK(w.lanesegment.cls == 1.5);
  CHECK(w.lanesegment.reg == 0.0025);
  CHECK(w.lanesegment.type == 0.1);
  CHECK(w.lanesegment.mask == 3.0);
  CHECK(w.lanesegment.dice == 3.0);
  CHECK(w.area.cls == 1.5);
  CHECK(w.area.reg == 0.0025);
  CHECK(w.area.dir == 0.005);
  CHECK(w.area.seg == 10.0);
  CHECK(w.traffic.cls == 1.0);
  CHECK(w.traffic.reg == 2.5);
  CHECK(w.traffic.iou == 1.0);
  CHECK(w.topology_ll == 5.0);
  CHECK(w.topology_lt == 5.0);
}

TEST_CASE("reports stay self-consistent with the aggregate formula", "[types]") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int iter = 0; iter < 100; ++iter) {
    MetricsReport report;
    report.det_l = unit(rng);
    report.det_a = unit(rng);
    report.det_t = unit(rng);
    report.top_ll = unit(rng);
    report.top_lt = unit(rng);
    report.olus = olus(report.det_l, report.det_a, report.det_t, report.top_ll,
                       report.top_lt);
    const double recomputed =
        (report.det_l + report.det_a + report.det_t + std::sqrt(report.top_ll) +
         std::sqrt(report.top_lt)) / 5.0;
    CHECK(std::abs(report.olus - recomputed) <= 1e-12);
  }
}
