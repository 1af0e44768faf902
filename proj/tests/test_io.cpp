#include "doctest.h"

#include "support.hpp"

#include "kaleido/errors.hpp"
#include "kaleido/experiments.hpp"
#include "kaleido/io.hpp"

#include <cstdio>
#include <filesystem>

using namespace kaleido;
using namespace kaleido::test;

namespace {

void check_same_scenario(const Scenario& a, const Scenario& b) {
  CHECK(a.name == b.name);
  CHECK(a.config.camera.fx == b.config.camera.fx);
  CHECK(a.config.camera.cy == b.config.camera.cy);
  CHECK(a.config.camera.width == b.config.camera.width);
  CHECK(a.config.max_order == b.config.max_order);
  CHECK(a.config.seed == b.config.seed);
  CHECK(a.config.sigma == b.config.sigma);
  REQUIRE(a.config.mirrors.size() == b.config.mirrors.size());
  for (std::size_t i = 0; i < a.config.mirrors.size(); ++i) {
    CHECK(a.config.mirrors[i].normal() == b.config.mirrors[i].normal());
    CHECK(a.config.mirrors[i].distance() == b.config.mirrors[i].distance());
  }
  CHECK(a.nominal_point == b.nominal_point);
  CHECK(a.half_extent == b.half_extent);
}

}  // namespace

TEST_CASE("shipped fixtures match the built-in scenarios") {
  for (const auto& scenario : {two_mirror_order3(), three_mirror_order2()}) {
    const auto file = scene_from_json(parse_json(read_file(fixture_path(scenario.name))));
    CHECK(file.has_sampling_box);
    CHECK(file.points.empty());
    check_same_scenario(file.scenario, scenario);
  }
}

TEST_CASE("scene JSON round trip") {
  const auto scenario = three_mirror_order2();
  const std::vector<Point3> points{{1, 2, 900}, {-3, 4, 1000}};
  const Json doc = scene_to_json(scenario, points);
  CHECK(doc["schema_version"] == kSchemaVersion);
  const auto back = scene_from_json(parse_json(doc.dump()));
  check_same_scenario(back.scenario, scenario);
  CHECK(back.points == points);

  Json old = doc;
  old["schema_version"] = 0;
  CHECK_THROWS_AS(scene_from_json(old), InvalidInput);
  Json missing = doc;
  missing.erase("camera");
  CHECK_THROWS_AS(scene_from_json(missing), InvalidInput);
  Json parallel = doc;
  parallel["mirrors"][1] = parallel["mirrors"][0];
  CHECK_THROWS_AS(scene_from_json(parallel), InvalidInput);
  Json wrong_type = doc;
  wrong_type["max_order"] = "two";
  CHECK_THROWS_AS(scene_from_json(wrong_type), InvalidInput);
  CHECK_THROWS_AS(parse_json("{\"camera\": "), InvalidInput);
}

TEST_CASE("candidate CSV") {
  const std::vector<Pixel2> pixels{{1.5, 2.25}, {1e-3, 1199.123456789012}, {800, 600}};
  const auto text = candidates_to_csv(pixels);
  CHECK(text.rfind("id,u,v\n", 0) == 0);
  CHECK(candidates_from_csv(text) == pixels);
  CHECK(candidates_from_csv("id,u,v\r\n0,1,2\r\n") == std::vector<Pixel2>{{1, 2}});
  CHECK_THROWS_AS(candidates_from_csv("u,v\n1,2\n"), InvalidInput);
  CHECK_THROWS_AS(candidates_from_csv("id,u,v\n1,1,2\n"), InvalidInput);
  CHECK_THROWS_AS(candidates_from_csv("id,u,v\n0,1\n"), InvalidInput);
  CHECK_THROWS_AS(candidates_from_csv("id,u,v\n0,a,2\n"), InvalidInput);
}

TEST_CASE("observation JSON round trip") {
  const auto scene = make_calibration_scene(three_mirror_order2(), 2, 1.0, 3);
  const Json doc = observations_to_json(scene.observations, 3);
  const auto back = observations_from_json(parse_json(doc.dump()), 3);
  REQUIRE(back.size() == scene.observations.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    CHECK(back[k].label == scene.observations[k].label);
    CHECK(back[k].landmark == scene.observations[k].landmark);
    CHECK(back[k].pixel == scene.observations[k].pixel);
  }
  CHECK_THROWS_AS(observations_from_json(doc, 2), InvalidSequence);

  const Json grouped = parse_json(R"({"schema_version": 1, "landmarks": [
      {"id": 0, "observations": [{"label": "0", "u": 1, "v": 2}, {"label": "12", "u": 3, "v": 4}]},
      {"id": 1, "observations": [{"label": "3", "u": 5, "v": 6}]}]})");
  const auto g = observations_from_json(grouped, 3);
  REQUIRE(g.size() == 3);
  CHECK(g[1].label == ReflectionSequence({1, 2}));
  CHECK(g[2].landmark == 1);
  CHECK(g[2].pixel == Pixel2{5, 6});
}

TEST_CASE("estimate and reference JSON round trips") {
  const auto scenario = three_mirror_order2();
  const CalibrationEstimate estimate{scenario.config.mirrors, {{1, 2, 3}}, true};
  const auto back = estimate_from_json(parse_json(estimate_to_json(estimate).dump()));
  CHECK(back.unit_first_distance);
  CHECK(back.points == estimate.points);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.mirrors[i].normal() == estimate.mirrors[i].normal());
    CHECK(back.mirrors[i].distance() == estimate.mirrors[i].distance());
  }

  const auto board = make_board_scene(scenario, 5, 0.5, 1);
  const auto ref = reference_from_json(parse_json(reference_to_json(board.reference, 3).dump()), 3);
  CHECK(ref.landmarks == board.reference.landmarks);
  REQUIRE(ref.correspondences.size() == board.reference.correspondences.size());
  for (const auto& [label, corr] : board.reference.correspondences) {
    CHECK(ref.correspondences.at(label) == corr);
  }
}

TEST_CASE("assignment output") {
  AssignmentResult result;
  result.labels[0] = ReflectionSequence();
  result.labels[2] = ReflectionSequence({2, 1});
  result.mirrors = three_mirror_order2().config.mirrors;
  result.recall = 0.5;
  result.pruning.total = 10;
  const std::vector<Pixel2> candidates{{1, 2}, {3, 4}, {5, 6}};
  const Json doc = assignment_to_json(result, candidates, 3);
  CHECK(doc["labels"]["0"] == "0");
  CHECK(doc["labels"]["2"] == "21");
  CHECK_FALSE(doc["labels"].contains("1"));
  CHECK(doc["pruning_counts"]["total"] == 10);
  CHECK(doc["recall"] == 0.5);
  CHECK(assignment_to_csv(result, candidates, 3) == "id,u,v,label\n0,1,2,0\n1,3,4,\n2,5,6,21\n");
}

TEST_CASE("file helpers") {
  const auto path = (std::filesystem::temp_directory_path() / "kaleido_io_test.txt").string();
  write_file(path, "hello\n");
  CHECK(read_file(path) == "hello\n");
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_file(path), InvalidInput);
}
