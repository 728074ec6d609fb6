#include "morphrom/morph.hpp"
#include "morphrom/random.hpp"

#include "doctest.h"
#include "test_helpers.hpp"

#include <cmath>
#include <random>

using namespace morphrom;
using morphrom::testing::circle_polyline;

namespace {

ElasticConfig default_config() {
  ElasticConfig config;
  config.validate();
  return config;
}

}  // namespace

TEST_CASE("morphing onto the current boundary converges without iterating") {
  Mesh2D plate = synth_plate(0.4, 0.15);
  const BoundaryIndex index = build_index(boundary_polyline(plate));
  const MorphResult result =
      run_morph(plate, index, default_config(), MorphAlgorithm::vector_distance);
  CHECK(result.converged);
  CHECK(result.status == "converged");
  CHECK(result.iterations == 0);
  CHECK(result.history.empty());
  CHECK(result.displacement.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("vector-distance morphing reaches a shrunken hole radius") {
  Mesh2D plate = synth_plate(0.4, 0.15);
  const BoundaryIndex index = build_index(plate_boundary(0.3, 0.03));
  std::vector<int> observed;
  bool positive_throughout = true;
  const MorphObserver observer = [&](int iteration, std::span<const Vec2> positions) {
    observed.push_back(iteration);
    positive_throughout = positive_throughout && all_areas_positive(plate, positions);
  };
  const MorphResult result = run_morph(plate, index, default_config(),
                                       MorphAlgorithm::vector_distance, 20, observer);

  CHECK(result.converged);
  CHECK(result.final_delta2 < 1e-3);
  CHECK(result.final_delta1 < 1e-3);
  CHECK(positive_throughout);
  CHECK(all_areas_positive(plate, result.positions));

  // observer fired once per iteration, in order
  REQUIRE(static_cast<int>(observed.size()) == result.iterations);
  for (size_t i = 0; i < observed.size(); ++i) CHECK(observed[i] == static_cast<int>(i) + 1);

  // history rows mirror the iterations and record decreasing mismatch
  REQUIRE(static_cast<int>(result.history.size()) == result.iterations);
  CHECK(result.history.front().delta2 > result.history.back().delta2);
  CHECK(result.history.back().delta2 == result.final_delta2);
  for (const MorphHistoryRow& row : result.history) {
    CHECK(row.max_step >= 0.0);
    CHECK(row.max_regularity >= 1.0);
  }

  // displacement and positions are consistent
  const std::vector<Vec2> displaced = displace(plate.vertices, result.displacement);
  double worst = 0.0;
  for (size_t i = 0; i < displaced.size(); ++i)
    worst = std::max(worst, (displaced[i] - result.positions[i]).norm());
  CHECK(worst == 0.0);
}

TEST_CASE("iteration cap and stall limit terminate with honest statuses") {
  Mesh2D plate = synth_plate(0.4, 0.15);
  const BoundaryIndex index = build_index(plate_boundary(0.3, 0.03));

  SUBCASE("iteration cap") {
    ElasticConfig config = default_config();
    config.max_iterations = 3;
    const MorphResult result =
        run_morph(plate, index, config, MorphAlgorithm::vector_distance);
    CHECK_FALSE(result.converged);
    CHECK(result.status == "max_iterations");
    CHECK(result.iterations == 3);
  }
  SUBCASE("stall on an unreachable tolerance") {
    ElasticConfig config = default_config();
    config.epsilon = 1e-15;  // below the attainable floor
    const MorphResult result =
        run_morph(plate, index, config, MorphAlgorithm::vector_distance, 5);
    CHECK_FALSE(result.converged);
    CHECK(result.status == "stalled");
    CHECK(result.iterations < config.max_iterations);
  }
}

TEST_CASE("signed-distance morphing closes delta1 but not tag assignment") {
  Mesh2D plate = synth_plate(0.4, 0.15);
  const BoundaryIndex index = build_index(plate_boundary(0.28, 0.03));
  const MorphResult result =
      run_morph(plate, index, default_config(), MorphAlgorithm::signed_distance);
  CHECK(result.converged);
  CHECK(result.final_delta1 < 1e-3);
  CHECK(result.final_delta2 > result.final_delta1);
}

TEST_CASE("morphing runs are deterministic") {
  Mesh2D plate = synth_plate(0.4, 0.15);
  const BoundaryIndex index = build_index(plate_boundary(0.32, 0.03));
  const MorphResult a = run_morph(plate, index, default_config(), MorphAlgorithm::vector_distance);
  const MorphResult b = run_morph(plate, index, default_config(), MorphAlgorithm::vector_distance);
  REQUIRE(a.history.size() == b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].delta1 == b.history[i].delta1);
    CHECK(a.history[i].delta2 == b.history[i].delta2);
    CHECK(a.history[i].max_step == b.history[i].max_step);
  }
  for (size_t i = 0; i < a.positions.size(); ++i) {
    CHECK(a.positions[i].x() == b.positions[i].x());
    CHECK(a.positions[i].y() == b.positions[i].y());
  }
}

TEST_CASE("final correction places the boundary exactly") {
  Mesh2D plate = synth_plate(0.4, 0.15);
  const BoundaryIndex index = build_index(plate_boundary(0.3, 0.03));
  const MorphResult morph =
      run_morph(plate, index, default_config(), MorphAlgorithm::vector_distance);
  REQUIRE(morph.converged);

  const MorphResult corrected =
      final_correction(plate, morph.positions, index, default_config());
  CHECK(corrected.status == "corrected");
  CHECK(corrected.final_delta2 <= 1e-12);
  CHECK(all_areas_positive(plate, corrected.positions));
}

TEST_CASE("analytic shape derivative matches central differences") {
  Mesh2D plate = synth_plate(0.5, 0.15);
  const BoundaryIndex index = build_index(circle_polyline({0.0, 5.0}, 2.0, 2048));

  std::vector<int> boundary;
  {
    std::vector<bool> seen(plate.vertices.size(), false);
    for (const BoundaryEdge& e : plate.boundary_edges) {
      seen[e.a] = true;
      seen[e.b] = true;
    }
    for (size_t i = 0; i < seen.size(); ++i)
      if (seen[i]) boundary.push_back(static_cast<int>(i));
  }

  std::mt19937_64 rng(12345);
  const double step = 1e-5 * mesh_diameter(plate.vertices);
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(2 * plate.vertices.size());
    for (int id : boundary) {
      v[2 * id] = uniform(rng, -1.0, 1.0);
      v[2 * id + 1] = uniform(rng, -1.0, 1.0);
    }
    const GradientCheck check = check_shape_gradient(plate, plate.vertices, index, v, step);
    CHECK(check.rel_error <= 1e-3);
  }
}
