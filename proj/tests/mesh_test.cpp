#include "morphrom/json_io.hpp"
#include "morphrom/mesh.hpp"

#include "doctest.h"
#include "test_helpers.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

using namespace morphrom;
using morphrom::testing::temp_dir;
using morphrom::testing::unit_square_mesh;

TEST_CASE("unit square mesh passes validation with the expected measures") {
  Mesh2D mesh = unit_square_mesh();
  CHECK(mesh.loops.size() == 1);
  CHECK(mesh.loops[0].vertices.size() == 4);
  CHECK(triangle_area(mesh, mesh.vertices, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(total_area(mesh, mesh.vertices) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(all_areas_positive(mesh, mesh.vertices));
  CHECK(mesh_diameter(mesh.vertices) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("validation rejects structural defects") {
  SUBCASE("clockwise element") {
    Mesh2D mesh = unit_square_mesh();
    std::swap(mesh.triangles[0][0], mesh.triangles[0][1]);
    CHECK_THROWS_AS(validate(mesh), MeshError);
  }
  SUBCASE("missing boundary edge") {
    Mesh2D mesh = unit_square_mesh();
    mesh.boundary_edges.pop_back();
    CHECK_THROWS_AS(validate(mesh), MeshError);
  }
  SUBCASE("untagged boundary edge") {
    Mesh2D mesh = unit_square_mesh();
    mesh.boundary_edges[0].tag = -1;
    CHECK_THROWS_AS(validate(mesh), MeshError);
  }
  SUBCASE("vertex index out of range") {
    Mesh2D mesh = unit_square_mesh();
    mesh.triangles[0][2] = 99;
    CHECK_THROWS_AS(validate(mesh), MeshError);
  }
  SUBCASE("tracked point off the boundary") {
    Mesh2D mesh = unit_square_mesh();
    mesh.vertices.push_back({0.5, 0.5});
    mesh.triangles = {{0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}};
    mesh.tracked_points["center"] = 4;
    CHECK_THROWS_AS(validate(mesh), MeshError);
  }
}

TEST_CASE("pack, unpack and displace round-trip interleaved fields") {
  Mesh2D mesh = unit_square_mesh();
  const Eigen::VectorXd packed = pack_positions(mesh.vertices);
  REQUIRE(packed.size() == 8);
  CHECK(packed[2] == 1.0);  // x of vertex 1
  CHECK(packed[5] == 1.0);  // y of vertex 2
  const std::vector<Vec2> back = unpack_positions(packed);
  for (size_t i = 0; i < back.size(); ++i) CHECK((back[i] - mesh.vertices[i]).norm() == 0.0);

  Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(8, 0.1, 0.8);
  const std::vector<Vec2> moved = displace(mesh.vertices, u);
  for (int i = 0; i < 4; ++i) {
    CHECK(moved[i].x() == doctest::Approx(mesh.vertices[i].x() + u[2 * i]).epsilon(1e-15));
    CHECK(moved[i].y() == doctest::Approx(mesh.vertices[i].y() + u[2 * i + 1]).epsilon(1e-15));
  }
}

TEST_CASE("boundary polyline extraction keeps tags, length and area") {
  Mesh2D mesh = unit_square_mesh();
  const BoundaryPolyline poly = boundary_polyline(mesh);
  REQUIRE(poly.loops.size() == 1);
  CHECK(poly.loops[0].points.size() == 4);
  CHECK(poly.tag_names == mesh.tag_names);
  CHECK(polyline_length(poly) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(loop_area(poly.loops[0]) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("mesh JSON round-trip is bit-exact and rejects unknown keys") {
  const auto dir = temp_dir("mesh_io");
  Mesh2D plate = synth_plate(0.5, 0.15);
  const std::string path = (dir / "plate.json").string();
  save_mesh(plate, path);
  const Mesh2D loaded = load_mesh(path);

  REQUIRE(loaded.vertices.size() == plate.vertices.size());
  for (size_t i = 0; i < plate.vertices.size(); ++i) {
    CHECK(loaded.vertices[i].x() == plate.vertices[i].x());
    CHECK(loaded.vertices[i].y() == plate.vertices[i].y());
  }
  CHECK(loaded.triangles == plate.triangles);
  // tags travel as per-edge names; the interned id table may be renumbered
  REQUIRE(loaded.boundary_edges.size() == plate.boundary_edges.size());
  for (size_t e = 0; e < plate.boundary_edges.size(); ++e) {
    CHECK(loaded.boundary_edges[e].a == plate.boundary_edges[e].a);
    CHECK(loaded.boundary_edges[e].b == plate.boundary_edges[e].b);
    CHECK(loaded.tag_names[static_cast<size_t>(loaded.boundary_edges[e].tag)] ==
          plate.tag_names[static_cast<size_t>(plate.boundary_edges[e].tag)]);
  }
  CHECK(loaded.tracked_points == plate.tracked_points);

  // writing the loaded mesh again reproduces the file byte for byte
  const std::string again = (dir / "plate2.json").string();
  save_mesh(loaded, again);
  std::ifstream a(path), b(again);
  const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);

  nlohmann::json doc = mesh_to_json(plate);
  doc["surprise"] = 1;
  const std::string bad = (dir / "bad.json").string();
  std::ofstream(bad) << doc.dump();
  CHECK_THROWS_AS(load_mesh(bad), MeshError);
}

TEST_CASE("polyline JSON round-trip is bit-exact") {
  const auto dir = temp_dir("poly_io");
  const BoundaryPolyline poly = plate_boundary(0.3, 0.05);
  const std::string path = (dir / "poly.json").string();
  save_polyline(poly, path);
  const BoundaryPolyline loaded = load_polyline(path);
  REQUIRE(loaded.loops.size() == poly.loops.size());
  for (size_t l = 0; l < poly.loops.size(); ++l) {
    REQUIRE(loaded.loops[l].points.size() == poly.loops[l].points.size());
    for (size_t k = 0; k < poly.loops[l].points.size(); ++k)
      CHECK((loaded.loops[l].points[k] - poly.loops[l].points[k]).norm() == 0.0);
    // tags travel as per-segment names; the interned id table may be renumbered
    for (size_t k = 0; k < poly.loops[l].segment_tags.size(); ++k)
      CHECK(loaded.tag_names[static_cast<size_t>(loaded.loops[l].segment_tags[k])] ==
            poly.tag_names[static_cast<size_t>(poly.loops[l].segment_tags[k])]);
  }
  REQUIRE(loaded.tracked_points.size() == poly.tracked_points.size());
  for (const auto& [name, p] : poly.tracked_points)
    CHECK((loaded.tracked_points.at(name) - p).norm() == 0.0);
}

TEST_CASE("plate generator produces the documented geometry") {
  const double radius = 0.5, h = 0.1;
  Mesh2D plate = synth_plate(radius, h);
  CHECK(all_areas_positive(plate, plate.vertices));
  CHECK(plate.tag_names ==
        std::vector<std::string>{"arc_left", "arc_right", "wall_top", "wall_bottom"});
  CHECK(plate.tracked_points.size() == 4);

  // area: [-1,1]^2 minus two inscribed half-disks of the given radius
  const double exact = 4.0 - std::numbers::pi * radius * radius;
  CHECK(total_area(plate, plate.vertices) == doctest::Approx(exact).epsilon(5e-3));
  CHECK(total_area(plate, plate.vertices) >= exact);  // inscribed arcs remove less

  const BoundaryPolyline target = plate_boundary(0.3, 0.02);
  CHECK(target.tag_names == plate.tag_names);
  const double target_area = loop_area(target.loops[0]);
  CHECK(target_area == doctest::Approx(4.0 - std::numbers::pi * 0.09).epsilon(5e-3));

  CHECK_THROWS_AS(synth_plate(0.5, 0.25), MeshError);  // arcs under-resolved
}

TEST_CASE("notched plate boundary is closed with the plate tag set") {
  const BoundaryPolyline notch = notched_plate_boundary(0.3, 0.02);
  CHECK(notch.tag_names ==
        std::vector<std::string>{"arc_left", "arc_right", "wall_top", "wall_bottom"});
  REQUIRE(notch.loops.size() == 1);
  const double area = loop_area(notch.loops[0]);
  CHECK(area > 3.0);
  CHECK(area < 4.0);
  CHECK(notch.tracked_points.size() == 4);
}

TEST_CASE("airfoil generator produces tagged O-grid meshes") {
  Mesh2D foil = synth_airfoil(0.02, 0.4, 0.12, 32, 5.0);
  CHECK(all_areas_positive(foil, foil.vertices));
  CHECK(foil.tag_names == std::vector<std::string>{"upper", "lower", "farfield"});
  CHECK(foil.tracked_points.count("leading_edge") == 1);
  CHECK(foil.tracked_points.count("trailing_edge") == 1);
  CHECK((foil.vertices[foil.tracked_points.at("leading_edge")] - Vec2(0, 0)).norm() < 1e-12);
  CHECK((foil.vertices[foil.tracked_points.at("trailing_edge")] - Vec2(1, 0)).norm() < 1e-12);

  CHECK_THROWS_AS(synth_airfoil(0.10, 0.4, 0.12, 32, 5.0), MeshError);  // camber too large
  CHECK_THROWS_AS(synth_airfoil(0.02, 0.4, 0.30, 32, 5.0), MeshError);  // thickness out of range
  CHECK_THROWS_AS(synth_airfoil(0.02, 0.4, 0.12, 32, 2.0), MeshError);  // far field too close
}

TEST_CASE("shape regularity is exact on known triangles") {
  Mesh2D mesh = unit_square_mesh();  // two right isosceles triangles
  const QualityReport report = shape_regularity(mesh);
  REQUIRE(report.elements.size() == 2);
  CHECK(report.ratios[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(report.ratios[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(report.max_ratio == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  const std::vector<int> mask{1};
  const QualityReport masked = shape_regularity(mesh, mesh.vertices, mask);
  CHECK(masked.elements == mask);
  CHECK(masked.worst_element == 1);
}

TEST_CASE("coarse-to-fine interpolation reproduces affine displacements") {
  Mesh2D coarse = synth_plate(0.5, 0.15);
  Mesh2D fine = synth_plate(0.5, 0.08);
  const auto affine = [](const Vec2& p) {
    return Vec2(0.10 * p.x() + 0.05 * p.y() + 0.02, -0.02 * p.x() + 0.07 * p.y() - 0.01);
  };
  Eigen::VectorXd u(2 * coarse.vertices.size());
  for (size_t i = 0; i < coarse.vertices.size(); ++i) {
    const Vec2 d = affine(coarse.vertices[i]);
    u[2 * i] = d.x();
    u[2 * i + 1] = d.y();
  }
  const InterpolatedField field = interpolate_morphing(coarse, u, fine, 1e-6);
  REQUIRE(field.values.size() == static_cast<Eigen::Index>(2 * fine.vertices.size()));
  double worst = 0.0;
  for (size_t i = 0; i < fine.vertices.size(); ++i) {
    const Vec2 d = affine(fine.vertices[i]);
    worst = std::max(worst, std::abs(field.values[2 * i] - d.x()));
    worst = std::max(worst, std::abs(field.values[2 * i + 1] - d.y()));
  }
  CHECK(worst < 1e-12);
  CHECK(field.displaced_positive);
}
