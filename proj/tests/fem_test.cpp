#include "morphrom/fem.hpp"

#include "doctest.h"
#include "test_helpers.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace morphrom;
using morphrom::testing::unit_square_mesh;

namespace {

ElasticConfig default_config() {
  ElasticConfig config;
  config.validate();
  return config;
}

double quad_form(const SparseSystem& system, const Eigen::VectorXd& u) {
  return u.dot(system.matrix * u);
}

Eigen::VectorXd constant_field(size_t n_vertices, const Vec2& c) {
  Eigen::VectorXd u(2 * n_vertices);
  for (size_t i = 0; i < n_vertices; ++i) {
    u[2 * i] = c.x();
    u[2 * i + 1] = c.y();
  }
  return u;
}

}  // namespace

TEST_CASE("strain and plane-stress stress of a linear field on one triangle") {
  // u(x,y) = u0 + (u1-u0) x + (u2-u0) y on corners (0,0),(1,0),(0,1)
  const std::array<Vec2, 3> corners{Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  const std::array<Vec2, 3> displacements{Vec2(0.01, -0.02), Vec2(0.03, 0.005),
                                          Vec2(-0.004, 0.025)};
  const auto [eps, sig] = strain_stress(corners, displacements, 1.0, 0.3);

  CHECK(eps(0, 0) == doctest::Approx(0.019999999999999997).epsilon(1e-14));
  CHECK(eps(0, 1) == doctest::Approx(0.0055000000000000005).epsilon(1e-14));
  CHECK(eps(1, 0) == doctest::Approx(0.0055000000000000005).epsilon(1e-14));
  CHECK(eps(1, 1) == doctest::Approx(0.045).epsilon(1e-14));

  CHECK(sig(0, 0) == doctest::Approx(0.0368131868131868).epsilon(1e-13));
  CHECK(sig(0, 1) == doctest::Approx(0.004230769230769231).epsilon(1e-13));
  CHECK(sig(1, 0) == doctest::Approx(0.004230769230769231).epsilon(1e-13));
  CHECK(sig(1, 1) == doctest::Approx(0.05604395604395603).epsilon(1e-13));

  // translating the element leaves both tensors at zero
  const std::array<Vec2, 3> shift{Vec2(0.4, -0.2), Vec2(0.4, -0.2), Vec2(0.4, -0.2)};
  const auto [eps0, sig0] = strain_stress(corners, shift, 1.0, 0.3);
  CHECK(eps0.norm() == 0.0);
  CHECK(sig0.norm() == 0.0);
}

TEST_CASE("operator energy on the unit square matches closed forms") {
  Mesh2D mesh = unit_square_mesh();
  ElasticConfig config = default_config();
  const SparseSystem system = assemble_operator(mesh, mesh.vertices, config);
  REQUIRE(system.matrix.rows() == 8);

  SUBCASE("translations carry only the boundary normal penalty") {
    // a(c,c) = alpha * integral of (c.n)^2 over the square boundary
    const Eigen::VectorXd ux = constant_field(4, {1.0, 0.0});
    CHECK(quad_form(system, ux) == doctest::Approx(2.0 * config.alpha).epsilon(1e-13));
    const Eigen::VectorXd uxy = constant_field(4, {1.0, 1.0});
    CHECK(quad_form(system, uxy) == doctest::Approx(4.0 * config.alpha).epsilon(1e-13));
  }

  SUBCASE("uniform stretch adds the plane-stress volume term") {
    // u = (x, 0): strain diag(1,0), sigma:eps = E/(1-nu^2) over unit area,
    // plus (u.n)^2 = 1 on the single boundary side x = 1.
    Eigen::VectorXd u(8);
    for (int i = 0; i < 4; ++i) {
      u[2 * i] = mesh.vertices[i].x();
      u[2 * i + 1] = 0.0;
    }
    const double volume = config.young / (1.0 - config.poisson * config.poisson);
    CHECK(quad_form(system, u) == doctest::Approx(volume + config.alpha).epsilon(1e-13));
  }

  SUBCASE("infinitesimal rotation has zero elastic energy") {
    // u = (-y, x) has zero strain; isolate the alpha-independent part of the
    // quadratic form, which must vanish.
    Eigen::VectorXd u(8);
    for (int i = 0; i < 4; ++i) {
      u[2 * i] = -mesh.vertices[i].y();
      u[2 * i + 1] = mesh.vertices[i].x();
    }
    ElasticConfig doubled = config;
    doubled.alpha = 2.0 * config.alpha;
    const SparseSystem system2 = assemble_operator(mesh, mesh.vertices, doubled);
    const double elastic = 2.0 * quad_form(system, u) - quad_form(system2, u);
    CHECK(std::abs(elastic) < 1e-11);
  }
}

TEST_CASE("operator is invariant under vertex renumbering") {
  Mesh2D mesh = unit_square_mesh();
  const std::vector<int> perm{2, 0, 3, 1};  // old id -> new id

  Mesh2D renumbered;
  renumbered.vertices.resize(4);
  for (int i = 0; i < 4; ++i) renumbered.vertices[perm[i]] = mesh.vertices[i];
  for (const auto& t : mesh.triangles)
    renumbered.triangles.push_back({perm[t[0]], perm[t[1]], perm[t[2]]});
  renumbered.tag_names = mesh.tag_names;
  for (const auto& e : mesh.boundary_edges)
    renumbered.boundary_edges.push_back({perm[e.a], perm[e.b], e.tag});
  validate(renumbered);

  ElasticConfig config = default_config();
  const SparseSystem a = assemble_operator(mesh, mesh.vertices, config);
  const SparseSystem b = assemble_operator(renumbered, renumbered.vertices, config);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd u(8);
    for (int i = 0; i < 8; ++i) u[i] = gauss(rng);
    Eigen::VectorXd v(8);
    for (int i = 0; i < 4; ++i) {
      v[2 * perm[i]] = u[2 * i];
      v[2 * perm[i] + 1] = u[2 * i + 1];
    }
    CHECK(u.dot(a.matrix * u) == doctest::Approx(v.dot(b.matrix * v)).epsilon(1e-13));
  }
}

TEST_CASE("operator is symmetric positive definite on a small plate") {
  Mesh2D plate = synth_plate(0.5, 0.15);
  const SparseSystem system = assemble_operator(plate, plate.vertices, default_config());
  const Eigen::MatrixXd dense = Eigen::MatrixXd(system.matrix);
  CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense, Eigen::EigenvaluesOnly);
  CHECK(eig.eigenvalues()[0] > 0.0);
}

TEST_CASE("sparse solve reproduces manufactured solutions and is counted") {
  Mesh2D plate = synth_plate(0.5, 0.15);
  SparseSystem system = assemble_operator(plate, plate.vertices, default_config());

  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd expected(system.matrix.rows());
  for (Eigen::Index i = 0; i < expected.size(); ++i) expected[i] = gauss(rng);
  system.rhs = system.matrix * expected;

  counters::reset_factorizations();
  const Eigen::VectorXd solution = solve(system);
  CHECK(counters::factorizations() == 1);
  CHECK((solution - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("mass matrices integrate constants exactly") {
  Mesh2D mesh = unit_square_mesh();
  const Eigen::SparseMatrix<double> mass = assemble_mass(mesh, mesh.vertices);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(4);
  CHECK(ones.dot(mass * ones) == doctest::Approx(1.0).epsilon(1e-14));  // area

  const Eigen::SparseMatrix<double> bmass = assemble_boundary_mass(mesh, mesh.vertices);
  CHECK(ones.dot(bmass * ones) == doctest::Approx(4.0).epsilon(1e-14));  // perimeter

  // interleaved inner product applies the scalar matrix per component
  const Eigen::VectorXd u = constant_field(4, {1.0, 1.0});
  CHECK(mass_dot(mass, u, u) == doctest::Approx(2.0).epsilon(1e-14));

  Mesh2D plate = synth_plate(0.4, 0.15);
  const Eigen::VectorXd pones = Eigen::VectorXd::Ones(plate.vertices.size());
  const Eigen::SparseMatrix<double> pmass = assemble_mass(plate, plate.vertices);
  CHECK(pones.dot(pmass * pones) ==
        doctest::Approx(total_area(plate, plate.vertices)).epsilon(1e-12));
}

TEST_CASE("config validation rejects out-of-range parameters") {
  ElasticConfig config;
  config.validate();
  SUBCASE("poisson") {
    config.poisson = 0.5;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  }
  SUBCASE("young") {
    config.young = 0.0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  }
  SUBCASE("alpha") {
    config.alpha = -1.0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  }
  SUBCASE("epsilon") {
    config.epsilon = 0.0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  }
  SUBCASE("max iterations") {
    config.max_iterations = 0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  }
}

TEST_CASE("Dirichlet correction reproduces affine fields in the interior") {
  Mesh2D plate = synth_plate(0.5, 0.12);
  const auto affine = [](const Vec2& p) {
    return Vec2(0.08 * p.x() - 0.03 * p.y() + 0.01, 0.04 * p.x() + 0.06 * p.y() - 0.02);
  };

  std::map<int, Vec2> boundary_values;
  std::vector<bool> on_boundary(plate.vertices.size(), false);
  for (const BoundaryEdge& e : plate.boundary_edges) {
    on_boundary[e.a] = true;
    on_boundary[e.b] = true;
  }
  for (size_t i = 0; i < plate.vertices.size(); ++i)
    if (on_boundary[i]) boundary_values[static_cast<int>(i)] = affine(plate.vertices[i]);

  const Eigen::VectorXd u =
      solve_dirichlet_correction(plate, plate.vertices, boundary_values, default_config());
  REQUIRE(u.size() == static_cast<Eigen::Index>(2 * plate.vertices.size()));

  double worst = 0.0;
  for (size_t i = 0; i < plate.vertices.size(); ++i) {
    const Vec2 expect = affine(plate.vertices[i]);
    worst = std::max(worst, std::abs(u[2 * i] - expect.x()));
    worst = std::max(worst, std::abs(u[2 * i + 1] - expect.y()));
  }
  CHECK(worst < 1e-8);  // affine fields are exact elasticity solutions
}
