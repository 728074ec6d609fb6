#include "morphrom/rom.hpp"
#include "morphrom/serial.hpp"

#include "doctest.h"
#include "test_helpers.hpp"

#include <fstream>
#include <random>

using namespace morphrom;
using morphrom::testing::temp_dir;
using morphrom::testing::unit_square_mesh;

namespace {

// Interleaved (2 vertices -> 4-dim) weight matrix of the scalar mass
// M = [[2, 0.5], [0.5, 1]] applied per component.
Eigen::MatrixXd small_weight() {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(4, 4);
  const Eigen::Matrix2d M = (Eigen::Matrix2d() << 2.0, 0.5, 0.5, 1.0).finished();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      W(2 * i, 2 * j) = M(i, j);
      W(2 * i + 1, 2 * j + 1) = M(i, j);
    }
  return W;
}

Eigen::MatrixXd small_snapshots() {
  Eigen::MatrixXd X(4, 3);
  X << 1.0, -0.5, 0.25,  //
      0.5, 1.0, -0.75,   //
      0.0, 2.0, 1.0,     //
      -1.0, 0.5, 0.5;
  return X;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("POD of a fixed snapshot set reproduces its eigendecomposition") {
  const Eigen::MatrixXd X = small_snapshots();
  const Eigen::MatrixXd W = small_weight();
  const PodBasis pod = pod_from_gram(X, X.transpose() * W * X);

  REQUIRE(pod.rank() == 3);
  CHECK(pod.eigenvalues[0] == doctest::Approx(6.337601790099004).epsilon(1e-13));
  CHECK(pod.eigenvalues[1] == doctest::Approx(3.061252176488566).epsilon(1e-13));
  CHECK(pod.eigenvalues[2] == doctest::Approx(2.2261460334124274).epsilon(1e-13));

  // W-orthonormal modes
  const Eigen::MatrixXd gram = pod.modes.transpose() * W * pod.modes;
  CHECK((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);

  // coords reconstruct the snapshots exactly at full rank
  CHECK((pod.modes * pod.coords.transpose() - X).cwiseAbs().maxCoeff() < 1e-12);
  // first snapshot's coordinates (signs fixed by the mode convention)
  CHECK(std::abs(pod.coords(0, 0)) == doctest::Approx(0.12023026255963916).epsilon(1e-12));
  CHECK(std::abs(pod.coords(0, 1)) == doctest::Approx(1.674020245424406).epsilon(1e-12));
  CHECK(std::abs(pod.coords(0, 2)) == doctest::Approx(0.428019744724532).epsilon(1e-12));

  SUBCASE("truncation identity: residual energy equals the eigenvalue tail") {
    for (int r = 1; r <= 2; ++r) {
      double residual = 0.0;
      for (int i = 0; i < 3; ++i) {
        Eigen::VectorXd rec = Eigen::VectorXd::Zero(4);
        for (int j = 0; j < r; ++j) rec += pod.coords(i, j) * pod.modes.col(j);
        const Eigen::VectorXd diff = X.col(i) - rec;
        residual += diff.dot(W * diff);
      }
      const double tail = pod.eigenvalues.tail(3 - r).sum();
      CHECK(residual == doctest::Approx(tail).epsilon(1e-10));
    }
  }

  SUBCASE("duplicated snapshots drop rank") {
    Eigen::MatrixXd Xd(4, 3);
    Xd.col(0) = X.col(0);
    Xd.col(1) = X.col(0);
    Xd.col(2) = X.col(1);
    const PodBasis degenerate = pod_from_gram(Xd, Xd.transpose() * W * Xd);
    CHECK(degenerate.rank() == 2);
  }
}

TEST_CASE("energy-based rank selection follows the discarded-energy rule") {
  Eigen::VectorXd lambda(4);
  lambda << 1.0, 1e-4, 1e-10, 1e-16;
  // sqrt of discarded fractions: r=1 -> ~1e-2, r=2 -> ~1e-5, r=3 -> ~1e-8
  CHECK(select_r_energy(lambda, 4, 1e-1) == 1);
  CHECK(select_r_energy(lambda, 4, 1e-3) == 2);
  CHECK(select_r_energy(lambda, 4, 1e-6) == 3);
  CHECK(select_r_energy(lambda, 4, 1e-12) == 4);  // falls back to full rank
}

TEST_CASE("snapshot POD under the mesh mass matrix is mass-orthonormal") {
  Mesh2D mesh = unit_square_mesh();
  const Eigen::SparseMatrix<double> mass = assemble_mass(mesh, mesh.vertices);

  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd snapshots(8, 3);
  for (Eigen::Index i = 0; i < snapshots.size(); ++i) snapshots(i) = gauss(rng);

  const PodBasis pod = snapshot_pod(snapshots, mass);
  REQUIRE(pod.rank() == 3);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const double dot = mass_dot(mass, pod.modes.col(a), pod.modes.col(b));
      CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-10));
    }
  CHECK((pod.modes * pod.coords.transpose() - snapshots).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("offline/online round trip on a small plate family") {
  Mesh2D reference = synth_plate(0.5, 0.15);
  std::vector<BoundaryPolyline> targets;
  for (int i = 0; i < 6; ++i) targets.push_back(plate_boundary(0.30 + 0.05 * i, 0.02));

  OfflineConfig config;
  const OfflineResult offline = offline_workflow(reference, targets, config);
  const ReducedModel& model = offline.model;

  CHECK(model.r >= 1);
  CHECK(model.r <= model.pod.rank());
  CHECK(model.delta_grad > 0.0);
  CHECK(offline.morphs.size() == targets.size());
  for (const MorphResult& morph : offline.morphs) CHECK(morph.final_delta2 <= 1e-12);

  SUBCASE("realize matches an explicit mode combination") {
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(model.r);
    alpha[0] = model.pod.coords(2, 0);
    const ReducedMorphing morphing = realize(model, alpha);
    Eigen::VectorXd u = model.pod.modes.col(0) * alpha[0];
    const std::vector<Vec2> expect = displace(reference.vertices, u);
    double worst = 0.0;
    for (size_t i = 0; i < expect.size(); ++i)
      worst = std::max(worst, (expect[i] - morphing.positions[i]).norm());
    CHECK(worst < 1e-14);
  }

  SUBCASE("held-out target converges online without factorizations") {
    const BoundaryIndex target = build_index(plate_boundary(0.42, 0.02));
    counters::reset_factorizations();
    const Eigen::VectorXd alpha0 = predict_init(model, target);
    const OnlineReport report = online_solve(model, target, alpha0);
    CHECK(counters::factorizations() == 0);
    CHECK(report.status == "converged");
    CHECK(report.final_delta2 < model.delta_geo);
    CHECK(report.alpha.size() == model.r);
  }

  SUBCASE("an online step decreases the mismatch away from the solution") {
    const BoundaryIndex target = build_index(plate_boundary(0.42, 0.02));
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(model.r);  // reference shape, far away
    const auto mismatch = [&](const Eigen::VectorXd& a) {
      return delta2(target, reference, realize(model, a).positions, model.config.sampling);
    };
    const double before = mismatch(alpha);
    const Eigen::VectorXd after = online_iterate(model, target, alpha);
    CHECK(mismatch(after) < before);
    // and the explicit update formula holds
    const Eigen::VectorXd grad = reduced_gradient(model, target, alpha);
    CHECK((after - (alpha - model.gamma_online * grad)).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("training targets are reproduced from their own coordinates") {
    for (int i = 0; i < 3; ++i) {
      const BoundaryIndex target = build_index(targets[static_cast<size_t>(i)]);
      const Eigen::VectorXd alpha = model.pod.coords.row(i).head(model.r).transpose();
      const double d2 = delta2(target, reference, realize(model, alpha).positions,
                               model.config.sampling);
      CHECK(d2 <= model.delta_geo);
    }
  }

  SUBCASE("model persistence is bit-exact") {
    const auto dir = temp_dir("model_io");
    const std::string first = (dir / "model.json").string();
    const std::string second = (dir / "model2.json").string();
    save_model(model, first);
    const ReducedModel loaded = load_model(first);
    save_model(loaded, second);
    CHECK(read_file(first) == read_file(second));

    CHECK(loaded.r == model.r);
    CHECK(loaded.delta_grad == model.delta_grad);
    CHECK((loaded.pod.modes - model.pod.modes).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.pod.coords - model.pod.coords).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.config.alpha == model.config.alpha);

    const BoundaryIndex target = build_index(plate_boundary(0.42, 0.02));
    const Eigen::VectorXd a = predict_init(model, target);
    const Eigen::VectorXd b = predict_init(loaded, target);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("a single-snapshot family degenerates to a constant initializer") {
  Mesh2D reference = synth_plate(0.5, 0.15);
  const std::vector<BoundaryPolyline> targets{plate_boundary(0.4, 0.02)};
  OfflineConfig config;
  const OfflineResult offline = offline_workflow(reference, targets, config);
  CHECK(offline.model.r == 1);

  const BoundaryIndex target = build_index(targets[0]);
  const OnlineReport report =
      online_solve(offline.model, target, predict_init(offline.model, target));
  CHECK(report.status == "converged");
  CHECK(report.final_delta2 <= offline.model.delta_geo);
}

TEST_CASE("base64 matrix serialization round-trips bit-exactly") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd m(5, 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = gauss(rng);
  m(0, 0) = 0.1 + 0.2;  // a value without a short decimal form

  const std::string text = base64_encode(m);
  const Eigen::MatrixXd back = base64_decode(text, 5, 3);
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);

  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(0.1 + 0.2) != "0.3");
  const double value = 0.1 + 0.2;
  CHECK(std::stod(format_double(value)) == value);
}
