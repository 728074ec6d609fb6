#include "morphrom/regress.hpp"
#include "morphrom/random.hpp"

#include "doctest.h"
#include "test_helpers.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

using namespace morphrom;
using morphrom::testing::circle_polyline;
using morphrom::testing::unit_square_mesh;

TEST_CASE("GP posterior matches the closed form at pinned hyperparameters") {
  // Matern-5/2, unit length-scale and signal, no jitter, identity
  // standardization; training set x = {0, 1, 2}, y = {1, -1, 0.5}.
  GprModel model;
  model.inputs = Eigen::MatrixXd(3, 1);
  model.inputs << 0.0, 1.0, 2.0;
  model.input_mean = Eigen::VectorXd::Zero(1);
  model.input_scale = Eigen::VectorXd::Ones(1);
  model.output_mean = Eigen::VectorXd::Zero(1);
  model.output_scale = Eigen::VectorXd::Ones(1);

  GprModel::Head head;
  head.log_length = Eigen::VectorXd::Zero(1);
  head.log_signal = 0.0;
  head.jitter = 0.0;
  head.weights = Eigen::VectorXd(3);
  head.weights << 2.4513136347018154, -3.2647739370977202, 1.8708226239419163;
  head.chol = Eigen::MatrixXd::Zero(3, 3);
  head.chol(0, 0) = 1.0;
  head.chol(1, 0) = 0.5239941088318203;
  head.chol(1, 1) = 0.8517218876543836;
  head.chol(2, 0) = 0.13866021913850426;
  head.chol(2, 1) = 0.5299112038988257;
  head.chol(2, 2) = 0.8366405797061;
  model.heads.push_back(head);

  const GprPrediction at_train = gpr_predict(model, Eigen::VectorXd::Zero(1));
  CHECK(at_train.mean[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(at_train.variance[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  const GprPrediction p = gpr_predict(model, Eigen::VectorXd::Constant(1, 0.7));
  CHECK(p.mean[0] == doctest::Approx(-0.6190903933591964).epsilon(1e-12));
  CHECK(p.variance[0] == doctest::Approx(0.05811918410147576).epsilon(1e-10));
}

TEST_CASE("trained GP interpolates and generalizes a smooth 1-D function") {
  Eigen::MatrixXd X(20, 1), Y(20, 1);
  for (int i = 0; i < 20; ++i) {
    X(i, 0) = 3.0 * i / 19.0;
    Y(i, 0) = std::sin(2.0 * X(i, 0));
  }
  const GprModel model = gpr_train(X, Y, GprConfig{});

  double worst_train = 0.0;
  for (int i = 0; i < 20; ++i) {
    const GprPrediction p = gpr_predict(model, X.row(i).transpose());
    worst_train = std::max(worst_train, std::abs(p.mean[0] - Y(i, 0)));
    CHECK(p.variance[0] >= 0.0);
  }
  CHECK(worst_train < 1e-5);

  std::mt19937_64 rng(5);
  double rmse = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double x = uniform(rng, 0.0, 3.0);
    const double err =
        gpr_predict(model, Eigen::VectorXd::Constant(1, x)).mean[0] - std::sin(2.0 * x);
    rmse += err * err;
  }
  CHECK(std::sqrt(rmse / 100.0) < 1e-2);
}

TEST_CASE("GP training is invariant to sample order") {
  Eigen::MatrixXd X(20, 2), Y(20, 1);
  std::mt19937_64 rng(41);
  for (int i = 0; i < 20; ++i) {
    X(i, 0) = uniform(rng, -1.0, 1.0);
    X(i, 1) = uniform(rng, -1.0, 1.0);
    Y(i, 0) = std::sin(2.0 * X(i, 0)) * std::cos(X(i, 1));
  }
  Eigen::MatrixXd Xp(20, 2), Yp(20, 1);
  for (int i = 0; i < 20; ++i) {
    const int j = (i * 7 + 3) % 20;
    Xp.row(i) = X.row(j);
    Yp.row(i) = Y.row(j);
  }
  const GprModel a = gpr_train(X, Y, GprConfig{});
  const GprModel b = gpr_train(Xp, Yp, GprConfig{});
  for (int k = 0; k < 30; ++k) {
    Eigen::VectorXd x(2);
    x << uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0);
    CHECK(gpr_predict(a, x).mean[0] ==
          doctest::Approx(gpr_predict(b, x).mean[0]).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("single-sample training degenerates to a constant predictor") {
  Eigen::MatrixXd X(1, 3), Y(1, 2);
  X << 0.3, -0.2, 1.5;
  Y << 4.0, -1.0;
  const GprModel model = gpr_train(X, Y, GprConfig{});
  CHECK(model.constant);
  const GprPrediction p = gpr_predict(model, Eigen::VectorXd::Zero(3));
  CHECK(p.mean[0] == 4.0);
  CHECK(p.mean[1] == -1.0);
  CHECK(p.variance[0] == 0.0);
}

TEST_CASE("predictivity score on canonical cases") {
  Eigen::VectorXd truth(4), exact(4), mean_pred(4);
  truth << 1.0, 2.0, 3.0, 4.0;
  exact = truth;
  mean_pred.setConstant(2.5);

  CHECK(q2_score(truth, exact) == 1.0);
  CHECK(q2_score(truth, mean_pred) == 0.0);

  Eigen::VectorXd t2(2), p2(2);
  t2 << 0.0, 2.0;
  p2 << 1.0, 2.0;
  CHECK(q2_score(t2, p2) == 0.5);

  Eigen::VectorXd approx(4);
  approx << 1.1, 1.9, 3.2, 3.7;
  CHECK(q2_score(truth, approx) == doctest::Approx(0.97).epsilon(1e-14));

  // affine rescaling of truth and prediction together leaves the score fixed
  const Eigen::VectorXd truth_affine = (3.0 * truth.array() - 1.0).matrix();
  const Eigen::VectorXd approx_affine = (3.0 * approx.array() - 1.0).matrix();
  CHECK(q2_score(truth_affine, approx_affine) == doctest::Approx(0.97).epsilon(1e-12));

  Eigen::VectorXd constant = Eigen::VectorXd::Ones(3);
  CHECK_THROWS_AS(q2_score(constant, constant), std::invalid_argument);
}

TEST_CASE("drag-like oracle matches the analytic circle value") {
  // integral over the unit circle of max(0, n.e) ds = 2, so w = 2 v0^2.  The
  // inscribed polygon reproduces it to roundoff when the flow direction is a
  // symmetry axis of the vertex grid, and to O((pi/n)^2) otherwise.
  const BoundaryPolyline circle = circle_polyline({0.4, -0.7}, 1.0, 4096, "wall");
  CHECK(synthetic_scalar_oracle(circle, {"wall"}, 1.3, 0.0) ==
        doctest::Approx(2.0 * 1.3 * 1.3).epsilon(1e-12));
  const double w = synthetic_scalar_oracle(circle, {"wall"}, 1.3, 0.25);
  CHECK(w == doctest::Approx(2.0 * 1.3 * 1.3).epsilon(1e-6));

  CHECK(synthetic_scalar_oracle(circle, {"wall"}, 0.0, 0.25) == 0.0);
  // quadratic speed scaling, exactly
  CHECK(synthetic_scalar_oracle(circle, {"wall"}, 2.6, 0.25) ==
        doctest::Approx(4.0 * w).epsilon(1e-14));
}

TEST_CASE("drag-like oracle is equivariant under rotations") {
  const int n = 257;
  BoundaryPolyline shape = circle_polyline({0.0, 0.0}, 1.0, n, "wall");
  // break the symmetry so the test is informative
  for (int k = 0; k < n; ++k)
    shape.loops[0].points[static_cast<size_t>(k)] *= 1.0 + 0.2 * std::sin(3.0 * k);

  const double phi = 0.83;
  const Eigen::Rotation2D<double> rot(phi);
  BoundaryPolyline rotated = shape;
  for (Vec2& p : rotated.loops[0].points) p = rot * p;

  const double w0 = synthetic_scalar_oracle(shape, {"wall"}, 1.1, 0.2);
  const double w1 = synthetic_scalar_oracle(rotated, {"wall"}, 1.1, 0.2 + phi);
  CHECK(w0 == doctest::Approx(w1).epsilon(1e-12));
}

TEST_CASE("drag-like oracle only integrates loops carrying requested tags") {
  BoundaryPolyline two = circle_polyline({0.0, 0.0}, 1.0, 256, "inner");
  BoundaryPolyline outer = circle_polyline({0.0, 0.0}, 3.0, 256, "outer");
  two.loops.push_back(outer.loops[0]);
  for (int& tag : two.loops[1].segment_tags) tag = 1;
  two.tag_names = {"inner", "outer"};

  const double inner_only = synthetic_scalar_oracle(two, {"inner"}, 1.0, 0.0);
  const double outer_only = synthetic_scalar_oracle(two, {"outer"}, 1.0, 0.0);
  CHECK(inner_only == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(outer_only == doctest::Approx(6.0).epsilon(1e-3));
  CHECK_THROWS_AS(synthetic_scalar_oracle(two, {"absent"}, 1.0, 0.0), MeshError);
}

TEST_CASE("shape features vanish on the identity and feed a usable basis") {
  Mesh2D mesh = unit_square_mesh();
  const BoundaryIndex self = build_index(boundary_polyline(mesh));
  const Eigen::VectorXd zero_features = shape_features(mesh, self);
  CHECK(zero_features.cwiseAbs().maxCoeff() < 1e-14);

  const Eigen::VectorXd weights = feature_weights(mesh);
  REQUIRE(weights.size() == zero_features.size());
  CHECK(weights.minCoeff() > 0.0);
  // lumped boundary weights: each feature entry sees half its two edges, and
  // the square's 8 (vertex, tag) samples each cover half of one unit side
  CHECK(weights.sum() == doctest::Approx(2.0 * 4.0).epsilon(1e-12));

  // features of shifted squares: recoverable coordinates at full rank
  Eigen::MatrixXd features(zero_features.size(), 3);
  for (int s = 0; s < 3; ++s) {
    Mesh2D shifted = mesh;
    for (Vec2& p : shifted.vertices) p += Vec2(0.1 * (s + 1), -0.05 * s);
    features.col(s) = shape_features(mesh, build_index(boundary_polyline(shifted)));
  }
  const PodBasis basis = fit_feature_basis(features, weights, 5);
  CHECK(basis.rank() <= 3);
  for (int s = 0; s < 3; ++s) {
    const Eigen::VectorXd coords = feature_coords(basis, weights, features.col(s));
    const Eigen::VectorXd rec = basis.modes * coords;
    CHECK((rec - features.col(s)).cwiseAbs().maxCoeff() < 1e-10);
  }
}
