#pragma once

#include "morphrom/distfield.hpp"
#include "morphrom/mesh.hpp"
#include "morphrom/pod.hpp"

#include <optional>
#include <string>
#include <vector>

/// Gaussian-process regression (anisotropic Matern-5/2 kernel, one
/// independent GP per output, marginal-likelihood training) plus the boundary
/// shape features it consumes and the synthetic scalar used to exercise the
/// scalar-learning pipeline.
namespace morphrom {

struct GprConfig {
  int restarts = 5;            ///< multi-start optimizations (first start at unit scales)
  uint64_t seed = 0;           ///< seeds the restart perturbations
  int max_opt_iterations = 80;
  double jitter_min = 1e-10;   ///< diagonal jitter, relative to signal variance
  double jitter_max = 1e-6;    ///< escalation cap (factors of 10)
};

/// Trained GP model.  Inputs and outputs are standardized per dimension over
/// the training set; a single-sample training set degenerates to a constant
/// predictor.
struct GprModel {
  Eigen::MatrixXd inputs;        ///< raw training inputs, n x p
  Eigen::VectorXd input_mean, input_scale;
  Eigen::VectorXd output_mean, output_scale;

  struct Head {
    Eigen::VectorXd log_length;  ///< p log length-scales (standardized space)
    double log_signal = 0.0;     ///< log signal standard deviation
    double jitter = 0.0;         ///< relative diagonal jitter actually used
    Eigen::VectorXd weights;     ///< K^{-1} y (standardized)
    Eigen::MatrixXd chol;        ///< lower Cholesky factor of K
    double lml = 0.0;            ///< log marginal likelihood at the optimum
  };
  std::vector<Head> heads;       ///< one per output dimension

  bool constant = false;
  Eigen::VectorXd constant_value;

  int input_dim() const { return static_cast<int>(input_mean.size()); }
  int output_dim() const { return static_cast<int>(output_mean.size()); }
  int n_train() const { return static_cast<int>(inputs.rows()); }
};

struct GprPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

/// Trains one GP per output column of Y on the rows of X by maximizing the
/// log marginal likelihood over log length-scales and log signal variance
/// (multi-start quasi-Newton; Cholesky failures escalate the jitter).
GprModel gpr_train(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const GprConfig& config);

/// Posterior mean and variance at one raw input.
GprPrediction gpr_predict(const GprModel& model, const Eigen::VectorXd& x);

/// Predictivity coefficient 1 - sum (y-f)^2 / sum (y-mean)^2.  Throws
/// std::invalid_argument for constant truth.
double q2_score(const Eigen::VectorXd& truth, const Eigen::VectorXd& predicted);

/// Drag-like synthetic scalar: v0^2 times the integral of max(0, n.e(theta0))
/// over all loops carrying at least one of the given tags, with n the outward
/// normal of each loop's enclosed region and e(theta0) the unit direction of
/// angle theta0.  Exact per segment (the integrand is constant on segments).
double synthetic_scalar_oracle(const BoundaryPolyline& shape,
                               const std::vector<std::string>& tags, double v0, double theta0);

/// Boundary shape feature of a target: the per-(vertex,tag) vector-distance
/// samples of the reference boundary against the target, stacked in
/// (vertex, tag-name) order (2 entries per sample).  Ordering by tag *name*
/// keeps the layout independent of the interned tag numbering, so features
/// computed against a reloaded reference match the stored basis.
Eigen::VectorXd shape_features(const Mesh2D& reference, const BoundaryIndex& target);

/// Matching lumped boundary-mass weights (one per feature entry).
Eigen::VectorXd feature_weights(const Mesh2D& reference);

/// POD of feature vectors (columns) under the diagonal weights, truncated to
/// at most q modes.
PodBasis fit_feature_basis(const Eigen::MatrixXd& features, const Eigen::VectorXd& weights,
                           int q);

/// Coordinates of one feature vector in a fitted feature basis.
Eigen::VectorXd feature_coords(const PodBasis& basis, const Eigen::VectorXd& weights,
                               const Eigen::VectorXd& feature);

}  // namespace morphrom
