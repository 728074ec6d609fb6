#pragma once

#include "morphrom/distfield.hpp"
#include "morphrom/fem.hpp"
#include "morphrom/morph.hpp"
#include "morphrom/pod.hpp"
#include "morphrom/regress.hpp"

#include <string>
#include <vector>

/// Reduced-order morphing: snapshot POD of converged high-fidelity morphing
/// displacements, truncation-rank selection, the reduced boundary-integral
/// gradient, the factorization-free online fixed-point iteration, and the
/// persisted reduced model (POD basis + boundary-feature GPR initializer,
/// optionally a scalar-output GPR).
namespace morphrom {

/// Everything the online phase needs, persistable as one JSON document.
struct ReducedModel {
  int version = 1;
  Mesh2D reference;
  PodBasis pod;                ///< displacement modes (2N x rank), mass-orthonormal
  int r = 0;                   ///< active mode count
  ElasticConfig config;        ///< load weights for the reduced gradient
  double delta_geo = 5e-4;     ///< online geometric stopping threshold
  double delta_grad = 0.0;     ///< out-of-distribution gradient threshold
  double gamma_online = 0.02;  ///< online step size
  int max_online_iterations = 500;

  PodBasis features;           ///< boundary feature basis (q modes)
  Eigen::VectorXd feature_weight;  ///< lumped boundary weights for the features
  GprModel initializer;        ///< feature coords -> first r POD coordinates

  bool has_scalar = false;     ///< optional (alpha, mu) -> scalar regression
  GprModel scalar;
  int scalar_coords = 0;       ///< leading POD coordinates fed to the scalar GP
  int scalar_mu_dim = 0;       ///< extra physical inputs appended after alpha
};

/// Reduced morphing realized at coordinates alpha.
struct ReducedMorphing {
  Eigen::VectorXd alpha;
  std::vector<Vec2> positions;
};

struct OnlineHistoryRow {
  int iteration = 0;
  double delta2 = 0.0;
  double gradient_norm = 0.0;
};

struct OnlineReport {
  Eigen::VectorXd alpha0;       ///< initial coordinates
  Eigen::VectorXd alpha;        ///< final coordinates
  int iterations = 0;
  double final_delta2 = 0.0;
  double gradient_norm = 0.0;   ///< reduced gradient norm at exit
  std::string status;  ///< converged | max_iter_gradient_large | out_of_distribution
  std::vector<OnlineHistoryRow> history;
};

/// POD of displacement snapshots (columns, 2N interleaved) in the inner
/// product of the scalar mass matrix applied per component.
PodBasis snapshot_pod(const Eigen::MatrixXd& snapshots, const Eigen::SparseMatrix<double>& mass);

/// Smallest r whose reduced reconstructions of all training coordinates stay
/// element-positive and within delta_geo of their targets; throws
/// std::runtime_error when no r qualifies.
int select_r_geometric(const Mesh2D& reference, const PodBasis& pod,
                       const std::vector<BoundaryIndex>& targets, double delta_geo,
                       BoundarySampling sampling);

/// Vertex positions of the reduced morphing at alpha (first r modes).
ReducedMorphing realize(const ReducedModel& model, const Eigen::VectorXd& alpha);

/// Reduced descent direction: minus the mode inner products with the
/// boundary load functional assembled on the realized mesh.  Boundary-only
/// work: no factorization, no volume assembly.
Eigen::VectorXd reduced_gradient(const ReducedModel& model, const BoundaryIndex& target,
                                 const Eigen::VectorXd& alpha);

/// One online update alpha - gamma_online * reduced gradient.
Eigen::VectorXd online_iterate(const ReducedModel& model, const BoundaryIndex& target,
                               const Eigen::VectorXd& alpha);

/// GPR initial coordinates from the target's boundary features.
Eigen::VectorXd predict_init(const ReducedModel& model, const BoundaryIndex& target);

/// Online fixed-point iteration from alpha0 until the boundary mismatch
/// drops below delta_geo; at the iteration cap the exit gradient norm
/// separates max_iter_gradient_large from out_of_distribution.
OnlineReport online_solve(const ReducedModel& model, const BoundaryIndex& target,
                          const Eigen::VectorXd& alpha0);

struct OfflineConfig {
  ElasticConfig elastic;
  MorphAlgorithm algorithm = MorphAlgorithm::vector_distance;
  double delta_geo = 5e-4;
  enum class Selection { geometric, energy };
  Selection selection = Selection::geometric;
  double delta_pod = 1e-3;     ///< energy-criterion threshold
  int feature_modes = 5;       ///< q
  GprConfig gpr;
  double gamma_online = 0.02;
  int max_online_iterations = 500;
  int stall_limit = 20;
};

struct OfflineResult {
  ReducedModel model;
  std::vector<MorphResult> morphs;      ///< per training target
  std::vector<double> morph_seconds;
  double mean_morph_seconds = 0.0;
};

/// Full offline phase: high-fidelity morphs of every training target,
/// snapshot POD, rank selection, feature basis + initializer GPR, and the
/// out-of-distribution threshold (mean training gradient norm).  Throws
/// std::runtime_error if any training morph fails to converge.
OfflineResult offline_workflow(const Mesh2D& reference,
                               const std::vector<BoundaryPolyline>& targets,
                               const OfflineConfig& config);

/// Single-document JSON persistence (dense arrays base64-embedded,
/// bit-exact round trip).
void save_model(const ReducedModel& model, const std::string& path);
ReducedModel load_model(const std::string& path);

}  // namespace morphrom
