#pragma once

#include <Eigen/Core>

/// Proper orthogonal decomposition via the snapshot Gram matrix: dense
/// symmetric eigendecomposition, modes normalized against the Gram inner
/// product, deterministic mode signs (largest-magnitude entry positive).
namespace morphrom {

struct PodBasis {
  Eigen::MatrixXd modes;        ///< D x rank, orthonormal in the snapshot inner product
  Eigen::VectorXd eigenvalues;  ///< all n snapshot eigenvalues, descending, clamped >= 0
  Eigen::MatrixXd coords;       ///< n x rank: snapshot i = sum_j coords(i,j) * mode_j

  int rank() const { return static_cast<int>(modes.cols()); }
};

/// POD of `snapshots` (one column per snapshot) given the Gram matrix
/// gram(i,j) = <snapshot_i, snapshot_j> of the chosen inner product.  Modes
/// with eigenvalues below 1e-14 * max eigenvalue are dropped as rank noise.
PodBasis pod_from_gram(const Eigen::MatrixXd& snapshots, const Eigen::MatrixXd& gram);

/// Smallest r whose discarded-energy fraction sqrt(sum_{j>r} / sum) is at
/// most delta_pod (falls back to the full rank).
int select_r_energy(const Eigen::VectorXd& eigenvalues, int rank, double delta_pod);

}  // namespace morphrom
