#include "morphrom/pod.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace morphrom {

PodBasis pod_from_gram(const Eigen::MatrixXd& snapshots, const Eigen::MatrixXd& gram) {
  const Eigen::Index n = snapshots.cols();
  if (gram.rows() != n || gram.cols() != n)
    throw std::invalid_argument("Gram matrix size does not match the snapshot count");
  if (n == 0) throw std::invalid_argument("POD needs at least one snapshot");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (gram + gram.transpose()));
  if (eig.info() != Eigen::Success) throw std::runtime_error("Gram eigendecomposition failed");

  // Ascending from the solver; store descending and clamp round-off negatives.
  PodBasis basis;
  basis.eigenvalues = eig.eigenvalues().reverse().cwiseMax(0.0);
  const double cutoff = 1e-14 * (basis.eigenvalues.size() > 0 ? basis.eigenvalues[0] : 0.0);

  int rank = 0;
  while (rank < n && basis.eigenvalues[rank] > cutoff) ++rank;
  if (rank == 0) throw std::runtime_error("all snapshots are numerically zero");

  basis.modes.resize(snapshots.rows(), rank);
  basis.coords.resize(n, rank);
  for (int j = 0; j < rank; ++j) {
    const double lambda = basis.eigenvalues[j];
    Eigen::VectorXd v = eig.eigenvectors().col(n - 1 - j);

    // Deterministic sign: the largest-magnitude mode entry is positive.
    Eigen::VectorXd mode = snapshots * v / std::sqrt(lambda);
    Eigen::Index imax = 0;
    mode.cwiseAbs().maxCoeff(&imax);
    if (mode[imax] < 0.0) {
      mode = -mode;
      v = -v;
    }
    basis.modes.col(j) = mode;
    basis.coords.col(j) = v * std::sqrt(lambda);
  }
  return basis;
}

int select_r_energy(const Eigen::VectorXd& eigenvalues, int rank, double delta_pod) {
  const double total = eigenvalues.sum();
  if (!(total > 0.0)) throw std::invalid_argument("energy criterion needs nonzero eigenvalues");
  for (int r = 1; r <= rank; ++r) {
    const double discarded = eigenvalues.tail(eigenvalues.size() - r).sum();
    if (std::sqrt(std::max(discarded, 0.0) / total) <= delta_pod) return r;
  }
  return rank;
}

}  // namespace morphrom
