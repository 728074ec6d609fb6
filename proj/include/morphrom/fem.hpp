#pragma once

#include "morphrom/distfield.hpp"
#include "morphrom/mesh.hpp"

#include <Eigen/Sparse>

#include <cstdint>
#include <utility>

/// Linear elasticity on triangulated 2-D meshes: the morphing operator
/// (plane-stress volume term plus a boundary normal-motion penalty), the
/// boundary load functionals driving the morphing, mass matrices for the
/// L2-type inner product, and the boundary-value solve used by the final
/// correction step.  All vector fields are 2N interleaved (x0,y0,x1,y1,...).
namespace morphrom {

/// Material, load and iteration parameters of the elastic morphing.
struct ElasticConfig {
  double young = 1.0;        ///< Young modulus E
  double poisson = 0.3;      ///< Poisson ratio, in (-1, 0.5)
  double alpha = 200.0;      ///< boundary normal-penalty weight
  double beta1 = 0.0;        ///< tracked-point load weight
  double beta2 = 1.0;        ///< boundary line-load weight
  double gamma = 8.0;        ///< morphing step size
  double epsilon = 1e-3;     ///< stopping threshold on the mismatch measure
  int max_iterations = 500;
  BoundarySampling sampling = BoundarySampling::nodes_only;
  bool variable_young = false;  ///< stiffen small elements: E*(h_ref/h_K)^2
  double h_ref = 0.0;           ///< reference size (0: median longest edge)
  bool full_vector_line_load = false;  ///< beta2*(D.v) instead of beta2*(D.n)(v.n)

  /// Throws std::invalid_argument on out-of-range parameters.
  void validate() const;
};

/// Assembled sparse operator (2N x 2N) and optional right-hand side.
struct SparseSystem {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd rhs;
};

/// P1 strain and plane-stress stress tensors of a nodal displacement on one
/// triangle (corner positions and corner displacements).
std::pair<Eigen::Matrix2d, Eigen::Matrix2d> strain_stress(
    const std::array<Vec2, 3>& corners, const std::array<Vec2, 3>& displacements,
    double young, double poisson);

/// Elastic morphing operator at the given positions: plane-stress stiffness
/// plus alpha-weighted boundary normal-motion penalty.  Symmetric positive
/// definite for alpha > 0.
SparseSystem assemble_operator(const Mesh2D& mesh, std::span<const Vec2> positions,
                               const ElasticConfig& config);

/// Signed-distance load: -integral of d(x) (v.n) over the current boundary.
Eigen::VectorXd assemble_rhs_sdf(const Mesh2D& mesh, std::span<const Vec2> positions,
                                 const BoundaryIndex& index);

/// Tracked-point load: beta1 * integral of (P_k - x) . v over the two
/// boundary edges incident to each tracked vertex (targets taken from the
/// index's tracked points, matched by name).
Eigen::VectorXd assemble_rhs_points(const Mesh2D& mesh, std::span<const Vec2> positions,
                                    const BoundaryIndex& index, const ElasticConfig& config);

/// Line load from per-node vector-distance samples: beta2 * integral of
/// (D.n)(v.n) (or beta2 * D.v with full_vector_line_load) over the boundary.
Eigen::VectorXd assemble_rhs_lines(const Mesh2D& mesh, std::span<const Vec2> positions,
                                   const BoundaryField& field, const ElasticConfig& config);

/// Direct sparse solve (one factorization per call, counted).  Throws
/// std::runtime_error when the factorization fails or the residual is not
/// small relative to the data.
Eigen::VectorXd solve(const SparseSystem& system);

/// P1 consistent scalar mass matrix (N x N) at the given positions.
Eigen::SparseMatrix<double> assemble_mass(const Mesh2D& mesh, std::span<const Vec2> positions);

/// P1 boundary mass matrix (N x N, entries only for boundary vertices).
Eigen::SparseMatrix<double> assemble_boundary_mass(const Mesh2D& mesh,
                                                   std::span<const Vec2> positions);

/// Inner product of two interleaved vector fields under a scalar mass matrix:
/// ux' M vx + uy' M vy.
double mass_dot(const Eigen::SparseMatrix<double>& mass, const Eigen::VectorXd& u,
                const Eigen::VectorXd& v);

/// Volume-elasticity solve with prescribed boundary displacement: returns the
/// 2N field equal to boundary_values on every boundary vertex and elastic in
/// the interior.  boundary_values holds one Vec2 per boundary vertex id.
Eigen::VectorXd solve_dirichlet_correction(const Mesh2D& mesh, std::span<const Vec2> positions,
                                           const std::map<int, Vec2>& boundary_values,
                                           const ElasticConfig& config);

namespace counters {
/// Number of sparse factorizations performed so far.
uint64_t factorizations();
void reset_factorizations();
}  // namespace counters

}  // namespace morphrom
