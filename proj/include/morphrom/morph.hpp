#pragma once

#include "morphrom/distfield.hpp"
#include "morphrom/fem.hpp"
#include "morphrom/mesh.hpp"

#include <functional>
#include <string>
#include <vector>

/// Iterative elasticity-driven mesh morphing: each step solves the elastic
/// operator on the current mesh against boundary loads built from the target
/// distance data and moves the vertices by gamma times the solution.  Also
/// hosts the exact boundary-value correction applied after convergence and
/// the shape-derivative consistency check.
namespace morphrom {

/// Which mismatch data drives the morphing loads and the stopping measure:
/// the scalar signed distance (normal loads, stops on delta1) or the per-tag
/// vector distance field (line/point loads, stops on delta2).
enum class MorphAlgorithm { signed_distance, vector_distance };

struct MorphHistoryRow {
  int iteration = 0;       ///< 1-based
  double delta1 = 0.0;
  double delta2 = 0.0;
  double max_step = 0.0;   ///< max vertex move of this iteration
  double max_regularity = 0.0;
};

struct MorphResult {
  std::vector<Vec2> positions;
  Eigen::VectorXd displacement;  ///< positions - reference, 2N interleaved
  bool converged = false;
  int iterations = 0;
  double final_delta1 = 0.0;
  double final_delta2 = 0.0;
  std::string status;            ///< converged | max_iterations | stalled
  std::vector<MorphHistoryRow> history;
};

struct StepReport {
  double max_step = 0.0;
  int gamma_halvings = 0;  ///< step-size halvings forced by element validity
};

/// One morphing iteration: assemble the operator and loads on the current
/// positions, solve, and move the vertices by gamma * u (halving gamma until
/// every element keeps positive area; throws std::runtime_error after 30
/// futile halvings).
StepReport morph_step(const Mesh2D& mesh, std::vector<Vec2>& positions,
                      const BoundaryIndex& index, const ElasticConfig& config,
                      MorphAlgorithm algorithm);

/// Called after every accepted iteration with the new vertex positions
/// (snapshot dumps, progress displays); errors thrown here abort the run.
using MorphObserver = std::function<void(int iteration, std::span<const Vec2> positions)>;

/// Full morphing run from the mesh's own vertices towards the target, with
/// per-iteration history, the configured stopping measure and a divergence
/// guard (stops after `stall_limit` consecutive non-improving iterations).
MorphResult run_morph(const Mesh2D& mesh, const BoundaryIndex& index,
                      const ElasticConfig& config, MorphAlgorithm algorithm,
                      int stall_limit = 20, const MorphObserver& observer = {});

/// Exact boundary placement after convergence: prescribes the vector-distance
/// displacement (tracked points: their exact targets) on every boundary
/// vertex, extends elastically into the interior, and moves the mesh once.
/// Throws MeshError if the corrected mesh loses element positivity.
MorphResult final_correction(const Mesh2D& mesh, std::span<const Vec2> positions,
                             const BoundaryIndex& index, const ElasticConfig& config);

/// Integral of the target signed distance over the current domain
/// (3-midpoint rule per element, exact for quadratic integrands).
double mismatch_objective(const Mesh2D& mesh, std::span<const Vec2> positions,
                          const BoundaryIndex& index);

struct GradientCheck {
  double analytic = 0.0;   ///< boundary-integral directional derivative
  double numeric = 0.0;    ///< central difference of the objective
  double rel_error = 0.0;
};

/// Consistency of the boundary-integral shape derivative of the mismatch
/// objective against a central difference with step `step` along velocity v.
GradientCheck check_shape_gradient(const Mesh2D& mesh, std::span<const Vec2> positions,
                                   const BoundaryIndex& index, const Eigen::VectorXd& v,
                                   double step);

}  // namespace morphrom
