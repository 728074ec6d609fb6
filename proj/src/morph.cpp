#include "morphrom/morph.hpp"

#include "morphrom/logging.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace morphrom {

namespace {

Eigen::VectorXd assemble_loads(const Mesh2D& mesh, std::span<const Vec2> positions,
                               const BoundaryIndex& index, const ElasticConfig& config,
                               MorphAlgorithm algorithm) {
  if (algorithm == MorphAlgorithm::signed_distance)
    return assemble_rhs_sdf(mesh, positions, index);
  const BoundaryField field = vector_distance_field(index, mesh, positions);
  return assemble_rhs_points(mesh, positions, index, config) +
         assemble_rhs_lines(mesh, positions, field, config);
}

}  // namespace

StepReport morph_step(const Mesh2D& mesh, std::vector<Vec2>& positions,
                      const BoundaryIndex& index, const ElasticConfig& config,
                      MorphAlgorithm algorithm) {
  SparseSystem system = assemble_operator(mesh, positions, config);
  system.rhs = assemble_loads(mesh, positions, index, config, algorithm);
  const Eigen::VectorXd u = solve(system);

  double gamma = config.gamma;
  StepReport report;
  for (;; ++report.gamma_halvings) {
    if (report.gamma_halvings > 30)
      throw std::runtime_error("morphing step keeps collapsing elements after 30 halvings");
    const std::vector<Vec2> moved = displace(positions, gamma * u);
    if (all_areas_positive(mesh, moved)) {
      double max_step = 0.0;
      for (Eigen::Index i = 0; i < u.size(); i += 2)
        max_step = std::max(max_step, gamma * std::hypot(u[i], u[i + 1]));
      report.max_step = max_step;
      positions = moved;
      return report;
    }
    gamma *= 0.5;
  }
}

MorphResult run_morph(const Mesh2D& mesh, const BoundaryIndex& index,
                      const ElasticConfig& config, MorphAlgorithm algorithm, int stall_limit,
                      const MorphObserver& observer) {
  config.validate();
  MorphResult result;
  result.positions.assign(mesh.vertices.begin(), mesh.vertices.end());

  auto measure = [&](double d1, double d2) {
    return algorithm == MorphAlgorithm::signed_distance ? d1 : d2;
  };

  result.final_delta1 = delta1(index, mesh, result.positions, config.sampling);
  result.final_delta2 = delta2(index, mesh, result.positions, config.sampling);
  if (measure(result.final_delta1, result.final_delta2) < config.epsilon) {
    // Already matching: zero iterations, empty history.
    result.converged = true;
    result.status = "converged";
    result.displacement = Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(mesh.vertices.size()));
    return result;
  }

  double best = std::numeric_limits<double>::infinity();
  int stalled = 0;
  result.status = "max_iterations";
  for (int m = 1; m <= config.max_iterations; ++m) {
    const StepReport step = morph_step(mesh, result.positions, index, config, algorithm);

    MorphHistoryRow row;
    row.iteration = m;
    row.delta1 = delta1(index, mesh, result.positions, config.sampling);
    row.delta2 = delta2(index, mesh, result.positions, config.sampling);
    row.max_step = step.max_step;
    row.max_regularity = shape_regularity(mesh, result.positions, {}).max_ratio;
    result.history.push_back(row);
    result.iterations = m;
    if (observer) observer(m, result.positions);

    const double current = measure(row.delta1, row.delta2);
    if (current < config.epsilon) {
      result.converged = true;
      result.status = "converged";
      break;
    }
    if (current < best) {
      best = current;
      stalled = 0;
    } else if (++stalled >= stall_limit) {
      result.status = "stalled";
      break;
    }
  }

  if (!result.history.empty()) {
    result.final_delta1 = result.history.back().delta1;
    result.final_delta2 = result.history.back().delta2;
  }
  result.displacement = pack_positions(result.positions) - pack_positions(mesh.vertices);
  log::info("morph " + result.status + " after " + std::to_string(result.iterations) +
            " iterations (delta1=" + std::to_string(result.final_delta1) +
            ", delta2=" + std::to_string(result.final_delta2) + ")");
  return result;
}

MorphResult final_correction(const Mesh2D& mesh, std::span<const Vec2> positions,
                             const BoundaryIndex& index, const ElasticConfig& config) {
  const BoundaryField field = vector_distance_field(index, mesh, positions);

  // Tracked vertices move exactly onto their named targets; every other
  // boundary vertex moves onto its closest-point projection.  At untracked
  // tag junctions the smallest incident tag id wins (deterministic).
  std::map<int, Vec2> boundary_values;
  for (const VectorDistanceSample& s : field.samples)
    if (boundary_values.find(s.vertex) == boundary_values.end())
      boundary_values[s.vertex] = s.displacement;
  for (const auto& [name, vertex] : mesh.tracked_points) {
    auto it = index.target().tracked_points.find(name);
    if (it == index.target().tracked_points.end())
      throw MeshError("target boundary lacks tracked point '" + name + "'");
    boundary_values[vertex] = it->second - positions[static_cast<size_t>(vertex)];
  }

  const Eigen::VectorXd u = solve_dirichlet_correction(mesh, positions, boundary_values, config);

  MorphResult result;
  result.positions = displace(positions, u);
  if (!all_areas_positive(mesh, result.positions))
    throw MeshError("final correction folded an element");
  result.displacement = pack_positions(result.positions) - pack_positions(mesh.vertices);
  result.converged = true;
  result.status = "corrected";
  result.iterations = 1;
  result.final_delta1 = delta1(index, mesh, result.positions, config.sampling);
  result.final_delta2 = delta2(index, mesh, result.positions, config.sampling);
  return result;
}

double mismatch_objective(const Mesh2D& mesh, std::span<const Vec2> positions,
                          const BoundaryIndex& index) {
  double total = 0.0;
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const auto& tri = mesh.triangles[static_cast<size_t>(t)];
    const Vec2& a = positions[static_cast<size_t>(tri[0])];
    const Vec2& b = positions[static_cast<size_t>(tri[1])];
    const Vec2& c = positions[static_cast<size_t>(tri[2])];
    const double area = triangle_area(mesh, positions, t);
    const Vec2 mids[3] = {0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)};
    double sum = 0.0;
    for (const Vec2& m : mids) sum += index.signed_distance(m);
    total += area * sum / 3.0;
  }
  return total;
}

GradientCheck check_shape_gradient(const Mesh2D& mesh, std::span<const Vec2> positions,
                                   const BoundaryIndex& index, const Eigen::VectorXd& v,
                                   double step) {
  if (v.size() != 2 * static_cast<Eigen::Index>(positions.size()))
    throw std::invalid_argument("velocity field length does not match the mesh");

  GradientCheck check;
  // The shape derivative of the domain integral is the boundary integral of
  // d (v.n), which is minus the signed-distance load functional.
  check.analytic = -assemble_rhs_sdf(mesh, positions, index).dot(v);

  const std::vector<Vec2> plus = displace(positions, step * v);
  const std::vector<Vec2> minus = displace(positions, -step * v);
  check.numeric =
      (mismatch_objective(mesh, plus, index) - mismatch_objective(mesh, minus, index)) /
      (2.0 * step);
  const double scale = std::max({std::abs(check.analytic), std::abs(check.numeric), 1e-300});
  check.rel_error = std::abs(check.analytic - check.numeric) / scale;
  return check;
}

}  // namespace morphrom
