#include "morphrom/fem.hpp"

#include <Eigen/LU>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

namespace morphrom {

namespace {
std::atomic<uint64_t> g_factorizations{0};

/// Outward unit normal of a directed boundary edge (domain on the left).
Vec2 outward_normal(const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  return Vec2(d.y(), -d.x()) / d.norm();
}

/// Longest edge of a triangle.
double longest_edge(const std::array<Vec2, 3>& p) {
  return std::max({(p[1] - p[0]).norm(), (p[2] - p[1]).norm(), (p[0] - p[2]).norm()});
}

std::array<Vec2, 3> corner_positions(const Mesh2D& mesh, std::span<const Vec2> positions, int t) {
  const auto& tri = mesh.triangles[static_cast<size_t>(t)];
  return {positions[static_cast<size_t>(tri[0])], positions[static_cast<size_t>(tri[1])],
          positions[static_cast<size_t>(tri[2])]};
}

}  // namespace

namespace counters {
uint64_t factorizations() { return g_factorizations.load(); }
void reset_factorizations() { g_factorizations.store(0); }
}  // namespace counters

void ElasticConfig::validate() const {
  if (!(young > 0.0)) throw std::invalid_argument("Young modulus must be positive");
  if (!(poisson > -1.0 && poisson < 0.5))
    throw std::invalid_argument("Poisson ratio must lie in (-1, 0.5)");
  if (!(alpha >= 0.0)) throw std::invalid_argument("normal-penalty weight must be >= 0");
  if (!(beta1 >= 0.0 && beta2 >= 0.0)) throw std::invalid_argument("load weights must be >= 0");
  if (!(gamma >= 0.0)) throw std::invalid_argument("step size gamma must be >= 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("stopping threshold must be positive");
  if (max_iterations < 1) throw std::invalid_argument("iteration cap must be >= 1");
  if (variable_young && h_ref < 0.0)
    throw std::invalid_argument("reference element size must be >= 0");
}

std::pair<Eigen::Matrix2d, Eigen::Matrix2d> strain_stress(
    const std::array<Vec2, 3>& corners, const std::array<Vec2, 3>& displacements,
    double young, double poisson) {
  const Vec2 e1 = corners[1] - corners[0];
  const Vec2 e2 = corners[2] - corners[0];
  const double det = e1.x() * e2.y() - e2.x() * e1.y();
  if (det == 0.0) throw MeshError("degenerate triangle in strain evaluation");

  // Gradient of the P1 interpolant: d = [u1-u0, u2-u0] * J^{-1}.
  Eigen::Matrix2d du;
  du.col(0) = (displacements[1] - displacements[0]);
  du.col(1) = (displacements[2] - displacements[0]);
  Eigen::Matrix2d jac;
  jac << e1.x(), e2.x(), e1.y(), e2.y();
  const Eigen::Matrix2d grad = du * jac.inverse();

  const Eigen::Matrix2d strain = 0.5 * (grad + grad.transpose());
  const double c1 = young / (1.0 + poisson);
  const double c2 = young * poisson / ((1.0 + poisson) * (1.0 - poisson));
  const Eigen::Matrix2d stress =
      c1 * strain + c2 * strain.trace() * Eigen::Matrix2d::Identity();
  return {strain, stress};
}

SparseSystem assemble_operator(const Mesh2D& mesh, std::span<const Vec2> positions,
                               const ElasticConfig& config) {
  config.validate();
  const int n = static_cast<int>(mesh.vertices.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(36 * mesh.triangles.size() + 16 * mesh.boundary_edges.size());

  double h_ref = config.h_ref;
  if (config.variable_young && h_ref == 0.0) {
    std::vector<double> sizes(mesh.triangles.size());
    for (size_t t = 0; t < mesh.triangles.size(); ++t)
      sizes[t] = longest_edge(corner_positions(mesh, positions, static_cast<int>(t)));
    auto mid = sizes.begin() + static_cast<std::ptrdiff_t>(sizes.size() / 2);
    std::nth_element(sizes.begin(), mid, sizes.end());
    h_ref = *mid;
  }

  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const auto& tri = mesh.triangles[static_cast<size_t>(t)];
    const std::array<Vec2, 3> p = corner_positions(mesh, positions, t);
    const double area = triangle_area(mesh, positions, t);
    if (!(area > 0.0))
      throw MeshError("non-positive element area during assembly (triangle " +
                      std::to_string(t) + ")");

    // P1 basis gradients.
    const double inv = 1.0 / (2.0 * area);
    const std::array<Vec2, 3> grad = {
        Vec2(p[1].y() - p[2].y(), p[2].x() - p[1].x()) * inv,
        Vec2(p[2].y() - p[0].y(), p[0].x() - p[2].x()) * inv,
        Vec2(p[0].y() - p[1].y(), p[1].x() - p[0].x()) * inv,
    };

    double scale = 1.0;
    if (config.variable_young) scale = h_ref / longest_edge(p);
    const double c1 = scale * config.young / (1.0 + config.poisson);
    const double c2 = scale * config.young * config.poisson /
                      ((1.0 + config.poisson) * (1.0 - config.poisson));

    // Voigt elasticity matrix (exx, eyy, gxy) for plane stress.
    Eigen::Matrix3d C;
    C << c1 + c2, c2, 0.0, c2, c1 + c2, 0.0, 0.0, 0.0, 0.5 * c1;

    Eigen::Matrix<double, 3, 6> B = Eigen::Matrix<double, 3, 6>::Zero();
    for (int i = 0; i < 3; ++i) {
      B(0, 2 * i) = grad[static_cast<size_t>(i)].x();
      B(1, 2 * i + 1) = grad[static_cast<size_t>(i)].y();
      B(2, 2 * i) = grad[static_cast<size_t>(i)].y();
      B(2, 2 * i + 1) = grad[static_cast<size_t>(i)].x();
    }
    const Eigen::Matrix<double, 6, 6> Ke = area * B.transpose() * C * B;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        const int gi = 2 * tri[static_cast<size_t>(i / 2)] + i % 2;
        const int gj = 2 * tri[static_cast<size_t>(j / 2)] + j % 2;
        triplets.emplace_back(gi, gj, Ke(i, j));
      }
  }

  if (config.alpha > 0.0) {
    for (const BoundaryEdge& e : mesh.boundary_edges) {
      const Vec2& a = positions[static_cast<size_t>(e.a)];
      const Vec2& b = positions[static_cast<size_t>(e.b)];
      const double len = (b - a).norm();
      const Vec2 normal = outward_normal(a, b);
      const Eigen::Matrix2d nn = normal * normal.transpose();
      const int nodes[2] = {e.a, e.b};
      const double w[2][2] = {{len / 3.0, len / 6.0}, {len / 6.0, len / 3.0}};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj)
              triplets.emplace_back(2 * nodes[i] + di, 2 * nodes[j] + dj,
                                    config.alpha * w[i][j] * nn(di, dj));
    }
  }

  SparseSystem system;
  system.matrix.resize(2 * n, 2 * n);
  system.matrix.setFromTriplets(triplets.begin(), triplets.end());
  return system;
}

Eigen::VectorXd assemble_rhs_sdf(const Mesh2D& mesh, std::span<const Vec2> positions,
                                 const BoundaryIndex& index) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(mesh.vertices.size()));
  std::vector<double> dist(mesh.vertices.size(), 0.0);
  std::vector<char> have(mesh.vertices.size(), 0);
  auto sdf_at = [&](int v) {
    if (!have[static_cast<size_t>(v)]) {
      dist[static_cast<size_t>(v)] = index.signed_distance(positions[static_cast<size_t>(v)]);
      have[static_cast<size_t>(v)] = 1;
    }
    return dist[static_cast<size_t>(v)];
  };
  for (const BoundaryEdge& e : mesh.boundary_edges) {
    const Vec2& a = positions[static_cast<size_t>(e.a)];
    const Vec2& b = positions[static_cast<size_t>(e.b)];
    const double len = (b - a).norm();
    const Vec2 normal = outward_normal(a, b);
    const double da = sdf_at(e.a), db = sdf_at(e.b);
    // -int d (v.n) with d linear on the edge, exact.
    const double fa = -len * (2.0 * da + db) / 6.0;
    const double fb = -len * (da + 2.0 * db) / 6.0;
    rhs.segment<2>(2 * e.a) += fa * normal;
    rhs.segment<2>(2 * e.b) += fb * normal;
  }
  return rhs;
}

Eigen::VectorXd assemble_rhs_points(const Mesh2D& mesh, std::span<const Vec2> positions,
                                    const BoundaryIndex& index, const ElasticConfig& config) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(mesh.vertices.size()));
  if (config.beta1 == 0.0 || mesh.tracked_points.empty()) return rhs;

  for (const auto& [name, vertex] : mesh.tracked_points) {
    auto it = index.target().tracked_points.find(name);
    if (it == index.target().tracked_points.end())
      throw MeshError("target boundary lacks tracked point '" + name + "'");
    const Vec2 force = it->second - positions[static_cast<size_t>(vertex)];
    for (const BoundaryEdge& e : mesh.boundary_edges) {
      if (e.a != vertex && e.b != vertex) continue;
      const Vec2& a = positions[static_cast<size_t>(e.a)];
      const Vec2& b = positions[static_cast<size_t>(e.b)];
      const double len = (b - a).norm();
      // int F.v over the edge, constant F: each endpoint receives F*len/2.
      rhs.segment<2>(2 * e.a) += config.beta1 * force * (len / 2.0);
      rhs.segment<2>(2 * e.b) += config.beta1 * force * (len / 2.0);
    }
  }
  return rhs;
}

Eigen::VectorXd assemble_rhs_lines(const Mesh2D& mesh, std::span<const Vec2> positions,
                                   const BoundaryField& field, const ElasticConfig& config) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(mesh.vertices.size()));
  if (config.beta2 == 0.0) return rhs;

  for (const BoundaryEdge& e : mesh.boundary_edges) {
    const int sa = field.find(e.a, e.tag);
    const int sb = field.find(e.b, e.tag);
    if (sa < 0 || sb < 0)
      throw MeshError("vector-distance field lacks a sample for a boundary edge");
    const Vec2& Da = field.samples[static_cast<size_t>(sa)].displacement;
    const Vec2& Db = field.samples[static_cast<size_t>(sb)].displacement;
    const Vec2& a = positions[static_cast<size_t>(e.a)];
    const Vec2& b = positions[static_cast<size_t>(e.b)];
    const double len = (b - a).norm();
    if (config.full_vector_line_load) {
      rhs.segment<2>(2 * e.a) += config.beta2 * len * (2.0 * Da + Db) / 6.0;
      rhs.segment<2>(2 * e.b) += config.beta2 * len * (Da + 2.0 * Db) / 6.0;
    } else {
      const Vec2 normal = outward_normal(a, b);
      const double ga = Da.dot(normal), gb = Db.dot(normal);
      rhs.segment<2>(2 * e.a) += config.beta2 * len * (2.0 * ga + gb) / 6.0 * normal;
      rhs.segment<2>(2 * e.b) += config.beta2 * len * (ga + 2.0 * gb) / 6.0 * normal;
    }
  }
  return rhs;
}

Eigen::VectorXd solve(const SparseSystem& system) {
  if (system.matrix.rows() != system.rhs.size())
    throw std::runtime_error("sparse system has no matching right-hand side");
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.compute(system.matrix);
  g_factorizations.fetch_add(1, std::memory_order_relaxed);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("sparse factorization failed");
  Eigen::VectorXd x = solver.solve(system.rhs);
  // A couple of refinement sweeps with the existing factorization push the
  // residual to roundoff even on stiff penalty-dominated systems.
  Eigen::VectorXd residual = system.rhs - system.matrix * x;
  for (int sweep = 0; sweep < 2 && residual.norm() > 1e-14 * system.rhs.norm(); ++sweep) {
    x += solver.solve(residual);
    residual = system.rhs - system.matrix * x;
  }
  const double scale = system.rhs.norm() + system.matrix.norm() * x.norm();
  if (!(residual.norm() <= 1e-8 * std::max(scale, 1e-300)))
    throw std::runtime_error("sparse solve did not reach the required residual");
  return x;
}

Eigen::SparseMatrix<double> assemble_mass(const Mesh2D& mesh, std::span<const Vec2> positions) {
  const int n = static_cast<int>(mesh.vertices.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(9 * mesh.triangles.size());
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const auto& tri = mesh.triangles[static_cast<size_t>(t)];
    const double area = triangle_area(mesh, positions, t);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        triplets.emplace_back(tri[static_cast<size_t>(i)], tri[static_cast<size_t>(j)],
                              area / 12.0 * (i == j ? 2.0 : 1.0));
  }
  Eigen::SparseMatrix<double> mass(n, n);
  mass.setFromTriplets(triplets.begin(), triplets.end());
  return mass;
}

Eigen::SparseMatrix<double> assemble_boundary_mass(const Mesh2D& mesh,
                                                   std::span<const Vec2> positions) {
  const int n = static_cast<int>(mesh.vertices.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * mesh.boundary_edges.size());
  for (const BoundaryEdge& e : mesh.boundary_edges) {
    const double len =
        (positions[static_cast<size_t>(e.b)] - positions[static_cast<size_t>(e.a)]).norm();
    triplets.emplace_back(e.a, e.a, len / 3.0);
    triplets.emplace_back(e.b, e.b, len / 3.0);
    triplets.emplace_back(e.a, e.b, len / 6.0);
    triplets.emplace_back(e.b, e.a, len / 6.0);
  }
  Eigen::SparseMatrix<double> mass(n, n);
  mass.setFromTriplets(triplets.begin(), triplets.end());
  return mass;
}

double mass_dot(const Eigen::SparseMatrix<double>& mass, const Eigen::VectorXd& u,
                const Eigen::VectorXd& v) {
  const Eigen::Index n = mass.rows();
  if (u.size() != 2 * n || v.size() != 2 * n)
    throw std::invalid_argument("mass_dot expects interleaved 2N vector fields");
  Eigen::VectorXd ux(n), uy(n), vx(n), vy(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ux[i] = u[2 * i];
    uy[i] = u[2 * i + 1];
    vx[i] = v[2 * i];
    vy[i] = v[2 * i + 1];
  }
  return ux.dot(mass * vx) + uy.dot(mass * vy);
}

Eigen::VectorXd solve_dirichlet_correction(const Mesh2D& mesh, std::span<const Vec2> positions,
                                           const std::map<int, Vec2>& boundary_values,
                                           const ElasticConfig& config) {
  const int n = static_cast<int>(mesh.vertices.size());

  std::vector<char> on_boundary(static_cast<size_t>(n), 0);
  for (const BoundaryEdge& e : mesh.boundary_edges) {
    on_boundary[static_cast<size_t>(e.a)] = 1;
    on_boundary[static_cast<size_t>(e.b)] = 1;
  }
  for (int v = 0; v < n; ++v)
    if (on_boundary[static_cast<size_t>(v)] && boundary_values.find(v) == boundary_values.end())
      throw MeshError("boundary correction lacks a value for vertex " + std::to_string(v));

  ElasticConfig volume_only = config;
  volume_only.alpha = 0.0;
  const SparseSystem full = assemble_operator(mesh, positions, volume_only);

  // Interior/boundary partition: solve K_II u_I = -K_IB g_B.
  std::vector<int> dof_map(static_cast<size_t>(2 * n), -1);
  int n_interior = 0;
  for (int v = 0; v < n; ++v)
    if (!on_boundary[static_cast<size_t>(v)]) {
      dof_map[static_cast<size_t>(2 * v)] = n_interior++;
      dof_map[static_cast<size_t>(2 * v) + 1] = n_interior++;
    }

  Eigen::VectorXd u = Eigen::VectorXd::Zero(2 * n);
  for (const auto& [v, g] : boundary_values) {
    if (v < 0 || v >= n || !on_boundary[static_cast<size_t>(v)])
      throw MeshError("boundary correction value for non-boundary vertex " + std::to_string(v));
    u.segment<2>(2 * v) = g;
  }
  if (n_interior == 0) return u;

  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_interior);
  for (int col = 0; col < full.matrix.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(full.matrix, col); it; ++it) {
      const int di = dof_map[static_cast<size_t>(it.row())];
      const int dj = dof_map[static_cast<size_t>(it.col())];
      if (di >= 0 && dj >= 0)
        triplets.emplace_back(di, dj, it.value());
      else if (di >= 0)
        rhs[di] -= it.value() * u[it.col()];
    }

  SparseSystem reduced;
  reduced.matrix.resize(n_interior, n_interior);
  reduced.matrix.setFromTriplets(triplets.begin(), triplets.end());
  reduced.rhs = rhs;
  const Eigen::VectorXd ui = solve(reduced);

  for (int dof = 0; dof < 2 * n; ++dof)
    if (dof_map[static_cast<size_t>(dof)] >= 0) u[dof] = ui[dof_map[static_cast<size_t>(dof)]];
  return u;
}

}  // namespace morphrom
