#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

/// Triangulated 2-D geometry: the mesh data model, file formats, synthetic
/// test geometries and element-quality reporting.  All meshes are conforming
/// triangulations with counter-clockwise elements and explicitly tagged
/// boundary edges; boundary loops are closed and traversed with the domain on
/// the left.  Objects are immutable after construction/validation and safe to
/// share across threads read-only.
namespace morphrom {

using Vec2 = Eigen::Vector2d;

/// Thrown on malformed meshes, unreadable files and violated preconditions.
class MeshError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Directed boundary edge a->b (domain on the left) carrying one tag id.
struct BoundaryEdge {
  int a = -1;
  int b = -1;
  int tag = -1;
};

/// One closed boundary loop; segment k runs vertices[k] -> vertices[(k+1)%n]
/// and edge_ids[k] indexes the corresponding entry of Mesh2D::boundary_edges.
struct BoundaryLoop {
  std::vector<int> vertices;
  std::vector<int> edge_ids;
};

/// Conforming triangle mesh with tagged boundary and named tracked vertices.
struct Mesh2D {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;   ///< CCW vertex triples
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<std::string> tag_names;          ///< tag id -> name
  std::map<std::string, int> tracked_points;   ///< name -> boundary vertex id
  std::vector<BoundaryLoop> loops;             ///< derived by validate()
};

/// Closed polygonal loop of a target boundary; segment k runs
/// points[k] -> points[(k+1)%n] and carries segment_tags[k].
struct PolylineLoop {
  std::vector<Vec2> points;
  std::vector<int> segment_tags;
};

/// Mesh-free boundary description used as morphing target: tagged segment
/// loops plus named target positions for tracked points.
struct BoundaryPolyline {
  std::vector<PolylineLoop> loops;
  std::vector<std::string> tag_names;
  std::map<std::string, Vec2> tracked_points;
};

/// Per-element shape-regularity report (longest edge / shortest edge).
struct QualityReport {
  std::vector<int> elements;    ///< element ids covered by the report
  Eigen::VectorXd ratios;       ///< ratio per covered element
  double max_ratio = 0.0;
  int worst_element = -1;
};

/// Interpolation of a coarse nodal field onto a finer mesh of the same shape.
struct InterpolatedField {
  Eigen::VectorXd values;         ///< 2*N_fine interleaved (x0,y0,x1,y1,...)
  int outside_snapped = 0;        ///< fine vertices matched by nearest-element snap
  bool displaced_positive = true; ///< fine mesh keeps positive areas when displaced
};

// -- invariants and basic queries -------------------------------------------

/// Checks all structural invariants (index ranges, CCW orientation, boundary
/// edges = edges with exactly one incident triangle, every boundary edge
/// tagged, loops closed and simple, tracked points on the boundary) and
/// fills mesh.loops.  Throws MeshError naming the offending entity.
void validate(Mesh2D& mesh);

/// Signed area of triangle t evaluated at the given vertex positions.
double triangle_area(const Mesh2D& mesh, std::span<const Vec2> positions, int t);

/// Sum of signed triangle areas at the given positions.
double total_area(const Mesh2D& mesh, std::span<const Vec2> positions);

/// True iff every triangle has signed area > floor at the given positions.
bool all_areas_positive(const Mesh2D& mesh, std::span<const Vec2> positions,
                        double floor = 0.0);

/// Tag id for a name; throws MeshError if absent.
int tag_id(const std::vector<std::string>& tag_names, const std::string& name);

/// Extracts the tagged boundary loops (with tracked-point coordinates) from a
/// validated mesh at the given vertex positions.
BoundaryPolyline boundary_polyline(const Mesh2D& mesh, std::span<const Vec2> positions);
BoundaryPolyline boundary_polyline(const Mesh2D& mesh);

/// Total length of all loops of a polyline.
double polyline_length(const BoundaryPolyline& poly);

/// Shoelace area of one closed loop (positive when CCW).
double loop_area(const PolylineLoop& loop);

/// Largest pairwise extent of the vertex set (bounding-box diagonal).
double mesh_diameter(std::span<const Vec2> positions);

// -- displacement field helpers ----------------------------------------------

/// Packs positions into a 2N vector (x0,y0,x1,y1,...).
Eigen::VectorXd pack_positions(std::span<const Vec2> positions);

/// Unpacks a 2N vector into positions.
std::vector<Vec2> unpack_positions(const Eigen::VectorXd& packed);

/// positions + displacement (2N interleaved), returned as positions.
[[nodiscard]] std::vector<Vec2> displace(std::span<const Vec2> positions, const Eigen::VectorXd& u);

// -- file formats -------------------------------------------------------------

/// Reads a mesh from the canonical JSON schema and validates it.
Mesh2D load_mesh(const std::string& path);

/// Writes the canonical JSON schema; loading the written file reproduces the
/// mesh exactly (bit-identical coordinates).
void save_mesh(const Mesh2D& mesh, const std::string& path);

/// Reads / writes a boundary polyline in the matching JSON schema.
BoundaryPolyline load_polyline(const std::string& path);
void save_polyline(const BoundaryPolyline& poly, const std::string& path);

/// Legacy ASCII VTK export of the mesh at the given positions with optional
/// named nodal vector fields (each 2N interleaved).
void export_vtk(const Mesh2D& mesh, std::span<const Vec2> positions,
                const std::vector<std::pair<std::string, Eigen::VectorXd>>& fields,
                const std::string& path);

// -- synthetic geometries ------------------------------------------------------

/// Square plate [-1,1]^2 with a through hole of radius R formed by two
/// half-disks centred at (-1,0) and (1,0).  Boundary tags: arc_left,
/// arc_right, wall_top, wall_bottom; tracked points at the four
/// arc/wall junctions (+-1, +-R).  h controls element size.
Mesh2D synth_plate(double radius, double h);

/// Boundary-only version of synth_plate (for morphing targets).
BoundaryPolyline plate_boundary(double radius, double h);

/// Plate-like boundary whose holes are square notches of the given half-width
/// instead of half-disks (same tags and tracked points as plate_boundary);
/// used as an out-of-family morphing target.
BoundaryPolyline notched_plate_boundary(double half_width, double h);

/// Four-digit-series airfoil (camber m, camber position p, thickness t,
/// closed trailing edge) meshed as an O-grid out to a circular far field of
/// the given radius centred at mid-chord.  Boundary tags: upper, lower,
/// farfield; tracked points leading_edge (0,0) and trailing_edge (1,0).
Mesh2D synth_airfoil(double m, double p, double t, int n_boundary,
                     double farfield_radius);

/// Boundary-only version of synth_airfoil.
BoundaryPolyline airfoil_boundary(double m, double p, double t, int n_boundary,
                                  double farfield_radius);

// -- quality and transfer -------------------------------------------------------

/// Longest-edge / shortest-edge ratio per element (1 for equilateral).
/// An empty mask covers all elements.  Throws MeshError on empty selection.
QualityReport shape_regularity(const Mesh2D& mesh, std::span<const Vec2> positions,
                               std::span<const int> mask = {});
QualityReport shape_regularity(const Mesh2D& mesh);

/// Carries a coarse nodal displacement (2N_coarse interleaved) onto the
/// vertices of a finer mesh of the same shape by P1 interpolation.  Fine
/// vertices outside every coarse element are snapped to the nearest element
/// if within snap_tolerance of it, else MeshError.  Warns (via the log) if
/// the displaced fine mesh loses element positivity.
InterpolatedField interpolate_morphing(const Mesh2D& coarse,
                                       const Eigen::VectorXd& coarse_displacement,
                                       const Mesh2D& fine, double snap_tolerance);

}  // namespace morphrom
