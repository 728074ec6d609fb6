#include "morphrom/json_io.hpp"
#include "morphrom/mesh.hpp"
#include "morphrom/serial.hpp"

#include <cstdio>
#include <fstream>
#include <map>

namespace morphrom {

using nlohmann::json;

namespace {

/// Interns a tag name, extending the table on first sight.
int intern_tag(std::vector<std::string>& names, const std::string& name) {
  for (int i = 0; i < static_cast<int>(names.size()); ++i)
    if (names[static_cast<size_t>(i)] == name) return i;
  names.push_back(name);
  return static_cast<int>(names.size()) - 1;
}

}  // namespace

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw MeshError("cannot parse '" + path + "': " + e.what());
  }
}

void reject_unknown_keys(const json& object, const std::vector<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw MeshError("unknown key '" + key + "' in " + where);
  }
}

Mesh2D mesh_from_json(const json& doc, const std::string& where) {
  if (!doc.is_object()) throw MeshError("'" + where + "': top level is not an object");
  reject_unknown_keys(doc, {"vertices", "triangles", "boundary_edges", "tracked_points"}, where);

  Mesh2D mesh;
  try {
    for (const auto& v : doc.at("vertices"))
      mesh.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
    for (const auto& t : doc.at("triangles"))
      mesh.triangles.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
    for (const auto& e : doc.at("boundary_edges")) {
      BoundaryEdge be;
      be.a = e.at(0).get<int>();
      be.b = e.at(1).get<int>();
      be.tag = intern_tag(mesh.tag_names, e.at(2).get<std::string>());
      mesh.boundary_edges.push_back(be);
    }
    if (doc.contains("tracked_points"))
      for (const auto& [name, index] : doc.at("tracked_points").items())
        mesh.tracked_points[name] = index.get<int>();
  } catch (const json::exception& e) {
    throw MeshError("'" + where + "': malformed mesh document: " + e.what());
  }
  validate(mesh);
  return mesh;
}

json mesh_to_json(const Mesh2D& mesh) {
  json doc;
  auto& vertices = doc["vertices"] = json::array();
  for (const Vec2& v : mesh.vertices) vertices.push_back({v.x(), v.y()});
  auto& triangles = doc["triangles"] = json::array();
  for (const auto& t : mesh.triangles) triangles.push_back({t[0], t[1], t[2]});
  auto& edges = doc["boundary_edges"] = json::array();
  for (const BoundaryEdge& e : mesh.boundary_edges)
    edges.push_back({e.a, e.b, mesh.tag_names[static_cast<size_t>(e.tag)]});
  auto& tracked = doc["tracked_points"] = json::object();
  for (const auto& [name, v] : mesh.tracked_points) tracked[name] = v;
  return doc;
}

Mesh2D load_mesh(const std::string& path) {
  return mesh_from_json(read_json_file(path), path);
}

void save_mesh(const Mesh2D& mesh, const std::string& path) {
  write_text_file(path, mesh_to_json(mesh).dump());
}

BoundaryPolyline load_polyline(const std::string& path) {
  const json doc = read_json_file(path);
  if (!doc.is_object()) throw MeshError("'" + path + "': top level is not an object");
  reject_unknown_keys(doc, {"loops", "tracked_points"}, path);

  BoundaryPolyline poly;
  try {
    for (const auto& l : doc.at("loops")) {
      reject_unknown_keys(l, {"points", "segment_tags"}, path);
      PolylineLoop loop;
      for (const auto& p : l.at("points"))
        loop.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      for (const auto& t : l.at("segment_tags"))
        loop.segment_tags.push_back(intern_tag(poly.tag_names, t.get<std::string>()));
      if (loop.points.size() != loop.segment_tags.size() || loop.points.size() < 3)
        throw MeshError("'" + path + "': loop needs n>=3 points and one tag per segment");
      poly.loops.push_back(std::move(loop));
    }
    if (doc.contains("tracked_points"))
      for (const auto& [name, p] : doc.at("tracked_points").items())
        poly.tracked_points[name] = Vec2(p.at(0).get<double>(), p.at(1).get<double>());
  } catch (const json::exception& e) {
    throw MeshError("'" + path + "': malformed polyline document: " + e.what());
  }
  if (poly.loops.empty()) throw MeshError("'" + path + "': polyline has no loops");
  return poly;
}

void save_polyline(const BoundaryPolyline& poly, const std::string& path) {
  json doc;
  auto& loops = doc["loops"] = json::array();
  for (const PolylineLoop& loop : poly.loops) {
    json l;
    auto& points = l["points"] = json::array();
    for (const Vec2& p : loop.points) points.push_back({p.x(), p.y()});
    auto& tags = l["segment_tags"] = json::array();
    for (int t : loop.segment_tags) tags.push_back(poly.tag_names[static_cast<size_t>(t)]);
    loops.push_back(std::move(l));
  }
  auto& tracked = doc["tracked_points"] = json::object();
  for (const auto& [name, p] : poly.tracked_points) tracked[name] = {p.x(), p.y()};
  write_text_file(path, doc.dump());
}

void export_vtk(const Mesh2D& mesh, std::span<const Vec2> positions,
                const std::vector<std::pair<std::string, Eigen::VectorXd>>& fields,
                const std::string& path) {
  std::string out;
  out.reserve(64 * positions.size());
  out += "# vtk DataFile Version 3.0\ntriangulation\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  char line[128];
  std::snprintf(line, sizeof line, "POINTS %zu double\n", positions.size());
  out += line;
  for (const Vec2& p : positions) {
    std::snprintf(line, sizeof line, "%.17g %.17g 0\n", p.x(), p.y());
    out += line;
  }
  std::snprintf(line, sizeof line, "CELLS %zu %zu\n", mesh.triangles.size(),
                4 * mesh.triangles.size());
  out += line;
  for (const auto& t : mesh.triangles) {
    std::snprintf(line, sizeof line, "3 %d %d %d\n", t[0], t[1], t[2]);
    out += line;
  }
  std::snprintf(line, sizeof line, "CELL_TYPES %zu\n", mesh.triangles.size());
  out += line;
  for (size_t t = 0; t < mesh.triangles.size(); ++t) out += "5\n";
  if (!fields.empty()) {
    std::snprintf(line, sizeof line, "POINT_DATA %zu\n", positions.size());
    out += line;
    for (const auto& [name, values] : fields) {
      if (values.size() != 2 * static_cast<Eigen::Index>(positions.size()))
        throw MeshError("VTK field '" + name + "' length does not match the mesh");
      std::snprintf(line, sizeof line, "VECTORS %s double\n", name.c_str());
      out += line;
      for (size_t i = 0; i < positions.size(); ++i) {
        std::snprintf(line, sizeof line, "%.17g %.17g 0\n",
                      values[2 * static_cast<Eigen::Index>(i)],
                      values[2 * static_cast<Eigen::Index>(i) + 1]);
        out += line;
      }
    }
  }
  write_text_file(path, out);
}

}  // namespace morphrom
