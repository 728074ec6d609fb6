#pragma once

#include "morphrom/mesh.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

/// Shared JSON helpers: strict parsing with path-tagged errors and the
/// mesh document schema used both standalone and embedded in model files.
namespace morphrom {

nlohmann::json read_json_file(const std::string& path);

/// Throws MeshError on any key outside the known list.
void reject_unknown_keys(const nlohmann::json& object, const std::vector<std::string>& known,
                         const std::string& where);

nlohmann::json mesh_to_json(const Mesh2D& mesh);

/// Parses and validates a mesh document; `where` names the source in errors.
Mesh2D mesh_from_json(const nlohmann::json& doc, const std::string& where);

}  // namespace morphrom
