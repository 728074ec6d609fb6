#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

/// Small serialization helpers shared by the file formats: atomic-ish text
/// file writing, base64 for dense arrays (little-endian IEEE 754 doubles) and
/// deterministic number formatting.
namespace morphrom {

/// Writes content to path, throwing MeshError-compatible std::runtime_error
/// on failure.
void write_text_file(const std::string& path, const std::string& content);

/// Reads a whole text file.
std::string read_text_file(const std::string& path);

/// Shortest %.17g representation (round-trips exactly).
std::string format_double(double value);

/// Base64 of the raw little-endian bytes of a column-major dense matrix.
std::string base64_encode(const Eigen::MatrixXd& m);

/// Inverse of base64_encode given the stored shape.
Eigen::MatrixXd base64_decode(const std::string& text, Eigen::Index rows, Eigen::Index cols);

}  // namespace morphrom
