#include "morphrom/serial.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace morphrom {

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string format_double(double value) {
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, value);
    if (std::strtod(buf, nullptr) == value) break;
  }
  return buf;
}

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}
}  // namespace

std::string base64_encode(const Eigen::MatrixXd& m) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
  const size_t n = static_cast<size_t>(m.size()) * sizeof(double);
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  for (size_t i = 0; i < n; i += 3) {
    uint32_t word = static_cast<uint32_t>(bytes[i]) << 16;
    if (i + 1 < n) word |= static_cast<uint32_t>(bytes[i + 1]) << 8;
    if (i + 2 < n) word |= static_cast<uint32_t>(bytes[i + 2]);
    out += kAlphabet[(word >> 18) & 63];
    out += kAlphabet[(word >> 12) & 63];
    out += i + 1 < n ? kAlphabet[(word >> 6) & 63] : '=';
    out += i + 2 < n ? kAlphabet[word & 63] : '=';
  }
  return out;
}

Eigen::MatrixXd base64_decode(const std::string& text, Eigen::Index rows, Eigen::Index cols) {
  std::string bytes;
  bytes.reserve(text.size() / 4 * 3);
  uint32_t word = 0;
  int have = 0;
  for (char c : text) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    const int v = decode_char(c);
    if (v < 0) throw std::runtime_error("invalid base64 payload");
    word = (word << 6) | static_cast<uint32_t>(v);
    if (++have == 4) {
      bytes += static_cast<char>((word >> 16) & 0xff);
      bytes += static_cast<char>((word >> 8) & 0xff);
      bytes += static_cast<char>(word & 0xff);
      have = 0;
      word = 0;
    }
  }
  if (have == 2) {
    bytes += static_cast<char>((word >> 4) & 0xff);
  } else if (have == 3) {
    bytes += static_cast<char>((word >> 10) & 0xff);
    bytes += static_cast<char>((word >> 2) & 0xff);
  } else if (have != 0) {
    throw std::runtime_error("truncated base64 payload");
  }

  Eigen::MatrixXd m(rows, cols);
  const size_t need = static_cast<size_t>(m.size()) * sizeof(double);
  if (bytes.size() != need)
    throw std::runtime_error("base64 payload has " + std::to_string(bytes.size()) +
                             " bytes, expected " + std::to_string(need));
  std::memcpy(m.data(), bytes.data(), need);
  return m;
}

}  // namespace morphrom
