#include "morphrom/logging.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace morphrom::log {

Level level() {
  static const Level cached = [] {
    const char* env = std::getenv("MORPHROM_LOG");
    if (env == nullptr) return Level::quiet;
    if (std::strcmp(env, "debug") == 0) return Level::debug;
    if (std::strcmp(env, "info") == 0) return Level::info;
    return Level::quiet;
  }();
  return cached;
}

void info(const std::string& message) {
  if (level() >= Level::info) std::fprintf(stderr, "[morphrom] %s\n", message.c_str());
}

void debug(const std::string& message) {
  if (level() >= Level::debug) std::fprintf(stderr, "[morphrom] %s\n", message.c_str());
}

}  // namespace morphrom::log
