#pragma once

#include <string>

/// Minimal stderr logger controlled by the MORPHROM_LOG environment variable:
/// "quiet" (default), "info", or "debug".
namespace morphrom::log {

enum class Level { quiet = 0, info = 1, debug = 2 };

/// Level parsed from MORPHROM_LOG (cached after the first call).
Level level();

void info(const std::string& message);
void debug(const std::string& message);

}  // namespace morphrom::log
