#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace noisere {

enum class LogLevel { quiet = 0, warn = 1, info = 2, debug = 3 };

// Verbosity comes from NOISE_RE_LOG (quiet|warn|info|debug); default info.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("NOISE_RE_LOG");
    if (!env) return LogLevel::info;
    const std::string v(env);
    if (v == "quiet") return LogLevel::quiet;
    if (v == "warn") return LogLevel::warn;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

inline void log_at(LogLevel lvl, const std::string& msg) {
  if (static_cast<int>(lvl) <= static_cast<int>(log_level())) {
    std::fprintf(stderr, "[noisere] %s\n", msg.c_str());
    std::fflush(stderr);
  }
}

inline void log_warn(const std::string& msg) { log_at(LogLevel::warn, "warning: " + msg); }
inline void log_info(const std::string& msg) { log_at(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log_at(LogLevel::debug, msg); }

}  // namespace noisere
