#pragma once

// Minimal stderr logger; verbosity comes from the VOXREC_LOG environment
// variable (debug, info, warn, error; default warn so library use is quiet).

#include <cstdlib>
#include <iostream>
#include <string>

namespace voxrec {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };

inline LogLevel log_threshold() {
  static const LogLevel level = [] {
    const char* env = std::getenv("VOXREC_LOG");
    if (env == nullptr) return LogLevel::warn;
    const std::string s(env);
    if (s == "debug") return LogLevel::debug;
    if (s == "info") return LogLevel::info;
    if (s == "error") return LogLevel::error;
    return LogLevel::warn;
  }();
  return level;
}

inline void log_at(LogLevel level, const char* tag, const std::string& msg) {
  if (level < log_threshold()) return;
  std::cerr << "[voxrec " << tag << "] " << msg << "\n";
}

inline void log_debug(const std::string& msg) { log_at(LogLevel::debug, "debug", msg); }
inline void log_info(const std::string& msg) { log_at(LogLevel::info, "info", msg); }
inline void log_warn(const std::string& msg) { log_at(LogLevel::warn, "warn", msg); }
inline void log_error(const std::string& msg) { log_at(LogLevel::error, "error", msg); }

}  // namespace voxrec
