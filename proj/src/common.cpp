#include "valpat/common.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace valpat {

namespace {

LogLevel parse_level_env() {
  const char* env = std::getenv("VALPAT_LOG_LEVEL");
  if (env == nullptr) return LogLevel::warn;
  const std::string value(env);
  if (value == "error") return LogLevel::error;
  if (value == "warn") return LogLevel::warn;
  if (value == "info") return LogLevel::info;
  if (value == "debug") return LogLevel::debug;
  std::cerr << "[valpat] unknown VALPAT_LOG_LEVEL '" << value << "', using warn\n";
  return LogLevel::warn;
}

LogLevel& level_storage() {
  static LogLevel level = parse_level_env();
  return level;
}

const char* level_name(LogLevel level) {
  switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::warn: return "warn";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
  }
  return "?";
}

std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

LogLevel log_level() { return level_storage(); }

void set_log_level(LogLevel level) { level_storage() = level; }

void log_message(LogLevel level, const std::string& message) {
  std::lock_guard<std::mutex> lock(log_mutex());
  std::cerr << "[valpat:" << level_name(level) << "] " << message << '\n';
}

}  // namespace valpat
