#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <mutex>
#include <string>

namespace vemreg {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

namespace detail {
inline LogLevel& log_threshold() {
  static LogLevel level = LogLevel::kInfo;
  return level;
}
inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

inline void set_log_level(LogLevel level) { detail::log_threshold() = level; }

inline LogLevel log_level_from_string(const std::string& s) {
  if (s == "debug") return LogLevel::kDebug;
  if (s == "info") return LogLevel::kInfo;
  if (s == "warn") return LogLevel::kWarn;
  if (s == "error") return LogLevel::kError;
  throw std::invalid_argument("unknown log level: " + s);
}

// Structured line to stderr: ISO timestamp, level, message. Results never go
// through this channel; stdout stays clean for data.
template <typename... Args>
void log_line(LogLevel level, const char* fmt, Args... args) {
  if (level < detail::log_threshold()) return;
  const char* names[] = {"DEBUG", "INFO", "WARN", "ERROR"};
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm_utc;
  gmtime_r(&t, &tm_utc);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  std::lock_guard<std::mutex> lock(detail::log_mutex());
  std::fprintf(stderr, "%s %s ", stamp, names[static_cast<int>(level)]);
  std::fprintf(stderr, fmt, args...);
  std::fputc('\n', stderr);
}

inline void log_line(LogLevel level, const char* msg) { log_line(level, "%s", msg); }

#define VEMREG_DEBUG(...) ::vemreg::log_line(::vemreg::LogLevel::kDebug, __VA_ARGS__)
#define VEMREG_INFO(...) ::vemreg::log_line(::vemreg::LogLevel::kInfo, __VA_ARGS__)
#define VEMREG_WARN(...) ::vemreg::log_line(::vemreg::LogLevel::kWarn, __VA_ARGS__)
#define VEMREG_ERROR(...) ::vemreg::log_line(::vemreg::LogLevel::kError, __VA_ARGS__)

}  // namespace vemreg
