#pragma once

#include <cstdio>
#include <string>
#include <string_view>

namespace unigen {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

inline LogLevel& log_level() {
    static LogLevel level = LogLevel::kInfo;
    return level;
}

inline void set_log_level(std::string_view name) {
    if (name == "error") log_level() = LogLevel::kError;
    else if (name == "warn") log_level() = LogLevel::kWarn;
    else if (name == "info") log_level() = LogLevel::kInfo;
    else if (name == "debug") log_level() = LogLevel::kDebug;
}

inline void log_msg(LogLevel level, const std::string& msg) {
    if (level > log_level()) return;
    const char* tag = level == LogLevel::kError  ? "error"
                      : level == LogLevel::kWarn ? "warn"
                      : level == LogLevel::kInfo ? "info"
                                                 : "debug";
    std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
}

inline void log_error(const std::string& msg) { log_msg(LogLevel::kError, msg); }
inline void log_warn(const std::string& msg) { log_msg(LogLevel::kWarn, msg); }
inline void log_info(const std::string& msg) { log_msg(LogLevel::kInfo, msg); }
inline void log_debug(const std::string& msg) { log_msg(LogLevel::kDebug, msg); }

} // namespace unigen
