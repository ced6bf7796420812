#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace splitmesh {

// Stderr logger gated by the SPLITMESH_LOG environment variable:
// error | warn (default) | info | debug.
enum class LogLevel : int { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline LogLevel log_threshold() {
    static LogLevel level = [] {
        const char* env = std::getenv("SPLITMESH_LOG");
        if (!env) return LogLevel::Warn;
        if (std::strcmp(env, "error") == 0) return LogLevel::Error;
        if (std::strcmp(env, "info") == 0) return LogLevel::Info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

inline void log_at(LogLevel level, const char* tag, const std::string& msg) {
    if (static_cast<int>(level) > static_cast<int>(log_threshold())) return;
    std::fprintf(stderr, "[splitmesh %s] %s\n", tag, msg.c_str());
}

inline void log_error(const std::string& msg) { log_at(LogLevel::Error, "error", msg); }
inline void log_warn(const std::string& msg) { log_at(LogLevel::Warn, "warn", msg); }
inline void log_info(const std::string& msg) { log_at(LogLevel::Info, "info", msg); }
inline void log_debug(const std::string& msg) { log_at(LogLevel::Debug, "debug", msg); }

}  // namespace splitmesh
