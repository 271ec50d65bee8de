#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <string_view>

namespace pathrex {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Verbosity comes from PATHREX_LOG (error|warn|info|debug or 0..3); default warn.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("PATHREX_LOG");
        if (env == nullptr || *env == '\0') return LogLevel::kWarn;
        if (std::strcmp(env, "error") == 0 || std::strcmp(env, "0") == 0) return LogLevel::kError;
        if (std::strcmp(env, "warn") == 0 || std::strcmp(env, "1") == 0) return LogLevel::kWarn;
        if (std::strcmp(env, "info") == 0 || std::strcmp(env, "2") == 0) return LogLevel::kInfo;
        if (std::strcmp(env, "debug") == 0 || std::strcmp(env, "3") == 0) return LogLevel::kDebug;
        return LogLevel::kWarn;
    }();
    return level;
}

inline void log(LogLevel level, const std::string& msg) {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (static_cast<int>(level) <= static_cast<int>(log_level())) {
        std::fprintf(stderr, "pathrex [%s] %s\n", names[static_cast<int>(level)], msg.c_str());
    }
}

inline void log_warn(const std::string& msg) { log(LogLevel::kWarn, msg); }
inline void log_info(const std::string& msg) { log(LogLevel::kInfo, msg); }
inline void log_debug(const std::string& msg) { log(LogLevel::kDebug, msg); }

}  // namespace pathrex
