#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <string_view>

namespace kadr::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

inline std::atomic<Level>& threshold() {
    static std::atomic<Level> level{Level::warn};
    return level;
}

inline void set_level(Level level) { threshold().store(level); }

inline void write(Level level, std::string_view tag, std::string_view message) {
    if (level < threshold().load()) return;
    static std::mutex mu;
    static constexpr std::string_view names[] = {"DEBUG", "INFO", "WARN", "ERROR"};
    std::lock_guard lock(mu);
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << tag << ": " << message << '\n';
}

inline void info(std::string_view tag, std::string_view message) { write(Level::info, tag, message); }
inline void warn(std::string_view tag, std::string_view message) { write(Level::warn, tag, message); }
inline void error(std::string_view tag, std::string_view message) { write(Level::error, tag, message); }

}  // namespace kadr::log
