#pragma once

// Line-oriented key=value logging. Verbosity comes from EPISYNTH_LOG
// (trace, debug, info, warn, error, off); default is warn.

#include <cstdlib>
#include <memory>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace episynth::log {

inline spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
    auto lg = std::make_shared<spdlog::logger>("episynth", sink);
    lg->set_pattern("level=%l %v");
    const char* env = std::getenv("EPISYNTH_LOG");
    lg->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
    return lg;
  }();
  return *instance;
}

template <class... Args>
void debug(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().debug(fmt, std::forward<Args>(args)...);
}
template <class... Args>
void info(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().info(fmt, std::forward<Args>(args)...);
}
template <class... Args>
void warn(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().warn(fmt, std::forward<Args>(args)...);
}

}  // namespace episynth::log
