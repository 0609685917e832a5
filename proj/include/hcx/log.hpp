#pragma once

#include <sstream>
#include <string>

namespace hcx::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

void set_level(Level level);
Level level();
/// Parses error|warn|info|debug; throws ConfigError otherwise.
Level parse_level(const std::string& name);

void write(Level level, const std::string& message);

template <class... Args>
void emit(Level lvl, const Args&... args) {
    if (lvl > level()) return;
    std::ostringstream out;
    (out << ... << args);
    write(lvl, out.str());
}

template <class... Args> void warn(const Args&... args) { emit(Level::Warn, args...); }
template <class... Args> void info(const Args&... args) { emit(Level::Info, args...); }
template <class... Args> void debug(const Args&... args) { emit(Level::Debug, args...); }

} // namespace hcx::log
