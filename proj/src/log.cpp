#include "hcx/log.hpp"

#include "hcx/types.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace hcx::log {

namespace {
std::atomic<Level> g_level{Level::Warn};
std::mutex g_mutex;
} // namespace

void set_level(Level lvl) { g_level = lvl; }
Level level() { return g_level; }

Level parse_level(const std::string& name) {
    if (name == "error") return Level::Error;
    if (name == "warn") return Level::Warn;
    if (name == "info") return Level::Info;
    if (name == "debug") return Level::Debug;
    throw ConfigError("unknown log level '" + name + "' (expected error|warn|info|debug)");
}

void write(Level lvl, const std::string& message) {
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard lock(g_mutex);
    std::cerr << "[" << names[static_cast<int>(lvl)] << "] " << message << '\n';
}

} // namespace hcx::log
