#include "motad/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace motad::log {

namespace {

std::atomic<Level> g_level{Level::info};
std::mutex g_mutex;
Sink g_sink;

const char* tag(Level lvl) {
  switch (lvl) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
  }
  return "?";
}

}  // namespace

void set_level(Level lvl) { g_level.store(lvl); }
Level level() { return g_level.load(); }

void write(Level lvl, std::string_view msg) {
  std::lock_guard lock(g_mutex);
  if (g_sink) {
    g_sink(lvl, msg);
    return;
  }
  if (lvl < g_level.load()) return;
  std::cerr << "[" << tag(lvl) << "] " << msg << '\n';
}

void set_sink(Sink sink) {
  std::lock_guard lock(g_mutex);
  g_sink = std::move(sink);
}

}  // namespace motad::log
