#pragma once

#include <functional>
#include <string_view>

namespace motad::log {

enum class Level { debug, info, warn, error };

void set_level(Level lvl);
Level level();

void write(Level lvl, std::string_view msg);

inline void debug(std::string_view m) { write(Level::debug, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }
inline void error(std::string_view m) { write(Level::error, m); }

// Redirects output; pass an empty function to restore stderr. Used by tests
// that assert on emitted warnings.
using Sink = std::function<void(Level, std::string_view)>;
void set_sink(Sink sink);

}  // namespace motad::log
