#include "silofl/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace silofl::log {

namespace {

Level parse_level(const char* text) {
  if (text == nullptr) return Level::kWarn;
  std::string s(text);
  if (s == "debug") return Level::kDebug;
  if (s == "info") return Level::kInfo;
  if (s == "warn") return Level::kWarn;
  if (s == "error") return Level::kError;
  if (s == "off") return Level::kOff;
  return Level::kWarn;
}

const char* tag(Level level) {
  switch (level) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
    default: return "?";
  }
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Level threshold() {
  static const Level level = parse_level(std::getenv("SILOFL_LOG"));
  return level;
}

void write(Level level, std::string_view message) {
  if (level < threshold()) return;
  std::lock_guard<std::mutex> lock(sink_mutex());
  std::cerr << "[silofl " << tag(level) << "] " << message << "\n";
}

}  // namespace silofl::log
