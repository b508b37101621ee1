#include "phyulstm/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace phyulstm::log {

namespace {

Level from_env() {
  const char* env = std::getenv("PHYULSTM_LOG");
  if (env == nullptr) return Level::warn;
  const std::string v(env);
  if (v == "error") return Level::error;
  if (v == "info") return Level::info;
  if (v == "debug") return Level::debug;
  return Level::warn;
}

std::atomic<int>& current() {
  static std::atomic<int> level{static_cast<int>(from_env())};
  return level;
}

constexpr const char* kTags[] = {"error", "warn", "info", "debug"};

}  // namespace

Level threshold() { return static_cast<Level>(current().load()); }

void set_threshold(Level level) { current().store(static_cast<int>(level)); }

void write(Level level, std::string_view message) {
  if (static_cast<int>(level) > current().load()) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "[phyulstm " << kTags[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace phyulstm::log
