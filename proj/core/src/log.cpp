#include "ckrl/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace ckrl {
namespace {
std::atomic<bool> g_quiet{false};
std::mutex g_mutex;
}  // namespace

void set_quiet(bool quiet) { g_quiet = quiet; }

void log(LogLevel level, std::string_view message) {
  if (level == LogLevel::Info && g_quiet) return;
  std::lock_guard lock(g_mutex);
  std::cerr << (level == LogLevel::Info ? "[ckrl] " : "[ckrl] warning: ") << message << '\n';
}

}  // namespace ckrl
