#include "allwas/log.hpp"

#include <iostream>
#include <mutex>

namespace allwas {
namespace {
std::mutex sink_mutex;

WarningSink& sink_slot() {
  static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}
}  // namespace

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(sink_mutex);
  auto previous = std::move(sink_slot());
  sink_slot() = std::move(sink);
  return previous;
}

void warn(const std::string& message) {
  std::lock_guard lock(sink_mutex);
  if (sink_slot()) sink_slot()(message);
}

}  // namespace allwas
