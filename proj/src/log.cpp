#include "densitycp/log.hpp"

#include <iostream>
#include <mutex>

namespace densitycp::log {

namespace {
std::mutex sink_mutex;
Sink current_sink;
} // namespace

void warn(const std::string& message) {
  std::lock_guard lock(sink_mutex);
  if (current_sink) {
    current_sink(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

Sink set_warning_sink(Sink sink) {
  std::lock_guard lock(sink_mutex);
  Sink previous = std::move(current_sink);
  current_sink = std::move(sink);
  return previous;
}

} // namespace densitycp::log
