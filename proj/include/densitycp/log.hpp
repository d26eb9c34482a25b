#pragma once

#include <functional>
#include <string>

namespace densitycp::log {

using Sink = std::function<void(const std::string&)>;

// Warnings go to stderr unless a sink is installed. Tests install a
// capturing sink; the CLI leaves the default.
void warn(const std::string& message);

// Returns the previous sink. Passing an empty function restores stderr.
Sink set_warning_sink(Sink sink);

// Installs a sink for the lifetime of the guard.
class ScopedSink {
public:
  explicit ScopedSink(Sink sink) : previous_(set_warning_sink(std::move(sink))) {}
  ~ScopedSink() { set_warning_sink(std::move(previous_)); }
  ScopedSink(const ScopedSink&) = delete;
  ScopedSink& operator=(const ScopedSink&) = delete;

private:
  Sink previous_;
};

} // namespace densitycp::log
