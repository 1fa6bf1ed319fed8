#pragma once

#include <functional>
#include <string>

namespace emo {

enum class LogLevel { kInfo, kWarning };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Replaces the process-wide sink and returns the previous one. The default
// sink writes warnings to stderr and drops info messages unless verbose.
LogSink set_log_sink(LogSink sink);
void set_verbose(bool verbose);

void log_info(const std::string& msg);
void log_warning(const std::string& msg);

// Collects warnings for the lifetime of the object; restores the previous
// sink on destruction. Used by tests that check a guard path fired.
class WarningCapture {
 public:
  WarningCapture();
  ~WarningCapture();
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  int count() const { return count_; }
  const std::string& last() const { return last_; }
  bool contains(const std::string& needle) const;

 private:
  LogSink prev_;
  int count_ = 0;
  std::string last_;
  std::string all_;
};

}  // namespace emo
