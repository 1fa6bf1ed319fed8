#include "emo/log.hpp"

#include <iostream>
#include <mutex>

namespace emo {

namespace {

std::mutex g_log_mutex;
bool g_verbose = false;

void default_sink(LogLevel level, const std::string& msg) {
  if (level == LogLevel::kWarning) {
    std::cerr << "WARNING: " << msg << '\n';
  } else if (g_verbose) {
    std::cerr << "LOG: " << msg << '\n';
  }
}

LogSink& sink() {
  static LogSink s = default_sink;
  return s;
}

void emit(LogLevel level, const std::string& msg) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  sink()(level, msg);
}

}  // namespace

LogSink set_log_sink(LogSink s) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  LogSink prev = std::move(sink());
  sink() = s ? std::move(s) : LogSink(default_sink);
  return prev;
}

void set_verbose(bool verbose) { g_verbose = verbose; }

void log_info(const std::string& msg) { emit(LogLevel::kInfo, msg); }
void log_warning(const std::string& msg) { emit(LogLevel::kWarning, msg); }

WarningCapture::WarningCapture() {
  prev_ = set_log_sink([this](LogLevel level, const std::string& msg) {
    if (level != LogLevel::kWarning) return;
    ++count_;
    last_ = msg;
    all_ += msg;
    all_ += '\n';
  });
}

WarningCapture::~WarningCapture() { set_log_sink(std::move(prev_)); }

bool WarningCapture::contains(const std::string& needle) const {
  return all_.find(needle) != std::string::npos;
}

}  // namespace emo
