// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "dohpool/log.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <sstream>

namespace dohpool::log {

namespace {

std::atomic<Level> g_level{Level::Info};
std::mutex g_mutex;

std::string_view level_name(Level level) {
  switch (level) {
    case Level::Off:   return "off";
    case Level::Error: return "error";
    case Level::Warn:  return "warn";
    case Level::Info:  return "info";
    case Level::Debug: return "debug";
  }
  return "?";
}

void append_value(std::string& out, const std::string& value) {
  if (value.find(' ') == std::string::npos &&
      value.find('"') == std::string::npos) {
    out += value;
    return;
  }
  out += '"';
  for (const char c : value) {
    if (c == '"') out += '\\';
    out += c;
  }
  out += '"';
}

}  // namespace

void set_level(Level level) { g_level.store(level); }

Level level() { return g_level.load(); }

Level level_from_string(std::string_view name) {
  if (name == "off") return Level::Off;
  if (name == "error") return Level::Error;
  if (name == "warn") return Level::Warn;
  if (name == "info") return Level::Info;
  if (name == "debug") return Level::Debug;
  return Level::Info;
}

void write(Level level, std::string_view event,
           std::initializer_list<Field> fields) {
  if (level == Level::Off || level > g_level.load()) return;

  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      now.time_since_epoch())
                      .count() %
                  1000;
  char ts[64];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::snprintf(ts, sizeof ts, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<int>(ms));

  std::string line(ts);
  line += " level=";
  line += level_name(level);
  line += " event=";
  line += event;
  for (const auto& [key, value] : fields) {
    line += ' ';
    line += key;
    line += '=';
    append_value(line, value);
  }
  line += '\n';

  std::lock_guard<std::mutex> lock(g_mutex);
  std::fputs(line.c_str(), stderr);
}

}  // namespace dohpool::log
