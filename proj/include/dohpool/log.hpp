// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

namespace dohpool::log {

enum class Level { Off = 0, Error, Warn, Info, Debug };

void set_level(Level level);
Level level();
// Accepts off|error|warn|info|debug; anything else returns Info.
Level level_from_string(std::string_view name);

using Field = std::pair<std::string_view, std::string>;

// One structured line: `ts level=info event=query k=3 ...`. Values with
// spaces are quoted.
void write(Level level, std::string_view event,
           std::initializer_list<Field> fields);

inline void error(std::string_view event, std::initializer_list<Field> f = {}) {
  write(Level::Error, event, f);
}
inline void warn(std::string_view event, std::initializer_list<Field> f = {}) {
  write(Level::Warn, event, f);
}
inline void info(std::string_view event, std::initializer_list<Field> f = {}) {
  write(Level::Info, event, f);
}
inline void debug(std::string_view event, std::initializer_list<Field> f = {}) {
  write(Level::Debug, event, f);
}

}  // namespace dohpool::log
