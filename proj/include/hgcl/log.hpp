/*
 * Copyright 2026 The hgcl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <iostream>
#include <sstream>
#include <string_view>

namespace hgcl::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kSilent = 4 };

inline Level& threshold() {
  static Level level = Level::kInfo;
  return level;
}

inline void set_level(Level level) { threshold() = level; }

template <typename... Args>
void write(Level level, std::string_view tag, const Args&... args) {
  if (level < threshold()) return;
  std::ostringstream os;
  os << "[hgcl " << tag << "] ";
  (os << ... << args);
  os << '\n';
  std::cerr << os.str();
}

template <typename... Args>
void debug(const Args&... args) { write(Level::kDebug, "debug", args...); }
template <typename... Args>
void info(const Args&... args) { write(Level::kInfo, "info", args...); }
template <typename... Args>
void warn(const Args&... args) { write(Level::kWarn, "warn", args...); }
template <typename... Args>
void error(const Args&... args) { write(Level::kError, "error", args...); }

}  // namespace hgcl::log
