/*
 * Copyright 2026 Osmosis Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "osmosis/core/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace osmosis::log {

namespace {
std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;
constexpr std::string_view kNames[] = {"debug", "info", "warn", "error"};
}  // namespace

void set_level(Level lvl) { g_level = lvl; }

Level level() { return g_level; }

void write(Level lvl, std::string_view message) {
  if (static_cast<int>(lvl) < static_cast<int>(g_level.load())) return;
  std::lock_guard lock(g_mutex);
  std::cerr << '[' << kNames[static_cast<int>(lvl)] << "] " << message << '\n';
}

}  // namespace osmosis::log
