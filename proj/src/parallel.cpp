// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "neuromerge/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace neuromerge {

unsigned default_thread_count() {
  if (const char* env = std::getenv("NEUROMERGE_THREADS")) {
    unsigned value = 0;
    const char* end = env + std::strlen(env);
    auto [ptr, ec] = std::from_chars(env, end, value);
    if (ec == std::errc() && ptr == end && value > 0) return value;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace neuromerge
