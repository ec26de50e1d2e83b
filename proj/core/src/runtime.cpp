// SPDX-License-Identifier: Apache-2.0
#include "fed/runtime.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <string>

#include "fed/errors.hpp"
#include "kernels.hpp"

namespace fed {

void set_threads(std::size_t n) { kernels::set_threads(n == 0 ? 1 : n); }

std::optional<std::size_t> threads_from_env() {
  const char* raw = std::getenv("FED_THREADS");
  if (raw == nullptr) return std::nullopt;
  std::size_t n = 0;
  const char* end = raw + std::strlen(raw);
  auto [ptr, ec] = std::from_chars(raw, end, n);
  if (ec != std::errc{} || ptr != end || n == 0) {
    throw ConfigError("FED_THREADS must be a positive integer, got '" + std::string(raw) + "'");
  }
  return n;
}

}  // namespace fed
