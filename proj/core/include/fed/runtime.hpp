// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>

namespace fed {

/// Worker threads for the linear-algebra backend. Results do not depend on it.
void set_threads(std::size_t n);

/// Parses FED_THREADS. Unset gives nullopt; anything but a positive integer
/// raises ConfigError.
std::optional<std::size_t> threads_from_env();

}  // namespace fed
