// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace acceptance {

struct Verdict {
  bool pass = false;
  std::string detail;
};

// Lives in its own translation unit, built against the double-precision core.
Verdict gradient_suite();

}  // namespace acceptance
