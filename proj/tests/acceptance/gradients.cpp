// SPDX-License-Identifier: Apache-2.0
#include <cstdio>

#include "criteria.hpp"
#include "gradient_cases.hpp"

namespace acceptance {

Verdict gradient_suite() {
  Verdict v{true, {}};
  std::size_t checked = 0, runs = 0;
  for (const auto& c : fed::test::gradient_cases()) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto r = c.run(seed);
      checked += r.checked;
      ++runs;
      if (!r.ok || r.checked == 0) {
        if (v.pass) v.detail = c.name + " seed " + std::to_string(seed) + ": " + r.worst;
        v.pass = false;
      }
    }
  }
  if (v.pass) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%zu case-seed runs, %zu derivatives checked", runs, checked);
    v.detail = buf;
  }
  return v;
}

}  // namespace acceptance
