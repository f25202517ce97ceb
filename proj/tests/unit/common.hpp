#pragma once

#include "energs/validate.hpp"

namespace energs::test {

/// Canonical scene field, built once per test binary.
inline const FieldBundle& canonical() {
  static const FieldBundle bundle = canonical_bundle(0, 0.25);
  return bundle;
}

/// Index3 of a linear grid index.
inline Index3 unravel(const Dims& d, std::size_t n) {
  return {static_cast<int>(n % d.x), static_cast<int>((n / d.x) % d.y),
          static_cast<int>(n / (static_cast<std::size_t>(d.x) * d.y))};
}

}  // namespace energs::test
