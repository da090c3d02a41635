#pragma once

#include <cstdint>

#include "hpgas/topology.hpp"

namespace hpgas {

// Names a byte location in the global address space. segid 0 is the
// pre-created non-collective pool; collective allocations carry segid >= 1.
struct global_ptr {
  unit_t unit = -1;
  std::uint32_t segid = 0;
  std::uint64_t offset = 0;

  global_ptr at(std::uint64_t delta) const { return {unit, segid, offset + delta}; }

  friend bool operator==(const global_ptr&, const global_ptr&) = default;
};

}  // namespace hpgas
