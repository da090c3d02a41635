#include "hpgas/error.hpp"

namespace hpgas {

const char* errc_name(errc c) {
  switch (c) {
    case errc::uninitialized: return "uninitialized";
    case errc::already_initialized: return "already_initialized";
    case errc::invalid_argument: return "invalid_argument";
    case errc::not_a_member: return "not_a_member";
    case errc::collective_mismatch: return "collective_mismatch";
    case errc::unknown_segid: return "unknown_segid";
    case errc::range_error: return "range_error";
    case errc::misaligned: return "misaligned";
    case errc::pool_exhausted: return "pool_exhausted";
    case errc::double_free: return "double_free";
    case errc::foreign_pointer: return "foreign_pointer";
    case errc::allocation_failure: return "allocation_failure";
    case errc::transport_error: return "transport_error";
    case errc::timeout: return "timeout";
  }
  return "unknown";
}

}  // namespace hpgas
