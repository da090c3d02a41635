#pragma once

#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace hpgas {

enum class errc {
  uninitialized,
  already_initialized,
  invalid_argument,
  not_a_member,
  collective_mismatch,
  unknown_segid,
  range_error,
  misaligned,
  pool_exhausted,
  double_free,
  foreign_pointer,
  allocation_failure,
  transport_error,
  timeout,
};

const char* errc_name(errc c);

class error : public std::runtime_error {
public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void throw_error(errc code, const std::string& what) {
  throw error(code, what);
}

namespace detail {

[[noreturn]] inline void check_fail(const char* expr, const char* file, int line) {
  std::fprintf(stderr, "hpgas: internal check failed: %s (%s:%d)\n", expr, file, line);
  std::abort();
}

}  // namespace detail

}  // namespace hpgas

// Internal invariant check, always on. API misuse throws hpgas::error instead.
#define HPGAS_CHECK(expr)                                        \
  do {                                                           \
    if (!(expr)) {                                               \
      ::hpgas::detail::check_fail(#expr, __FILE__, __LINE__);    \
    }                                                            \
  } while (0)
