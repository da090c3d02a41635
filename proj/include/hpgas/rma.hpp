#pragma once

#include <cstdint>

#include "hpgas/global_ptr.hpp"

namespace hpgas {

// Locality dispatch override. Benchmarks force the transport path to compare
// it against memory sharing between units of one node.
enum class path_hint {
  automatic,     // local path iff the target shares the caller's node
  force_remote,  // always go through the wire
};

// Origin-side path instrumentation, per process.
struct rma_counters {
  std::uint64_t local_puts = 0;
  std::uint64_t remote_puts = 0;
  std::uint64_t local_gets = 0;
  std::uint64_t remote_gets = 0;
  std::uint64_t local_atomics = 0;
  std::uint64_t remote_atomics = 0;
  std::uint64_t local_put_bytes = 0;
  std::uint64_t remote_put_bytes = 0;
  std::uint64_t local_get_bytes = 0;
  std::uint64_t remote_get_bytes = 0;

  std::uint64_t put_bytes() const { return local_put_bytes + remote_put_bytes; }
};

// Blocking one-sided operations. On return from put_blocking the data is
// visible at the target (remote completion); on return from get_blocking the
// destination buffer holds the target bytes.
void put_blocking(global_ptr dst, const void* src, std::size_t nbytes,
                  path_hint hint = path_hint::automatic);
void get_blocking(global_ptr src, void* dst, std::size_t nbytes,
                  path_hint hint = path_hint::automatic);

// 64-bit read-modify-write, atomic across both paths; returns the old value.
// The target word must be 8-byte aligned.
std::uint64_t atomic_add64(global_ptr target, std::uint64_t operand,
                           path_hint hint = path_hint::automatic);
std::uint64_t atomic_xor64(global_ptr target, std::uint64_t operand,
                           path_hint hint = path_hint::automatic);

rma_counters counters_snapshot();
void counters_reset();

}  // namespace hpgas
