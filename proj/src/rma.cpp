#include "hpgas/rma.hpp"

#include <atomic>
#include <cstring>

#include "hpgas/error.hpp"
#include "hpgas/runtime.hpp"
#include "hpgas/util.hpp"

namespace hpgas {

namespace {

struct counter_cells {
  std::atomic<std::uint64_t> local_puts{0}, remote_puts{0};
  std::atomic<std::uint64_t> local_gets{0}, remote_gets{0};
  std::atomic<std::uint64_t> local_atomics{0}, remote_atomics{0};
  std::atomic<std::uint64_t> local_put_bytes{0}, remote_put_bytes{0};
  std::atomic<std::uint64_t> local_get_bytes{0}, remote_get_bytes{0};
};
counter_cells g_counters;

void throw_for(wire::status st, const global_ptr& g) {
  switch (st) {
    case wire::status::ok:
      return;
    case wire::status::err_range:
      throw_error(errc::range_error, "remote range check failed for segid " +
                                         std::to_string(g.segid));
    case wire::status::err_segid:
      throw_error(errc::unknown_segid,
                  "target rejected segid " + std::to_string(g.segid));
  }
}

bool take_local_path(const global_ptr& g, path_hint hint) {
  if (hint == path_hint::force_remote) return false;
  return same_node(runtime::instance().my_unit(), g.unit);
}

void check_range(memory_manager& mm, const global_ptr& g, std::size_t nbytes) {
  std::uint64_t size = mm.region_size(g);  // throws unknown_segid
  if (g.offset > size || nbytes > size - g.offset)
    throw_error(errc::range_error, "transfer of " + std::to_string(nbytes) + " B at offset " +
                                       std::to_string(g.offset) + " exceeds region of " +
                                       std::to_string(size) + " B");
}

wire::reply remote_op(wire::opcode op, const global_ptr& g, std::span<const std::byte> payload,
                      std::uint64_t nbytes) {
  runtime& rt = runtime::instance();
  memory_manager::remote_coords rc = rt.memory().remote_target(g);
  wire::request_header h;
  h.op = op;
  h.segid = g.segid;
  h.target_rel_unit = static_cast<std::uint32_t>(rc.rel_unit);
  h.target_disp = rc.target_disp;
  h.nbytes = nbytes;
  h.tag = rt.net().next_tag();
  wire::reply r = rt.net().roundtrip(g.unit, h, payload);
  throw_for(r.hdr.st, g);
  return r;
}

}  // namespace

void put_blocking(global_ptr dst, const void* src, std::size_t nbytes, path_hint hint) {
  runtime& rt = runtime::instance();
  check_range(rt.memory(), dst, nbytes);
  if (nbytes == 0) return;
  if (take_local_path(dst, hint)) {
    std::byte* addr = rt.memory().local_address(dst);
    HPGAS_CHECK(addr != nullptr);
    std::memcpy(addr, src, nbytes);
    std::atomic_thread_fence(std::memory_order_release);
    g_counters.local_puts.fetch_add(1, std::memory_order_relaxed);
    g_counters.local_put_bytes.fetch_add(nbytes, std::memory_order_relaxed);
    return;
  }
  remote_op(wire::opcode::put, dst,
            std::span<const std::byte>(static_cast<const std::byte*>(src), nbytes), nbytes);
  g_counters.remote_puts.fetch_add(1, std::memory_order_relaxed);
  g_counters.remote_put_bytes.fetch_add(nbytes, std::memory_order_relaxed);
}

void get_blocking(global_ptr src, void* dst, std::size_t nbytes, path_hint hint) {
  runtime& rt = runtime::instance();
  check_range(rt.memory(), src, nbytes);
  if (nbytes == 0) return;
  if (take_local_path(src, hint)) {
    std::byte* addr = rt.memory().local_address(src);
    HPGAS_CHECK(addr != nullptr);
    std::atomic_thread_fence(std::memory_order_acquire);
    std::memcpy(dst, addr, nbytes);
    g_counters.local_gets.fetch_add(1, std::memory_order_relaxed);
    g_counters.local_get_bytes.fetch_add(nbytes, std::memory_order_relaxed);
    return;
  }
  wire::reply r = remote_op(wire::opcode::get, src, {}, nbytes);
  HPGAS_CHECK(r.payload.size() == nbytes);
  std::memcpy(dst, r.payload.data(), nbytes);
  g_counters.remote_gets.fetch_add(1, std::memory_order_relaxed);
  g_counters.remote_get_bytes.fetch_add(nbytes, std::memory_order_relaxed);
}

namespace {

std::uint64_t atomic_op(wire::opcode op, global_ptr target, std::uint64_t operand,
                        path_hint hint) {
  runtime& rt = runtime::instance();
  if (target.offset % 8 != 0)
    throw_error(errc::misaligned, "atomic target offset " + std::to_string(target.offset));
  check_range(rt.memory(), target, 8);
  if (take_local_path(target, hint)) {
    std::byte* addr = rt.memory().local_address(target);
    HPGAS_CHECK(addr != nullptr);
    auto* word = reinterpret_cast<std::uint64_t*>(addr);
    std::atomic_ref<std::uint64_t> cell(*word);
    std::uint64_t old =
        op == wire::opcode::atomic_add ? cell.fetch_add(operand) : cell.fetch_xor(operand);
    g_counters.local_atomics.fetch_add(1, std::memory_order_relaxed);
    return old;
  }
  std::byte payload[8];
  store_le64(payload, operand);
  wire::reply r = remote_op(op, target, payload, 8);
  HPGAS_CHECK(r.payload.size() == 8);
  g_counters.remote_atomics.fetch_add(1, std::memory_order_relaxed);
  return load_le64(r.payload.data());
}

}  // namespace

std::uint64_t atomic_add64(global_ptr target, std::uint64_t operand, path_hint hint) {
  return atomic_op(wire::opcode::atomic_add, target, operand, hint);
}

std::uint64_t atomic_xor64(global_ptr target, std::uint64_t operand, path_hint hint) {
  return atomic_op(wire::opcode::atomic_xor, target, operand, hint);
}

rma_counters counters_snapshot() {
  rma_counters c;
  c.local_puts = g_counters.local_puts.load();
  c.remote_puts = g_counters.remote_puts.load();
  c.local_gets = g_counters.local_gets.load();
  c.remote_gets = g_counters.remote_gets.load();
  c.local_atomics = g_counters.local_atomics.load();
  c.remote_atomics = g_counters.remote_atomics.load();
  c.local_put_bytes = g_counters.local_put_bytes.load();
  c.remote_put_bytes = g_counters.remote_put_bytes.load();
  c.local_get_bytes = g_counters.local_get_bytes.load();
  c.remote_get_bytes = g_counters.remote_get_bytes.load();
  return c;
}

void counters_reset() {
  g_counters.local_puts = 0;
  g_counters.remote_puts = 0;
  g_counters.local_gets = 0;
  g_counters.remote_gets = 0;
  g_counters.local_atomics = 0;
  g_counters.remote_atomics = 0;
  g_counters.local_put_bytes = 0;
  g_counters.remote_put_bytes = 0;
  g_counters.local_get_bytes = 0;
  g_counters.remote_get_bytes = 0;
}

}  // namespace hpgas
