#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <vector>

#include "hpgas/global_ptr.hpp"
#include "hpgas/shm.hpp"
#include "hpgas/topology.hpp"
#include "hpgas/wire.hpp"

namespace hpgas {

class transport;

// One node-scoped shared allocation: the mapped object plus the per-unit
// partition table. Partition starts are 8-byte aligned.
struct segment_partition {
  unit_t unit = -1;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;  // usable bytes (the requested per-unit size)
};

struct segment_block {
  shared_segment seg;
  std::vector<segment_partition> parts;  // ascending by unit

  const segment_partition* find(unit_t u) const {
    for (const auto& p : parts)
      if (p.unit == u) return &p;
    return nullptr;
  }
};

// Per-allocation record keyed by segid. disp_set[i] is the attach-time base
// displacement of relative unit i's region, gathered at allocation.
struct translation_entry {
  std::uint32_t segid = 0;
  int team_index = -1;
  std::uint64_t nbytes_per_unit = 0;
  std::vector<std::uint64_t> disp_set;
  std::shared_ptr<const segment_block> block;  // null in table-only tests

  std::uint64_t remote_disp(std::uint64_t offset, int rel) const {
    return offset + disp_set.at(static_cast<std::size_t>(rel));
  }
};

// The process-wide table of live collective allocations, strictly ascending
// by segid. Read concurrently by the transport progress agent; insert/erase
// publish whole entries under the lock.
class translation_table {
public:
  void insert(std::shared_ptr<const translation_entry> e);
  bool erase(std::uint32_t segid);
  std::shared_ptr<const translation_entry> find(std::uint32_t segid) const;
  std::vector<std::uint32_t> segids() const;  // ascending snapshot
  std::size_t size() const;

private:
  mutable std::shared_mutex mu_;
  std::map<std::uint32_t, std::shared_ptr<const translation_entry>> entries_;
};

// Attached-region bookkeeping for one team slot: (relative unit, segid) ->
// (base displacement, length). Regions of one unit never overlap in its
// displacement space.
class window_registry {
public:
  struct region {
    std::uint64_t disp = 0;
    std::uint64_t length = 0;
  };

  explicit window_registry(int index) : index_(index) {}

  int index() const { return index_; }
  void attach(int rel_unit, std::uint32_t segid, region r);  // throws on overlap
  void detach(int rel_unit, std::uint32_t segid);
  std::optional<region> find(int rel_unit, std::uint32_t segid) const;

private:
  int index_;
  mutable std::shared_mutex mu_;
  std::map<std::pair<int, std::uint32_t>, region> attached_;
};

// Bump allocator over the non-collective pool partition of one unit.
// Freed regions are retired, never reused.
class pool_allocator {
public:
  pool_allocator() = default;
  explicit pool_allocator(std::uint64_t capacity) : capacity_(capacity) {}

  std::uint64_t allocate(std::uint64_t nbytes);  // returns 8-aligned offset
  void free(std::uint64_t offset);
  std::uint64_t used() const { return cursor_; }
  std::uint64_t capacity() const { return capacity_; }

private:
  std::uint64_t capacity_ = 0;
  std::uint64_t cursor_ = 0;
  std::map<std::uint64_t, std::uint64_t> live_;   // offset -> length
  std::map<std::uint64_t, std::uint64_t> freed_;  // retired regions
};

// Ties the table, registries, segments and the pool together. Allocation and
// free are collective (app thread); dereference and serve run concurrently.
class memory_manager {
public:
  using team_lookup_fn = std::function<std::shared_ptr<const team>(int)>;

  memory_manager(unit_t me, int units_per_node, std::string run_id, std::uint64_t pool_bytes,
                 team_lookup_fn teams);

  // init/teardown (called by the runtime around the world barrier points)
  void create_pool(const team& world, transport& tp);
  void release_segments();           // unmap everything (after final barrier)
  void unlink_owned_segments();      // creator-side name removal

  void create_registry_slot(int team_index);

  global_ptr team_memalloc(const team& t, transport& tp, std::uint64_t nbytes_per_unit);
  void team_memfree(const team& t, transport& tp, global_ptr g);

  global_ptr local_alloc(std::uint64_t nbytes);
  void local_free(global_ptr g);

  // Local-path dereference: a mapped address when the target unit shares the
  // caller's node, nullptr otherwise.
  std::byte* local_address(global_ptr g) const;

  // Origin-side translation for the transport path.
  struct remote_coords {
    int team_index = -1;
    int rel_unit = -1;
    std::uint64_t target_disp = 0;
  };
  remote_coords remote_target(global_ptr g) const;

  // Per-unit size of the region g points into (range checks at the origin).
  std::uint64_t region_size(global_ptr g) const;

  // Target-side execution of PUT/GET/ATOMIC against the registry + segments.
  wire::status serve(const wire::request_header& h, std::span<const std::byte> payload,
                     std::vector<std::byte>& out);

  translation_table& table() { return table_; }
  const translation_table& table() const { return table_; }
  std::uint64_t pool_bytes() const { return pool_bytes_; }

private:
  struct resolved {
    std::shared_ptr<const segment_block> block;
    std::uint64_t per_unit = 0;
    int team_index = -1;
  };
  resolved resolve(std::uint32_t segid) const;  // throws unknown_segid
  window_registry& registry(int index) const;

  unit_t me_;
  int units_per_node_;
  std::string run_id_;
  std::uint64_t pool_bytes_;
  team_lookup_fn teams_;

  translation_table table_;
  mutable std::shared_mutex reg_mu_;
  std::vector<std::unique_ptr<window_registry>> registries_;

  std::shared_ptr<const segment_block> pool_block_;
  std::vector<std::uint64_t> pool_disp_set_;  // by world rank
  pool_allocator pool_;
  std::uint32_t next_segid_ = 1;
  std::uint64_t attach_cursor_ = 0;  // my displacement-space bump pointer

  std::mutex owned_mu_;
  std::vector<std::string> owned_names_;  // segments this unit created
};

// The dereference rule for the transport path: offset + disp_set[i].
inline std::uint64_t remote_target_disp(std::uint64_t offset,
                                        std::span<const std::uint64_t> disp_set, int rel) {
  return offset + disp_set[static_cast<std::size_t>(rel)];
}

}  // namespace hpgas
