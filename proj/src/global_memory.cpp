#include "hpgas/global_memory.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>

#include "hpgas/error.hpp"
#include "hpgas/transport.hpp"
#include "hpgas/util.hpp"

namespace hpgas {

// ---------------------------------------------------------------------------
// translation table

void translation_table::insert(std::shared_ptr<const translation_entry> e) {
  HPGAS_CHECK(e != nullptr);
  std::unique_lock lk(mu_);
  auto [it, inserted] = entries_.emplace(e->segid, std::move(e));
  HPGAS_CHECK(inserted);  // segids are agreed collectively and never reused
}

bool translation_table::erase(std::uint32_t segid) {
  std::unique_lock lk(mu_);
  return entries_.erase(segid) != 0;
}

std::shared_ptr<const translation_entry> translation_table::find(std::uint32_t segid) const {
  std::shared_lock lk(mu_);
  auto it = entries_.find(segid);
  return it == entries_.end() ? nullptr : it->second;
}

std::vector<std::uint32_t> translation_table::segids() const {
  std::shared_lock lk(mu_);
  std::vector<std::uint32_t> ids;
  ids.reserve(entries_.size());
  for (const auto& [segid, e] : entries_) ids.push_back(segid);  // map order: ascending
  return ids;
}

std::size_t translation_table::size() const {
  std::shared_lock lk(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// window registry

void window_registry::attach(int rel_unit, std::uint32_t segid, region r) {
  std::unique_lock lk(mu_);
  for (const auto& [key, existing] : attached_) {
    if (key.first != rel_unit) continue;
    bool disjoint = r.disp + r.length <= existing.disp || existing.disp + existing.length <= r.disp;
    if (!disjoint)
      throw_error(errc::invalid_argument,
                  "overlapping attach for relative unit " + std::to_string(rel_unit));
  }
  auto [it, inserted] = attached_.emplace(std::pair{rel_unit, segid}, r);
  if (!inserted) throw_error(errc::invalid_argument, "segid already attached");
}

void window_registry::detach(int rel_unit, std::uint32_t segid) {
  std::unique_lock lk(mu_);
  attached_.erase({rel_unit, segid});
}

std::optional<window_registry::region> window_registry::find(int rel_unit,
                                                             std::uint32_t segid) const {
  std::shared_lock lk(mu_);
  auto it = attached_.find({rel_unit, segid});
  if (it == attached_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// pool allocator

std::uint64_t pool_allocator::allocate(std::uint64_t nbytes) {
  if (nbytes == 0) throw_error(errc::invalid_argument, "zero-byte allocation");
  if (nbytes > capacity_ || cursor_ > capacity_ - nbytes)
    throw_error(errc::pool_exhausted, "pool of " + std::to_string(capacity_) +
                                          " B cannot fit " + std::to_string(nbytes) + " B");
  std::uint64_t offset = cursor_;
  cursor_ = align8(cursor_ + nbytes);
  if (cursor_ > capacity_) cursor_ = capacity_;
  live_.emplace(offset, nbytes);
  return offset;
}

void pool_allocator::free(std::uint64_t offset) {
  auto it = live_.find(offset);
  if (it == live_.end()) {
    if (freed_.count(offset))
      throw_error(errc::double_free, "pool offset " + std::to_string(offset) + " already freed");
    throw_error(errc::invalid_argument,
                "pool offset " + std::to_string(offset) + " was never allocated");
  }
  freed_.insert(*it);
  live_.erase(it);
}

// ---------------------------------------------------------------------------
// memory manager

namespace {

struct alloc_msg {
  std::uint64_t nbytes = 0;
  std::uint64_t next_segid = 0;
  std::uint64_t disp = 0;
};
constexpr std::size_t alloc_msg_size = 24;

void encode_alloc_msg(const alloc_msg& m, std::byte* out) {
  store_le64(out + 0, m.nbytes);
  store_le64(out + 8, m.next_segid);
  store_le64(out + 16, m.disp);
}

alloc_msg decode_alloc_msg(const std::byte* in) {
  return {load_le64(in + 0), load_le64(in + 8), load_le64(in + 16)};
}

std::shared_ptr<const segment_block> make_block(const std::string& name,
                                                const locality_group& group,
                                                std::uint64_t nbytes_per_unit, bool creator,
                                                std::chrono::milliseconds timeout,
                                                transport& tp, const team& t) {
  std::uint64_t aligned = align8(nbytes_per_unit);
  std::size_t total = aligned * group.members.size();
  auto block = std::make_shared<segment_block>();
  if (creator) {
    block->seg = shared_segment::create(name, total);
    tp.barrier(t);
  } else {
    tp.barrier(t);
    block->seg = shared_segment::open(name, total, timeout);
  }
  std::uint64_t off = 0;
  for (unit_t u : group.members) {
    block->parts.push_back({u, off, nbytes_per_unit});
    off += aligned;
  }
  return block;
}

}  // namespace

memory_manager::memory_manager(unit_t me, int units_per_node, std::string run_id,
                               std::uint64_t pool_bytes, team_lookup_fn teams)
    : me_(me),
      units_per_node_(units_per_node),
      run_id_(std::move(run_id)),
      pool_bytes_(align8(pool_bytes)),
      teams_(std::move(teams)) {}

void memory_manager::create_registry_slot(int team_index) {
  std::unique_lock lk(reg_mu_);
  if (static_cast<int>(registries_.size()) <= team_index)
    registries_.resize(static_cast<std::size_t>(team_index) + 1);
  HPGAS_CHECK(registries_[static_cast<std::size_t>(team_index)] == nullptr);
  registries_[static_cast<std::size_t>(team_index)] = std::make_unique<window_registry>(team_index);
}

window_registry& memory_manager::registry(int index) const {
  std::shared_lock lk(reg_mu_);
  HPGAS_CHECK(index >= 0 && index < static_cast<int>(registries_.size()));
  HPGAS_CHECK(registries_[static_cast<std::size_t>(index)] != nullptr);
  return *registries_[static_cast<std::size_t>(index)];
}

void memory_manager::create_pool(const team& world, transport& tp) {
  HPGAS_CHECK(pool_block_ == nullptr);
  const locality_group& group = world.group_of(me_);
  bool creator = group.members.front() == me_;
  std::string name = segment_name(run_id_, world.index(), 0, group.node);
  if (creator) {
    std::lock_guard lk(owned_mu_);
    owned_names_.push_back(name);
  }
  pool_block_ = make_block(name, group, pool_bytes_, creator,
                           std::chrono::milliseconds(30000), tp, world);

  // gather every unit's pool base displacement (all zero by construction,
  // since the pool is the first region each unit attaches)
  std::byte mine[8];
  store_le64(mine, attach_cursor_);
  std::vector<std::byte> all = tp.allgather(world, mine);
  pool_disp_set_.resize(static_cast<std::size_t>(world.size()));
  for (int i = 0; i < world.size(); ++i)
    pool_disp_set_[static_cast<std::size_t>(i)] = load_le64(all.data() + 8 * i);

  window_registry& reg = registry(world.index());
  for (int rel = 0; rel < world.size(); ++rel)
    reg.attach(rel, 0, {pool_disp_set_[static_cast<std::size_t>(rel)], pool_bytes_});
  attach_cursor_ += align8(pool_bytes_);
  pool_ = pool_allocator(pool_bytes_);
  tp.barrier(world);
}

void memory_manager::release_segments() {
  // entries and the pool drop their mappings once the last in-flight serve
  // releases its reference
  for (std::uint32_t segid : table_.segids()) table_.erase(segid);
  pool_block_.reset();
}

void memory_manager::unlink_owned_segments() {
  std::lock_guard lk(owned_mu_);
  for (const auto& name : owned_names_) shared_segment::unlink(name);
  owned_names_.clear();
}

global_ptr memory_manager::team_memalloc(const team& t, transport& tp,
                                         std::uint64_t nbytes_per_unit) {
  if (nbytes_per_unit == 0) throw_error(errc::invalid_argument, "zero-byte allocation");
  int me_rel = t.rel_unit(me_);  // throws not_a_member

  alloc_msg mine{nbytes_per_unit, next_segid_, attach_cursor_};
  std::byte buf[alloc_msg_size];
  encode_alloc_msg(mine, buf);
  std::vector<std::byte> all = tp.allgather(t, buf);

  std::vector<std::uint64_t> disp_set(static_cast<std::size_t>(t.size()));
  std::uint64_t segid64 = 0;
  for (int i = 0; i < t.size(); ++i) {
    alloc_msg m = decode_alloc_msg(all.data() + alloc_msg_size * static_cast<std::size_t>(i));
    if (m.nbytes != nbytes_per_unit)
      throw_error(errc::collective_mismatch,
                  "team_memalloc size disagreement: " + std::to_string(m.nbytes) + " vs " +
                      std::to_string(nbytes_per_unit));
    segid64 = std::max(segid64, m.next_segid);
    disp_set[static_cast<std::size_t>(i)] = m.disp;
  }
  auto segid = static_cast<std::uint32_t>(segid64);
  next_segid_ = segid + 1;

  const locality_group& group = t.group_of(me_);
  bool creator = group.members.front() == me_;
  std::string name = segment_name(run_id_, t.index(), segid, group.node);
  if (creator) {
    std::lock_guard lk(owned_mu_);
    owned_names_.push_back(name);
  }
  auto entry = std::make_shared<translation_entry>();
  entry->segid = segid;
  entry->team_index = t.index();
  entry->nbytes_per_unit = nbytes_per_unit;
  entry->disp_set = disp_set;
  entry->block =
      make_block(name, group, nbytes_per_unit, creator, std::chrono::milliseconds(30000), tp, t);

  window_registry& reg = registry(t.index());
  for (int rel = 0; rel < t.size(); ++rel)
    reg.attach(rel, segid, {disp_set[static_cast<std::size_t>(rel)], nbytes_per_unit});
  attach_cursor_ += align8(nbytes_per_unit);
  table_.insert(entry);

  tp.barrier(t);  // every agent can now resolve the segid
  (void)me_rel;
  return {t.members().front(), segid, 0};
}

void memory_manager::team_memfree(const team& t, transport& tp, global_ptr g) {
  if (g.segid == 0) throw_error(errc::invalid_argument, "the non-collective pool is not freeable");
  int me_rel = t.rel_unit(me_);
  (void)me_rel;
  auto entry = table_.find(g.segid);
  if (!entry)
    throw_error(errc::unknown_segid, "segid " + std::to_string(g.segid) + " is not allocated");
  if (entry->team_index != t.index())
    throw_error(errc::invalid_argument,
                "segid " + std::to_string(g.segid) + " belongs to team " +
                    std::to_string(entry->team_index) + ", not " + std::to_string(t.index()));

  tp.barrier(t);  // quiesce: callers must have completed their transfers
  table_.erase(g.segid);
  window_registry& reg = registry(t.index());
  for (int rel = 0; rel < t.size(); ++rel) reg.detach(rel, g.segid);
  std::string name = entry->block->seg.name();
  entry.reset();

  tp.barrier(t);  // all units detached; the name can go
  const locality_group& group = t.group_of(me_);
  if (group.members.front() == me_) {
    shared_segment::unlink(name);
    std::lock_guard lk(owned_mu_);
    std::erase(owned_names_, name);
  }
}

global_ptr memory_manager::local_alloc(std::uint64_t nbytes) {
  std::uint64_t offset = pool_.allocate(nbytes);
  return {me_, 0, offset};
}

void memory_manager::local_free(global_ptr g) {
  if (g.segid != 0)
    throw_error(errc::invalid_argument, "local_free expects a pool pointer (segid 0)");
  if (g.unit != me_)
    throw_error(errc::foreign_pointer,
                "pointer belongs to unit " + std::to_string(g.unit));
  pool_.free(g.offset);
}

memory_manager::resolved memory_manager::resolve(std::uint32_t segid) const {
  if (segid == 0) {
    HPGAS_CHECK(pool_block_ != nullptr);
    return {pool_block_, pool_bytes_, 0};
  }
  auto entry = table_.find(segid);
  if (!entry) throw_error(errc::unknown_segid, "segid " + std::to_string(segid));
  return {entry->block, entry->nbytes_per_unit, entry->team_index};
}

std::uint64_t memory_manager::region_size(global_ptr g) const { return resolve(g.segid).per_unit; }

std::byte* memory_manager::local_address(global_ptr g) const {
  resolved r = resolve(g.segid);
  if (node_of(g.unit, units_per_node_) != node_of(me_, units_per_node_)) return nullptr;
  const segment_partition* part = r.block->find(g.unit);
  if (part == nullptr)
    throw_error(errc::not_a_member,
                "unit " + std::to_string(g.unit) + " has no region in segid " +
                    std::to_string(g.segid));
  if (g.offset >= r.per_unit)
    throw_error(errc::range_error, "offset " + std::to_string(g.offset) + " outside region of " +
                                       std::to_string(r.per_unit) + " B");
  return r.block->seg.base() + part->offset + g.offset;
}

memory_manager::remote_coords memory_manager::remote_target(global_ptr g) const {
  if (g.segid == 0) {
    auto world = teams_(0);
    HPGAS_CHECK(world != nullptr);
    int rel = world->rel_unit(g.unit);
    return {0, rel, remote_target_disp(g.offset, pool_disp_set_, rel)};
  }
  auto entry = table_.find(g.segid);
  if (!entry) throw_error(errc::unknown_segid, "segid " + std::to_string(g.segid));
  auto t = teams_(entry->team_index);
  HPGAS_CHECK(t != nullptr);
  int rel = t->rel_unit(g.unit);  // not_a_member for pointers outside the owning team
  return {entry->team_index, rel, entry->remote_disp(g.offset, rel)};
}

wire::status memory_manager::serve(const wire::request_header& h,
                                   std::span<const std::byte> payload,
                                   std::vector<std::byte>& out) {
  resolved r;
  try {
    r = resolve(h.segid);
  } catch (const error&) {
    return wire::status::err_segid;
  }
  auto t = teams_(r.team_index);
  if (t == nullptr) return wire::status::err_segid;
  int rel = static_cast<int>(h.target_rel_unit);
  if (rel < 0 || rel >= t->size() || t->abs_unit(rel) != me_)
    return wire::status::err_segid;  // misrouted request

  auto region = registry(r.team_index).find(rel, h.segid);
  if (!region) return wire::status::err_segid;
  if (h.target_disp < region->disp || h.nbytes > region->length ||
      h.target_disp - region->disp > region->length - h.nbytes)
    return wire::status::err_range;
  std::uint64_t local_off = h.target_disp - region->disp;

  const segment_partition* part = r.block->find(me_);
  HPGAS_CHECK(part != nullptr);
  std::byte* addr = r.block->seg.base() + part->offset + local_off;

  switch (h.op) {
    case wire::opcode::put:
      std::memcpy(addr, payload.data(), payload.size());
      std::atomic_thread_fence(std::memory_order_release);
      return wire::status::ok;
    case wire::opcode::get:
      std::atomic_thread_fence(std::memory_order_acquire);
      out.assign(addr, addr + h.nbytes);
      return wire::status::ok;
    case wire::opcode::atomic_add:
    case wire::opcode::atomic_xor: {
      if (h.nbytes != 8 || local_off % 8 != 0 || payload.size() != 8) return wire::status::err_range;
      std::uint64_t operand = load_le64(payload.data());
      auto* word = reinterpret_cast<std::uint64_t*>(addr);
      std::atomic_ref<std::uint64_t> cell(*word);
      std::uint64_t old = h.op == wire::opcode::atomic_add ? cell.fetch_add(operand)
                                                           : cell.fetch_xor(operand);
      out.resize(8);
      store_le64(out.data(), old);
      return wire::status::ok;
    }
    default:
      return wire::status::err_segid;  // collective opcodes never reach here
  }
}

}  // namespace hpgas
