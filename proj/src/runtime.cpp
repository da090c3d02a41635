#include "hpgas/runtime.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <numeric>
#include <sstream>

#include "hpgas/error.hpp"
#include "hpgas/util.hpp"

namespace hpgas {

namespace {

std::unique_ptr<runtime> g_runtime;

const char* require_env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0')
    throw_error(errc::uninitialized, std::string("environment variable ") + name +
                                         " is not set; launch with hpgas-run");
  return v;
}

}  // namespace

runtime_config runtime_config::from_env() {
  runtime_config cfg;
  cfg.unit = std::atoi(require_env("HPGAS_UNIT"));
  cfg.world_size = std::atoi(require_env("HPGAS_WORLD_SIZE"));
  cfg.units_per_node = std::atoi(require_env("HPGAS_UNITS_PER_NODE"));
  cfg.run_id = require_env("HPGAS_RUN_ID");
  cfg.endpoint_file = require_env("HPGAS_ENDPOINT_FILE");
  if (const char* v = std::getenv("HPGAS_POOL_BYTES"); v != nullptr && *v != '\0')
    cfg.pool_bytes = std::strtoull(v, nullptr, 10);
  if (const char* v = std::getenv("HPGAS_TIMEOUT_MS"); v != nullptr && *v != '\0')
    cfg.timeout = std::chrono::milliseconds(std::atol(v));

  if (cfg.unit < 0 || cfg.world_size < 1 || cfg.unit >= cfg.world_size)
    throw_error(errc::invalid_argument, "bad HPGAS_UNIT/HPGAS_WORLD_SIZE");
  if (cfg.units_per_node < 1)
    throw_error(errc::invalid_argument, "HPGAS_UNITS_PER_NODE must be >= 1");
  if (cfg.pool_bytes < 64) throw_error(errc::invalid_argument, "pool too small");
  return cfg;
}

runtime& runtime::instance() {
  if (!g_runtime) throw_error(errc::uninitialized, "runtime not initialized");
  return *g_runtime;
}

bool runtime::initialized() { return g_runtime != nullptr; }

void runtime::init() {
  if (g_runtime) throw_error(errc::already_initialized, "init() called twice");
  runtime_config cfg = runtime_config::from_env();
  auto rt = std::unique_ptr<runtime>(new runtime());
  rt->boot(cfg);
  g_runtime = std::move(rt);
}

void runtime::finalize() {
  if (!g_runtime) throw_error(errc::uninitialized, "finalize() before init()");
  g_runtime->teardown();
  g_runtime.reset();
}

void runtime::boot(const runtime_config& cfg) {
  cfg_ = cfg;

  // listener first, so the endpoint is known before announcing it
  tp_ = std::make_unique<transport>(cfg.unit, cfg.timeout);
  mm_ = std::make_unique<memory_manager>(
      cfg.unit, cfg.units_per_node, cfg.run_id, cfg.pool_bytes,
      [this](int index) { return team_at(index); });
  tp_->set_serve([this](const wire::request_header& h, std::span<const std::byte> payload,
                        std::vector<std::byte>& out) { return mm_->serve(h, payload, out); });

  // rendezvous: announce, then wait for the launcher's complete directory
  {
    std::ostringstream line;
    line << cfg.unit << ' ' << node_of(cfg.unit, cfg.units_per_node) << ' ' << "127.0.0.1" << ' '
         << tp_->listen_port() << '\n';
    write_file_atomic(announce_path(cfg.endpoint_file, cfg.unit), line.str());
  }
  tp_->set_directory(endpoint_directory::load(cfg.endpoint_file, cfg.world_size, cfg.timeout));

  // world team at slot 0, with its (empty) window registry
  std::vector<unit_t> all(static_cast<std::size_t>(cfg.world_size));
  std::iota(all.begin(), all.end(), 0);
  {
    std::unique_lock lk(teams_mu_);
    teams_.push_back(std::make_shared<const team>(team::make(0, std::move(all), cfg.units_per_node)));
    next_team_index_ = 1;
  }
  mm_->create_registry_slot(0);

  // the non-collective pool spans each node's units and is immediately a
  // valid target for every unit
  mm_->create_pool(world(), *tp_);
}

void runtime::teardown() {
  tp_->barrier(world());
  mm_->release_segments();
  tp_->barrier(world());
  mm_->unlink_owned_segments();
  tp_->barrier(world());
  tp_->shutdown();
  mm_.reset();
  tp_.reset();
}

const team& runtime::world() const {
  std::shared_lock lk(teams_mu_);
  HPGAS_CHECK(!teams_.empty() && teams_[0] != nullptr);
  return *teams_[0];
}

std::shared_ptr<const team> runtime::team_at(int index) const {
  std::shared_lock lk(teams_mu_);
  if (index < 0 || index >= static_cast<int>(teams_.size())) return nullptr;
  return teams_[static_cast<std::size_t>(index)];
}

const team* runtime::team_create(const team& parent, std::span<const int> relative_units) {
  if (!parent.contains(cfg_.unit))
    throw_error(errc::not_a_member, "caller is not in the parent team");
  if (relative_units.empty()) throw_error(errc::invalid_argument, "empty subset");

  std::vector<unit_t> members;
  members.reserve(relative_units.size());
  for (int rel : relative_units) members.push_back(parent.abs_unit(rel));  // validates range
  {
    std::vector<unit_t> sorted = members;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw_error(errc::invalid_argument, "duplicate units in subset");
  }

  // agree on the fresh teamlist slot and verify every caller passed the same
  // subset; the allgather doubles as the synchronizing barrier
  std::vector<std::byte> msg(8 + 8 + relative_units.size() * 4);
  store_le64(msg.data(), static_cast<std::uint64_t>(next_team_index_));
  store_le64(msg.data() + 8, relative_units.size());
  for (std::size_t i = 0; i < relative_units.size(); ++i)
    store_le32(msg.data() + 16 + 4 * i, static_cast<std::uint32_t>(relative_units[i]));
  std::vector<std::byte> all = tp_->allgather(parent, msg);

  std::uint64_t index64 = 0;
  for (int i = 0; i < parent.size(); ++i) {
    const std::byte* p = all.data() + msg.size() * static_cast<std::size_t>(i);
    index64 = std::max(index64, load_le64(p));
    if (std::memcmp(p + 8, msg.data() + 8, msg.size() - 8) != 0)
      throw_error(errc::collective_mismatch, "team_create subsets differ across callers");
  }
  int index = static_cast<int>(index64);
  next_team_index_ = index + 1;

  if (std::find(members.begin(), members.end(), cfg_.unit) == members.end()) return nullptr;

  auto t = std::make_shared<const team>(team::make(index, std::move(members), cfg_.units_per_node));
  {
    std::unique_lock lk(teams_mu_);
    if (static_cast<int>(teams_.size()) <= index) teams_.resize(static_cast<std::size_t>(index) + 1);
    teams_[static_cast<std::size_t>(index)] = t;
  }
  mm_->create_registry_slot(index);
  return t.get();
}

// ---------------------------------------------------------------------------
// SPMD API

void init() { runtime::init(); }
void finalize() { runtime::finalize(); }
bool initialized() { return runtime::initialized(); }

unit_t my_unit() { return runtime::instance().my_unit(); }
int world_size() { return runtime::instance().config().world_size; }
const team& world() { return runtime::instance().world(); }

bool same_node(unit_t a, unit_t b) {
  int upn = runtime::instance().config().units_per_node;
  return node_of(a, upn) == node_of(b, upn);
}

const team* team_create(const team& parent, std::span<const int> relative_units) {
  return runtime::instance().team_create(parent, relative_units);
}

global_ptr team_memalloc(const team& t, std::uint64_t nbytes_per_unit) {
  runtime& rt = runtime::instance();
  return rt.memory().team_memalloc(t, rt.net(), nbytes_per_unit);
}

void team_memfree(const team& t, global_ptr g) {
  runtime& rt = runtime::instance();
  rt.memory().team_memfree(t, rt.net(), g);
}

global_ptr local_alloc(std::uint64_t nbytes) { return runtime::instance().memory().local_alloc(nbytes); }
void local_free(global_ptr g) { runtime::instance().memory().local_free(g); }

std::byte* local_address(global_ptr g) { return runtime::instance().memory().local_address(g); }

void barrier(const team& t) { runtime::instance().net().barrier(t); }

std::vector<std::byte> allgather(const team& t, std::span<const std::byte> contribution) {
  return runtime::instance().net().allgather(t, contribution);
}

}  // namespace hpgas
