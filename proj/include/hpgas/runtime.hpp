#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "hpgas/global_memory.hpp"
#include "hpgas/topology.hpp"
#include "hpgas/transport.hpp"

namespace hpgas {

// Launch parameters, provided as environment variables by hpgas-run.
struct runtime_config {
  unit_t unit = -1;
  int world_size = 0;
  int units_per_node = 1;
  std::string run_id;
  std::string endpoint_file;
  std::uint64_t pool_bytes = 4 << 20;
  std::chrono::milliseconds timeout{30000};

  static runtime_config from_env();  // throws uninitialized on missing variables
};

// Per-process runtime: topology, transport, global memory. One instance,
// created by init() after the launcher handshake.
class runtime {
public:
  static runtime& instance();  // throws uninitialized before init()
  static bool initialized();
  static void init();
  static void finalize();

  const runtime_config& config() const { return cfg_; }
  unit_t my_unit() const { return cfg_.unit; }

  const team& world() const;
  std::shared_ptr<const team> team_at(int index) const;  // null for foreign slots

  // Collective over the parent; returns the new team for members of the
  // subset and nullptr for other participants.
  const team* team_create(const team& parent, std::span<const int> relative_units);

  memory_manager& memory() { return *mm_; }
  transport& net() { return *tp_; }

private:
  runtime() = default;
  void boot(const runtime_config& cfg);
  void teardown();

  runtime_config cfg_;
  std::unique_ptr<transport> tp_;
  std::unique_ptr<memory_manager> mm_;

  mutable std::shared_mutex teams_mu_;
  std::vector<std::shared_ptr<const team>> teams_;
  int next_team_index_ = 0;
};

// SPMD API surface.
void init();
void finalize();
bool initialized();

unit_t my_unit();
int world_size();
const team& world();
bool same_node(unit_t a, unit_t b);
const team* team_create(const team& parent, std::span<const int> relative_units);

global_ptr team_memalloc(const team& t, std::uint64_t nbytes_per_unit);
void team_memfree(const team& t, global_ptr g);
global_ptr local_alloc(std::uint64_t nbytes);
void local_free(global_ptr g);

// Local-path dereference: nullptr when the target is not on the caller's node.
std::byte* local_address(global_ptr g);

void barrier(const team& t);
std::vector<std::byte> allgather(const team& t, std::span<const std::byte> contribution);

}  // namespace hpgas
