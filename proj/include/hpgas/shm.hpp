#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <string>

#include "hpgas/topology.hpp"

namespace hpgas {

// RAII mapping of a named POSIX shared-memory object. One object spans all
// units of a locality group; every group member maps the whole object.
class shared_segment {
public:
  shared_segment() = default;
  shared_segment(shared_segment&& other) noexcept;
  shared_segment& operator=(shared_segment&& other) noexcept;
  shared_segment(const shared_segment&) = delete;
  shared_segment& operator=(const shared_segment&) = delete;
  ~shared_segment();

  // Creates the object (fails if it already exists) and maps it.
  static shared_segment create(const std::string& name, std::size_t bytes);

  // Opens an object someone else created, retrying until it exists with the
  // expected size or the timeout expires.
  static shared_segment open(const std::string& name, std::size_t bytes,
                             std::chrono::milliseconds timeout);

  // Removes the name from the shm namespace; mappings stay valid until unmapped.
  static void unlink(const std::string& name);

  std::byte* base() const { return base_; }
  std::size_t size() const { return size_; }
  const std::string& name() const { return name_; }
  bool mapped() const { return base_ != nullptr; }

private:
  std::string name_;
  std::byte* base_ = nullptr;
  std::size_t size_ = 0;
};

// Shared-memory object name for one allocation:
//   hpgas.<run_id>.<team_index>.<segid>.<node_id>
std::string segment_name(const std::string& run_id, int team_index, std::uint32_t segid,
                         node_t node);

}  // namespace hpgas
