#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace hpgas {

using unit_t = std::int32_t;  // absolute unit id, dense in [0, world_size)
using node_t = std::int32_t;

// Locality is defined by the launch parameter units_per_node, not by host
// detection: node_of(u) = u / units_per_node.
node_t node_of(unit_t unit, int units_per_node);

// Units of one team that share a node and hence can map common shared-memory
// segments. Members ascend by absolute id.
struct locality_group {
  node_t node = -1;
  std::vector<unit_t> members;
};

// Groups a member list by node id, ordered by lowest absolute id.
// Deterministic: every caller computes the identical partition.
std::vector<locality_group> locality_split(std::span<const unit_t> members, int units_per_node);

// Immutable ordered set of units. index() is the teamlist slot, which is also
// the slot of the team's window registry; slots are never reused in a run.
class team {
public:
  team() = default;

  static team make(int index, std::vector<unit_t> members, int units_per_node);

  bool valid() const { return index_ >= 0; }
  int index() const { return index_; }
  int size() const { return static_cast<int>(members_.size()); }
  int units_per_node() const { return upn_; }
  const std::vector<unit_t>& members() const { return members_; }

  unit_t abs_unit(int rel) const;   // relative -> absolute
  int rel_unit(unit_t abs) const;   // absolute -> relative; throws not_a_member
  bool contains(unit_t abs) const { return rel_of_.count(abs) != 0; }

  const std::vector<locality_group>& groups() const { return groups_; }
  const locality_group& group_of(unit_t abs) const;

private:
  int index_ = -1;
  int upn_ = 0;
  std::vector<unit_t> members_;
  std::unordered_map<unit_t, int> rel_of_;
  std::vector<locality_group> groups_;
};

}  // namespace hpgas
