#include "hpgas/topology.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "hpgas/error.hpp"

namespace hpgas {

node_t node_of(unit_t unit, int units_per_node) {
  HPGAS_CHECK(unit >= 0 && units_per_node >= 1);
  return unit / units_per_node;
}

std::vector<locality_group> locality_split(std::span<const unit_t> members, int units_per_node) {
  std::map<node_t, std::vector<unit_t>> by_node;  // node ids ascend with lowest abs id
  for (unit_t u : members) by_node[node_of(u, units_per_node)].push_back(u);
  std::vector<locality_group> groups;
  groups.reserve(by_node.size());
  for (auto& [node, units] : by_node) {
    std::sort(units.begin(), units.end());
    groups.push_back(locality_group{node, std::move(units)});
  }
  return groups;
}

team team::make(int index, std::vector<unit_t> members, int units_per_node) {
  if (index < 0) throw_error(errc::invalid_argument, "negative team index");
  if (members.empty()) throw_error(errc::invalid_argument, "empty team");
  if (units_per_node < 1) throw_error(errc::invalid_argument, "units_per_node must be >= 1");

  team t;
  t.index_ = index;
  t.upn_ = units_per_node;
  t.members_ = std::move(members);
  for (int rel = 0; rel < static_cast<int>(t.members_.size()); ++rel) {
    unit_t u = t.members_[rel];
    if (u < 0) throw_error(errc::invalid_argument, "negative unit id");
    if (!t.rel_of_.emplace(u, rel).second)
      throw_error(errc::invalid_argument, "duplicate unit " + std::to_string(u));
  }
  t.groups_ = locality_split(t.members_, units_per_node);
  return t;
}

unit_t team::abs_unit(int rel) const {
  if (rel < 0 || rel >= size())
    throw_error(errc::invalid_argument, "relative unit " + std::to_string(rel) + " out of range");
  return members_[rel];
}

int team::rel_unit(unit_t abs) const {
  auto it = rel_of_.find(abs);
  if (it == rel_of_.end())
    throw_error(errc::not_a_member,
                "unit " + std::to_string(abs) + " not in team " + std::to_string(index_));
  return it->second;
}

const locality_group& team::group_of(unit_t abs) const {
  node_t node = node_of(abs, upn_);
  for (const auto& g : groups_) {
    if (g.node == node && std::binary_search(g.members.begin(), g.members.end(), abs)) return g;
  }
  throw_error(errc::not_a_member,
              "unit " + std::to_string(abs) + " not in team " + std::to_string(index_));
}

}  // namespace hpgas
