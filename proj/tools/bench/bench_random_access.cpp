// HPCC-style Random Access: concurrent atomic XOR updates of random words of
// a distributed table, reported in giga-updates per second. The final table
// is checked exactly against a serial replay of every unit's update stream.

#include <cstring>

#include "bench_common.hpp"
#include "hpgas/util.hpp"

namespace bench {

int run_random_access(const options& opt) {
  using namespace hpgas;
  const team& w = world();
  unit_t me = my_unit();
  int nunits = w.size();
  if ((nunits & (nunits - 1)) != 0) {
    std::fprintf(stderr, "ra: world size must be a power of two\n");
    return 2;
  }
  if (opt.table_bits < 4 || opt.table_bits > 28) {
    std::fprintf(stderr, "ra: table_bits out of range\n");
    return 2;
  }

  const std::uint64_t words_per_unit = 1ull << opt.table_bits;
  const std::uint64_t total_words = words_per_unit * static_cast<std::uint64_t>(nunits);
  const std::uint64_t index_mask = total_words - 1;
  const std::uint64_t updates_per_unit =
      opt.updates_per_unit ? opt.updates_per_unit : 4 * words_per_unit;
  const std::uint64_t total_updates = updates_per_unit * static_cast<std::uint64_t>(nunits);

  global_ptr table = team_memalloc(w, words_per_unit * 8);

  // table[i] = i, each unit filling its own slice through the shared mapping
  {
    global_ptr mine = {me, table.segid, 0};
    auto* slice = reinterpret_cast<std::uint64_t*>(local_address(mine));
    for (std::uint64_t k = 0; k < words_per_unit; ++k)
      slice[k] = static_cast<std::uint64_t>(me) * words_per_unit + k;
  }

  barrier(w);
  std::int64_t t0 = now_ns();
  {
    xorshift64s rng(stream_seed(opt.seed, me));
    for (std::uint64_t u = 0; u < updates_per_unit; ++u) {
      std::uint64_t v = rng.next();
      std::uint64_t idx = v & index_mask;
      global_ptr g = {static_cast<unit_t>(idx >> opt.table_bits), table.segid,
                      (idx & (words_per_unit - 1)) * 8};
      atomic_xor64(g, v);
    }
  }
  barrier(w);
  double seconds = static_cast<double>(now_ns() - t0) / 1e9;
  double gups = static_cast<double>(total_updates) / seconds / 1e9;

  // serial replay oracle (XOR commutes, so any interleaving must match)
  bool verified = true;
  if (me == 0) {
    std::vector<std::uint64_t> got(total_words);
    for (int u = 0; u < nunits; ++u)
      get_blocking({static_cast<unit_t>(u), table.segid, 0}, got.data() + u * words_per_unit,
                   words_per_unit * 8);
    std::vector<std::uint64_t> oracle(total_words);
    for (std::uint64_t i = 0; i < total_words; ++i) oracle[i] = i;
    for (int u = 0; u < nunits; ++u) {
      xorshift64s rng(stream_seed(opt.seed, u));
      for (std::uint64_t k = 0; k < updates_per_unit; ++k) {
        std::uint64_t v = rng.next();
        oracle[v & index_mask] ^= v;
      }
    }
    verified = std::memcmp(got.data(), oracle.data(), total_words * 8) == 0;

    csv_sink csv(opt.csv_path);
    std::fprintf(csv.get(), "table_bits,world,units_per_node,updates_total,seconds,gups,verified\n");
    std::fprintf(csv.get(), "%d,%d,%d,%llu,%.6f,%.6f,%d\n", opt.table_bits, nunits,
                 runtime::instance().config().units_per_node,
                 static_cast<unsigned long long>(total_updates), seconds, gups, verified ? 1 : 0);
    if (!verified) std::fprintf(stderr, "ra: verification FAILED\n");
  }
  barrier(w);
  team_memfree(w, table);
  return verified ? 0 : 1;
}

}  // namespace bench
