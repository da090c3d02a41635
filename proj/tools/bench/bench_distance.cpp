// Blocking put/get latency from unit 0 as a function of logical distance to
// the target. The latency plateaus across targets inside the origin's node
// and steps up at the first cross-node target; the per-target path counters
// make the dispatch decision checkable.

#include "bench_common.hpp"
#include "hpgas/util.hpp"

namespace bench {

int run_distance(const options& opt) {
  using namespace hpgas;
  const team& w = world();
  if (w.size() < 2) {
    std::fprintf(stderr, "distance: requires at least 2 units\n");
    return 2;
  }
  unit_t me = my_unit();

  std::vector<std::uint64_t> sizes = opt.sizes;
  if (sizes.empty()) sizes = {8, 1ull << 20};
  std::uint64_t region = 0;
  for (auto s : sizes) region = std::max(region, s);

  global_ptr base = team_memalloc(w, region);
  std::vector<std::byte> buf(region, std::byte{0x5a});

  csv_sink csv(me == 0 ? opt.csv_path : std::string{});
  if (me == 0)
    std::fprintf(csv.get(),
                 "benchmark,target,size_bytes,path,reps,median_ns,local_ops,remote_ops\n");

  std::vector<std::int64_t> samples;
  for (const char* op : {"put", "get"}) {
    for (std::uint64_t size : sizes) {
      for (unit_t target = 1; target < w.size(); ++target) {
        int reps = effective_reps(opt.reps, size);
        int warmup = std::max(4, reps / 100);
        barrier(w);
        if (me == 0) {
          global_ptr g = {target, base.segid, 0};
          for (int i = 0; i < warmup; ++i)
            op[0] == 'p' ? put_blocking(g, buf.data(), size)
                         : get_blocking(g, buf.data(), size);
          rma_counters before = counters_snapshot();
          samples.clear();
          for (int i = 0; i < reps; ++i) {
            std::int64_t t0 = now_ns();
            op[0] == 'p' ? put_blocking(g, buf.data(), size)
                         : get_blocking(g, buf.data(), size);
            samples.push_back(now_ns() - t0);
          }
          rma_counters after = counters_snapshot();
          std::uint64_t local_ops =
              (after.local_puts - before.local_puts) + (after.local_gets - before.local_gets);
          std::uint64_t remote_ops =
              (after.remote_puts - before.remote_puts) + (after.remote_gets - before.remote_gets);
          stats_ns st = compute_stats(samples);
          std::fprintf(csv.get(), "%s,%d,%llu,%s,%d,%lld,%llu,%llu\n", op, target,
                       static_cast<unsigned long long>(size),
                       same_node(0, target) ? "local" : "remote", reps,
                       static_cast<long long>(st.median),
                       static_cast<unsigned long long>(local_ops),
                       static_cast<unsigned long long>(remote_ops));
        }
        barrier(w);
      }
    }
  }
  team_memfree(w, base);
  return 0;
}

}  // namespace bench
