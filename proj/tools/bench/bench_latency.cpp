// Blocking put/get latency between 2 units, on the memory-sharing path (when
// the pair shares a node) and on the forced transport path.

#include <cstring>

#include "bench_common.hpp"
#include "hpgas/util.hpp"

namespace bench {

namespace {

constexpr std::uint64_t max_region = 1ull << 21;

struct lane {
  const char* name;
  hpgas::path_hint hint;
};

}  // namespace

int run_latency(const options& opt) {
  using namespace hpgas;
  const team& w = world();
  if (w.size() != 2) {
    std::fprintf(stderr, "latency: requires exactly 2 units\n");
    return 2;
  }
  unit_t me = my_unit();
  bool shared_pair = same_node(0, 1);

  std::vector<std::uint64_t> sizes = opt.sizes;
  if (sizes.empty())
    for (std::uint64_t s = 1; s <= max_region; s <<= 1) sizes.push_back(s);
  for (auto s : sizes)
    if (s == 0 || s > max_region) {
      std::fprintf(stderr, "latency: sizes must be in [1, 2^21]\n");
      return 2;
    }

  global_ptr region = team_memalloc(w, max_region);
  global_ptr target = {1, region.segid, 0};
  std::vector<std::byte> buf(max_region);
  xorshift64s rng(stream_seed(opt.seed, me));
  for (auto& b : buf) b = std::byte(rng.next() & 0xff);

  std::vector<lane> lanes;
  if (shared_pair) lanes.push_back({"local", path_hint::automatic});
  lanes.push_back({"remote", path_hint::force_remote});

  csv_sink csv(me == 0 ? opt.csv_path : std::string{});
  if (me == 0)
    std::fprintf(csv.get(), "benchmark,size_bytes,path,reps,median_ns,mean_ns,p99_ns\n");

  std::vector<std::int64_t> samples;
  for (const char* op : {"put", "get"}) {
    for (const lane& ln : lanes) {
      for (std::uint64_t size : sizes) {
        int reps = effective_reps(opt.reps, size);
        int warmup = std::max(10, reps / 100);
        barrier(w);
        if (me == 0) {
          samples.clear();
          samples.reserve(static_cast<std::size_t>(reps));
          for (int i = 0; i < warmup; ++i) {
            if (op[0] == 'p')
              put_blocking(target, buf.data(), size, ln.hint);
            else
              get_blocking(target, buf.data(), size, ln.hint);
          }
          for (int i = 0; i < reps; ++i) {
            std::int64_t t0 = now_ns();
            if (op[0] == 'p')
              put_blocking(target, buf.data(), size, ln.hint);
            else
              get_blocking(target, buf.data(), size, ln.hint);
            samples.push_back(now_ns() - t0);
          }
          stats_ns st = compute_stats(samples);
          std::fprintf(csv.get(), "%s,%llu,%s,%d,%lld,%.1f,%lld\n", op,
                       static_cast<unsigned long long>(size), ln.name, reps,
                       static_cast<long long>(st.median), st.mean,
                       static_cast<long long>(st.p99));
        }
        barrier(w);
      }
    }
  }
  team_memfree(w, region);
  return 0;
}

}  // namespace bench
