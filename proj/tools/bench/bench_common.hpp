#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "hpgas/hpgas.hpp"

namespace bench {

// xorshift64* stream; recorded per unit so the verification can replay it.
struct xorshift64s {
  std::uint64_t state;

  explicit xorshift64s(std::uint64_t seed) : state(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next() {
    state ^= state >> 12;
    state ^= state << 25;
    state ^= state >> 27;
    return state * 0x2545f4914f6cdd1dull;
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, int unit) {
  return splitmix64(seed ^ (0x517cc1b727220a95ull + static_cast<std::uint64_t>(unit)));
}

struct stats_ns {
  std::int64_t median = 0;
  std::int64_t p99 = 0;
  double mean = 0.0;
};

inline stats_ns compute_stats(std::vector<std::int64_t>& samples) {
  stats_ns s;
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  s.median = samples[samples.size() / 2];
  s.p99 = samples[std::min(samples.size() - 1, samples.size() * 99 / 100)];
  double sum = 0;
  for (auto v : samples) sum += static_cast<double>(v);
  s.mean = sum / static_cast<double>(samples.size());
  return s;
}

// CSV sink: stdout unless a path was given. Only unit 0 writes.
class csv_sink {
public:
  explicit csv_sink(const std::string& path) {
    if (!path.empty()) {
      f_ = std::fopen(path.c_str(), "w");
      owned_ = true;
      if (f_ == nullptr) {
        std::perror("hpgas-bench: fopen");
        f_ = stdout;
        owned_ = false;
      }
    } else {
      f_ = stdout;
    }
  }
  ~csv_sink() {
    if (owned_ && f_ != nullptr) std::fclose(f_);
  }
  std::FILE* get() { return f_; }

private:
  std::FILE* f_ = nullptr;
  bool owned_ = false;
};

struct options {
  std::vector<std::uint64_t> sizes;
  int reps = 1000;
  int n = 64;
  int table_bits = 20;
  double eps = 1e-4;
  std::uint64_t seed = 42;
  std::string csv_path;
  long max_iters = 1000000;
  std::uint64_t updates_per_unit = 0;  // 0: the 4x-table rule
};

int run_latency(const options& opt);
int run_distance(const options& opt);
int run_random_access(const options& opt);
int run_stencil(const options& opt);

// fewer reps for bulk transfers so default runs stay short; explicit small
// sizes (the interesting ones) always get the full count
inline int effective_reps(int reps, std::uint64_t size) {
  if (size <= 4096) return reps;
  auto scaled = static_cast<std::uint64_t>(reps) * 4096 / size;
  return static_cast<int>(std::max<std::uint64_t>(32, scaled));
}

}  // namespace bench
