// hpgas-bench: the measurement programs, run as SPMD children of hpgas-run:
//
//   hpgas-run -n 2 -u 2 -- hpgas-bench latency --reps 10000
//   hpgas-run -n 8 -u 4 -- hpgas-bench distance --sizes 8
//   hpgas-run -n 4 -u 4 -- hpgas-bench ra --table-bits 20
//   hpgas-run -n 4 -u 4 -- hpgas-bench stencil --n 64 --eps 1e-8
//
// Unit 0 prints one CSV table per run; diagnostics go to stderr.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>

#include "bench_common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hpgas benchmark suite"};
  app.require_subcommand(1);

  bench::options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--sizes", opt.sizes, "message sizes in bytes");
    sub->add_option("--reps", opt.reps, "repetitions per measurement");
    sub->add_option("--seed", opt.seed, "PRNG seed");
    sub->add_option("--csv", opt.csv_path, "write the CSV here instead of stdout");
  };

  CLI::App* lat = app.add_subcommand("latency", "blocking put/get latency on 2 units");
  add_common(lat);
  CLI::App* dist = app.add_subcommand("distance", "latency vs logical distance from unit 0");
  add_common(dist);
  CLI::App* ra = app.add_subcommand("ra", "Random Access GUPs with XOR updates");
  add_common(ra);
  ra->add_option("--table-bits", opt.table_bits, "log2 of table words per unit");
  ra->add_option("--updates-per-unit", opt.updates_per_unit,
                 "override the 4x-table-words update count");
  CLI::App* sten = app.add_subcommand("stencil", "five-point Gauss-Seidel halo exchange");
  add_common(sten);
  sten->add_option("--n", opt.n, "grid dimension");
  sten->add_option("--eps", opt.eps, "convergence threshold on the largest update");
  sten->add_option("--max-iters", opt.max_iters, "iteration cap");

  CLI11_PARSE(app, argc, argv);

  try {
    hpgas::init();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "hpgas-bench: init failed: %s\n", e.what());
    return 3;
  }

  int rc = 1;
  try {
    if (lat->parsed()) rc = bench::run_latency(opt);
    if (dist->parsed()) rc = bench::run_distance(opt);
    if (ra->parsed()) rc = bench::run_random_access(opt);
    if (sten->parsed()) rc = bench::run_stencil(opt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "hpgas-bench[%d]: %s\n", hpgas::my_unit(), e.what());
    return 4;
  }
  hpgas::finalize();
  return rc;
}
