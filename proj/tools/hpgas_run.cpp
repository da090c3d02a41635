// hpgas-run: SPMD launcher. Spawns P unit processes grouped into virtual
// nodes of units_per_node, brokers the endpoint rendezvous, aggregates exit
// codes, and guarantees that no shared-memory object of the run outlives it.

#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;

namespace {

volatile sig_atomic_t g_interrupted = 0;

void on_signal(int) { g_interrupted = 1; }

std::string random_run_id() {
  std::random_device rd;
  std::mt19937_64 gen((std::uint64_t(rd()) << 32) ^ rd() ^
                      std::uint64_t(::getpid()) << 16 ^
                      std::uint64_t(std::chrono::steady_clock::now().time_since_epoch().count()));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(gen()));
  return buf;
}

struct child {
  pid_t pid = -1;
  int unit = -1;
  bool done = false;
  int status = 0;
};

void kill_children(std::vector<child>& children) {
  for (auto& c : children)
    if (!c.done) ::kill(c.pid, SIGTERM);
  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(2000);
  for (;;) {
    bool any_alive = false;
    for (auto& c : children) {
      if (c.done) continue;
      int status = 0;
      pid_t r = ::waitpid(c.pid, &status, WNOHANG);
      if (r == c.pid) {
        c.done = true;
        c.status = status;
      } else {
        any_alive = true;
      }
    }
    if (!any_alive) return;
    if (std::chrono::steady_clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  for (auto& c : children)
    if (!c.done) ::kill(c.pid, SIGKILL);
  for (auto& c : children) {
    if (c.done) continue;
    ::waitpid(c.pid, &c.status, 0);
    c.done = true;
  }
}

// Removes every shared-memory object of this run. Safe to call repeatedly.
int sweep_shm(const std::string& run_id) {
  int removed = 0;
  std::string prefix = "hpgas." + run_id + ".";
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator("/dev/shm", ec)) {
    std::string name = entry.path().filename().string();
    if (name.rfind(prefix, 0) == 0) {
      fs::remove(entry.path(), ec);
      ++removed;
    }
  }
  return removed;
}

}  // namespace

int main(int argc, char** argv) {
  // split off the child command at "--" before option parsing
  std::vector<std::string> own_args;
  std::vector<std::string> command;
  bool past_sep = false;
  for (int i = 1; i < argc; ++i) {
    if (!past_sep && std::string(argv[i]) == "--") {
      past_sep = true;
      continue;
    }
    (past_sep ? command : own_args).push_back(argv[i]);
  }

  CLI::App app{"hpgas-run: launch P units grouped into virtual nodes"};
  int nunits = 0;
  int units_per_node = 0;
  std::uint64_t pool_bytes = 4ull << 20;
  std::string run_id;
  double timeout_s = 0.0;
  double rendezvous_s = 30.0;
  app.add_option("-n,--nunits", nunits, "number of units (processes)")->required();
  app.add_option("-u,--units-per-node", units_per_node, "units per virtual node")->required();
  app.add_option("--pool-bytes", pool_bytes, "non-collective pool size per unit");
  app.add_option("--run-id", run_id, "run id (hex); random when omitted");
  app.add_option("--timeout", timeout_s, "kill the run after this many seconds");
  app.add_option("--rendezvous-timeout", rendezvous_s, "seconds to wait for all endpoints");
  try {
    std::vector<const char*> cargs = {argv[0]};
    for (auto& a : own_args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (command.empty()) {
    std::fprintf(stderr, "hpgas-run: missing program (usage: hpgas-run -n P -u U -- prog args)\n");
    return 2;
  }
  if (nunits < 1 || units_per_node < 1 || units_per_node > nunits) {
    std::fprintf(stderr, "hpgas-run: need 1 <= units_per_node <= nunits\n");
    return 2;
  }
  if (run_id.empty()) run_id = random_run_id();

  fs::path run_dir = fs::temp_directory_path() / ("hpgas-" + run_id);
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) {
    std::fprintf(stderr, "hpgas-run: cannot create %s: %s\n", run_dir.c_str(),
                 ec.message().c_str());
    return 2;
  }
  std::string endpoint_file = (run_dir / "endpoints").string();

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  std::vector<child> children;
  children.reserve(static_cast<std::size_t>(nunits));
  for (int u = 0; u < nunits; ++u) {
    pid_t pid = ::fork();
    if (pid < 0) {
      std::fprintf(stderr, "hpgas-run: fork failed\n");
      kill_children(children);
      sweep_shm(run_id);
      fs::remove_all(run_dir, ec);
      return 1;
    }
    if (pid == 0) {
      ::setenv("HPGAS_UNIT", std::to_string(u).c_str(), 1);
      ::setenv("HPGAS_WORLD_SIZE", std::to_string(nunits).c_str(), 1);
      ::setenv("HPGAS_UNITS_PER_NODE", std::to_string(units_per_node).c_str(), 1);
      ::setenv("HPGAS_RUN_ID", run_id.c_str(), 1);
      ::setenv("HPGAS_ENDPOINT_FILE", endpoint_file.c_str(), 1);
      ::setenv("HPGAS_POOL_BYTES", std::to_string(pool_bytes).c_str(), 1);
      std::vector<char*> cargv;
      for (auto& s : command) cargv.push_back(const_cast<char*>(s.c_str()));
      cargv.push_back(nullptr);
      ::execvp(cargv[0], cargv.data());
      std::fprintf(stderr, "hpgas-run: exec %s failed\n", cargv[0]);
      std::_Exit(127);
    }
    children.push_back({pid, u, false, 0});
  }

  auto fail_out = [&](const char* why) {
    std::fprintf(stderr, "hpgas-run: %s\n", why);
    kill_children(children);
    sweep_shm(run_id);
    fs::remove_all(run_dir, ec);
    return 1;
  };

  // rendezvous: gather per-unit announcements, then publish the directory
  {
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::milliseconds(static_cast<long>(rendezvous_s * 1000));
    for (;;) {
      if (g_interrupted) return fail_out("interrupted");
      for (auto& c : children) {
        int status = 0;
        if (!c.done && ::waitpid(c.pid, &status, WNOHANG) == c.pid) {
          c.done = true;
          c.status = status;
          return fail_out("a unit exited before rendezvous completed");
        }
      }
      std::ostringstream all;
      int seen = 0;
      for (int u = 0; u < nunits; ++u) {
        std::ifstream in(endpoint_file + ".a." + std::to_string(u));
        if (!in) break;
        std::string line;
        if (!std::getline(in, line) || line.empty()) break;
        all << line << '\n';
        ++seen;
      }
      if (seen == nunits) {
        std::string tmp = endpoint_file + ".tmp";
        {
          std::ofstream out(tmp, std::ios::trunc);
          out << all.str();
        }
        fs::rename(tmp, endpoint_file, ec);
        if (ec) return fail_out("cannot publish endpoint file");
        break;
      }
      if (std::chrono::steady_clock::now() >= deadline)
        return fail_out("rendezvous timed out waiting for unit endpoints");
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  }

  // supervise
  bool failed = false;
  auto watchdog = std::chrono::steady_clock::now() +
                  std::chrono::milliseconds(static_cast<long>(timeout_s * 1000));
  for (;;) {
    bool all_done = true;
    for (auto& c : children) {
      if (c.done) continue;
      int status = 0;
      pid_t r = ::waitpid(c.pid, &status, WNOHANG);
      if (r == c.pid) {
        c.done = true;
        c.status = status;
        if (WIFSIGNALED(status)) {
          std::fprintf(stderr, "hpgas-run: unit %d killed by signal %d\n", c.unit,
                       WTERMSIG(status));
          failed = true;
        } else if (WEXITSTATUS(status) != 0) {
          std::fprintf(stderr, "hpgas-run: unit %d exited with status %d\n", c.unit,
                       WEXITSTATUS(status));
          failed = true;
        }
      } else {
        all_done = false;
      }
    }
    if (failed && !all_done) {
      kill_children(children);
      all_done = true;
    }
    if (all_done) break;
    if (g_interrupted) {
      kill_children(children);
      failed = true;
      break;
    }
    if (timeout_s > 0 && std::chrono::steady_clock::now() >= watchdog) {
      std::fprintf(stderr, "hpgas-run: timeout after %.1f s\n", timeout_s);
      kill_children(children);
      failed = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }

  int leaked = sweep_shm(run_id);
  if (leaked > 0 && !failed)
    std::fprintf(stderr, "hpgas-run: warning: removed %d leaked shm object(s)\n", leaked);
  fs::remove_all(run_dir, ec);
  return failed ? 1 : 0;
}
