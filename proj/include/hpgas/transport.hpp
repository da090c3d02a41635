#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "hpgas/topology.hpp"
#include "hpgas/wire.hpp"

namespace hpgas {

struct endpoint {
  unit_t unit = -1;
  node_t node = -1;
  std::string host;
  std::uint16_t port = 0;
};

// The launcher-written rendezvous file: one "<abs_unit> <node_id> <host> <port>"
// line per unit, complete before any unit leaves init.
class endpoint_directory {
public:
  endpoint_directory() = default;

  // Polls until the file exists (the launcher renames it into place atomically)
  // and carries world_size valid lines.
  static endpoint_directory load(const std::string& path, int world_size,
                                 std::chrono::milliseconds timeout);
  static endpoint_directory parse(const std::string& text, int world_size);

  const endpoint& at(unit_t u) const;
  int size() const { return static_cast<int>(entries_.size()); }

private:
  std::vector<endpoint> entries_;
};

// Rendezvous helpers shared between the runtime and the launcher: each unit
// announces its endpoint as "<endpoint_file>.a.<unit>" (written via rename),
// the launcher aggregates the announcements into the endpoint file.
std::string announce_path(const std::string& endpoint_file, unit_t unit);
void write_file_atomic(const std::string& path, const std::string& contents);

// Byte-stream mesh with an emulated passive target: a per-process progress
// agent serves inbound one-sided requests while the application thread is
// free to block. Outbound connections open on first use and are cached.
class transport {
public:
  using serve_fn = std::function<wire::status(const wire::request_header&,
                                              std::span<const std::byte>,
                                              std::vector<std::byte>&)>;

  explicit transport(unit_t me, std::chrono::milliseconds io_timeout);
  ~transport();
  transport(const transport&) = delete;
  transport& operator=(const transport&) = delete;

  std::uint16_t listen_port() const { return listen_port_; }
  void set_serve(serve_fn f) { serve_ = std::move(f); }
  void set_directory(endpoint_directory dir);
  void shutdown();

  // Blocking request/reply against one peer (application thread).
  wire::reply roundtrip(unit_t peer, wire::request_header h, std::span<const std::byte> payload);

  std::uint64_t next_tag() { return tag_counter_.fetch_add(1, std::memory_order_relaxed) + 1; }

  // Collectives used by the runtime: dissemination barrier, ring allgather.
  void barrier(const team& t);
  std::vector<std::byte> allgather(const team& t, std::span<const std::byte> contribution);

  // Exclusive use of one peer link, for pipelined request streams.
  class pipe {
  public:
    pipe(transport& tp, unit_t peer);
    void post(wire::request_header h, std::span<const std::byte> payload);
    wire::reply next_reply();

  private:
    transport& tp_;
    int fd_;
    std::unique_lock<std::mutex> lock_;
  };

  // instrumentation
  int outbound_connections() const;
  std::uint64_t requests_served() const { return served_.load(std::memory_order_relaxed); }

private:
  struct link {
    int fd = -1;
    std::mutex mu;
  };

  link& link_to(unit_t peer);  // connects on first use
  void acceptor_loop();
  void handler_loop(int fd);
  wire::reply roundtrip_on(int fd, const wire::request_header& h,
                           std::span<const std::byte> payload);

  // inbound collective state, recorded by the agent, consumed by the app thread
  struct collective_inbox {
    std::mutex mu;
    std::condition_variable cv;
    std::map<std::tuple<int, std::uint64_t, std::uint32_t>, int> barrier_tokens_;
    std::map<std::tuple<int, std::uint64_t, std::uint32_t>, std::vector<std::byte>> parts_;

    void record_barrier(int team_index, std::uint64_t epoch, std::uint32_t round);
    void record_part(int team_index, std::uint64_t epoch, std::uint32_t owner,
                     std::vector<std::byte> data);
    void await_barrier(int team_index, std::uint64_t epoch, std::uint32_t round,
                       std::chrono::milliseconds timeout);
    std::vector<std::byte> await_part(int team_index, std::uint64_t epoch, std::uint32_t owner,
                                      std::chrono::milliseconds timeout);
  };

  unit_t me_;
  std::chrono::milliseconds io_timeout_;
  std::chrono::milliseconds collective_timeout_;
  serve_fn serve_;
  endpoint_directory dir_;
  bool have_dir_ = false;

  int listen_fd_ = -1;
  std::uint16_t listen_port_ = 0;
  std::thread acceptor_;
  std::mutex handlers_mu_;
  std::vector<std::thread> handlers_;
  std::vector<int> inbound_fds_;
  std::atomic<bool> stopping_{false};

  mutable std::mutex links_mu_;
  std::map<unit_t, std::unique_ptr<link>> links_;

  collective_inbox inbox_;
  std::map<int, std::uint64_t> barrier_epoch_;    // app thread only
  std::map<int, std::uint64_t> allgather_epoch_;  // app thread only

  std::atomic<std::uint64_t> tag_counter_{0};
  std::atomic<std::uint64_t> served_{0};
};

}  // namespace hpgas
