#include "hpgas/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hpgas/error.hpp"
#include "hpgas/util.hpp"

namespace hpgas {

namespace {

std::chrono::milliseconds env_ms(const char* name, long def) {
  const char* v = std::getenv(name);
  return std::chrono::milliseconds(v ? std::atol(v) : def);
}

void read_full(int fd, std::byte* buf, std::size_t n) {
  std::size_t off = 0;
  while (off < n) {
    ssize_t r = ::read(fd, buf + off, n - off);
    if (r == 0) throw_error(errc::transport_error, "peer closed connection");
    if (r < 0) {
      if (errno == EINTR) continue;
      throw_error(errc::transport_error, std::string("read: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(r);
  }
}

void write_full(int fd, const std::byte* buf, std::size_t n) {
  std::size_t off = 0;
  while (off < n) {
    ssize_t r = ::write(fd, buf + off, n - off);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw_error(errc::transport_error, std::string("write: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(r);
  }
}

void send_request(int fd, const wire::request_header& h, std::span<const std::byte> payload) {
  HPGAS_CHECK(payload.size() == (h.op == wire::opcode::get ? 0 : h.nbytes));
  std::byte hdr[wire::request_header_size];
  wire::encode_request(h, hdr);
  write_full(fd, hdr, sizeof hdr);
  if (!payload.empty()) write_full(fd, payload.data(), payload.size());
}

wire::reply recv_reply(int fd) {
  std::byte hdr[wire::reply_header_size];
  read_full(fd, hdr, sizeof hdr);
  wire::reply r;
  r.hdr = wire::decode_reply(hdr);
  if (r.hdr.nbytes > 0) {
    r.payload.resize(r.hdr.nbytes);
    read_full(fd, r.payload.data(), r.payload.size());
  }
  return r;
}

void send_reply(int fd, const wire::reply_header& h, std::span<const std::byte> payload) {
  std::byte hdr[wire::reply_header_size];
  wire::encode_reply(h, hdr);
  write_full(fd, hdr, sizeof hdr);
  if (!payload.empty()) write_full(fd, payload.data(), payload.size());
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

// ---------------------------------------------------------------------------
// endpoint directory

endpoint_directory endpoint_directory::parse(const std::string& text, int world_size) {
  endpoint_directory dir;
  dir.entries_.assign(static_cast<std::size_t>(world_size), endpoint{});
  std::istringstream in(text);
  std::string line;
  int seen = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    endpoint e;
    int port = 0;
    if (!(ls >> e.unit >> e.node >> e.host >> port))
      throw_error(errc::transport_error, "bad endpoint line: " + line);
    e.port = static_cast<std::uint16_t>(port);
    if (e.unit < 0 || e.unit >= world_size)
      throw_error(errc::transport_error, "endpoint unit out of range: " + line);
    if (dir.entries_[static_cast<std::size_t>(e.unit)].unit != -1)
      throw_error(errc::transport_error, "duplicate endpoint for unit " + std::to_string(e.unit));
    dir.entries_[static_cast<std::size_t>(e.unit)] = e;
    ++seen;
  }
  if (seen != world_size)
    throw_error(errc::transport_error, "endpoint file has " + std::to_string(seen) + " of " +
                                           std::to_string(world_size) + " entries");
  return dir;
}

endpoint_directory endpoint_directory::load(const std::string& path, int world_size,
                                            std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    std::ifstream in(path);
    if (in) {
      std::stringstream ss;
      ss << in.rdbuf();
      // the launcher renames the complete file into place, so a readable file
      // is a complete file
      return parse(ss.str(), world_size);
    }
    if (std::chrono::steady_clock::now() >= deadline)
      throw_error(errc::timeout, "endpoint directory never appeared: " + path);
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
}

const endpoint& endpoint_directory::at(unit_t u) const {
  if (u < 0 || u >= size() || entries_[static_cast<std::size_t>(u)].unit != u)
    throw_error(errc::transport_error, "no endpoint for unit " + std::to_string(u));
  return entries_[static_cast<std::size_t>(u)];
}

std::string announce_path(const std::string& endpoint_file, unit_t unit) {
  return endpoint_file + ".a." + std::to_string(unit);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw_error(errc::transport_error, "cannot write " + tmp);
    out << contents;
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw_error(errc::transport_error, "rename " + tmp + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// collective inbox

void transport::collective_inbox::record_barrier(int team_index, std::uint64_t epoch,
                                                 std::uint32_t round) {
  {
    std::lock_guard lk(mu);
    barrier_tokens_[{team_index, epoch, round}] += 1;
  }
  cv.notify_all();
}

void transport::collective_inbox::record_part(int team_index, std::uint64_t epoch,
                                              std::uint32_t owner, std::vector<std::byte> data) {
  {
    std::lock_guard lk(mu);
    parts_[{team_index, epoch, owner}] = std::move(data);
  }
  cv.notify_all();
}

void transport::collective_inbox::await_barrier(int team_index, std::uint64_t epoch,
                                                std::uint32_t round,
                                                std::chrono::milliseconds timeout) {
  std::unique_lock lk(mu);
  auto key = std::tuple{team_index, epoch, round};
  bool ok = cv.wait_for(lk, timeout, [&] {
    auto it = barrier_tokens_.find(key);
    return it != barrier_tokens_.end() && it->second > 0;
  });
  if (!ok) throw_error(errc::timeout, "barrier timed out (team " + std::to_string(team_index) + ")");
  auto it = barrier_tokens_.find(key);
  if (--it->second == 0) barrier_tokens_.erase(it);
}

std::vector<std::byte> transport::collective_inbox::await_part(int team_index, std::uint64_t epoch,
                                                               std::uint32_t owner,
                                                               std::chrono::milliseconds timeout) {
  std::unique_lock lk(mu);
  auto key = std::tuple{team_index, epoch, owner};
  bool ok = cv.wait_for(lk, timeout, [&] { return parts_.count(key) != 0; });
  if (!ok)
    throw_error(errc::timeout, "allgather timed out (team " + std::to_string(team_index) + ")");
  auto node = parts_.extract(key);
  return std::move(node.mapped());
}

// ---------------------------------------------------------------------------
// transport

transport::transport(unit_t me, std::chrono::milliseconds io_timeout)
    : me_(me),
      io_timeout_(io_timeout),
      collective_timeout_(env_ms("HPGAS_COLLECTIVE_TIMEOUT_MS", 180000)) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw_error(errc::transport_error, "socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw_error(errc::transport_error, std::string("bind: ") + std::strerror(errno));
  if (::listen(listen_fd_, 128) != 0)
    throw_error(errc::transport_error, std::string("listen: ") + std::strerror(errno));
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  listen_port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { acceptor_loop(); });
}

transport::~transport() { shutdown(); }

void transport::set_directory(endpoint_directory dir) {
  dir_ = std::move(dir);
  have_dir_ = true;
}

void transport::shutdown() {
  bool expected = false;
  if (!stopping_.compare_exchange_strong(expected, true)) return;
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
  {
    std::lock_guard lk(handlers_mu_);
    for (int fd : inbound_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  std::vector<std::thread> hs;
  {
    std::lock_guard lk(handlers_mu_);
    hs.swap(handlers_);
  }
  for (auto& h : hs)
    if (h.joinable()) h.join();
  {
    std::lock_guard lk(handlers_mu_);
    for (int fd : inbound_fds_) ::close(fd);
    inbound_fds_.clear();
  }
  std::lock_guard lk(links_mu_);
  for (auto& [u, l] : links_)
    if (l->fd >= 0) ::close(l->fd);
  links_.clear();
}

void transport::acceptor_loop() {
  for (;;) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;  // listener closed
    }
    set_nodelay(fd);
    std::lock_guard lk(handlers_mu_);
    if (stopping_.load()) {
      ::close(fd);
      return;
    }
    inbound_fds_.push_back(fd);
    handlers_.emplace_back([this, fd] { handler_loop(fd); });
  }
}

// One thread per inbound connection: read a request, execute it, reply.
// Collective tokens are recorded and acknowledged without touching memory.
void transport::handler_loop(int fd) {
  std::vector<std::byte> payload;
  std::vector<std::byte> out;
  try {
    for (;;) {
      std::byte hdr_buf[wire::request_header_size];
      read_full(fd, hdr_buf, sizeof hdr_buf);
      wire::request_header h = wire::decode_request(hdr_buf);
      payload.clear();
      if (h.op != wire::opcode::get && h.nbytes > 0) {
        payload.resize(h.nbytes);
        read_full(fd, payload.data(), payload.size());
      }

      wire::reply_header rh;
      rh.tag = h.tag;
      out.clear();
      switch (h.op) {
        case wire::opcode::barrier_token:
          inbox_.record_barrier(static_cast<int>(h.segid), h.target_disp, h.aux);
          rh.st = wire::status::ok;
          break;
        case wire::opcode::allgather_part:
          inbox_.record_part(static_cast<int>(h.segid), h.target_disp, h.aux,
                             std::vector<std::byte>(payload));
          rh.st = wire::status::ok;
          break;
        default:
          HPGAS_CHECK(serve_ != nullptr);
          rh.st = serve_(h, payload, out);
          break;
      }
      rh.nbytes = (rh.st == wire::status::ok) ? out.size() : 0;
      send_reply(fd, rh, rh.nbytes ? std::span<const std::byte>(out) : std::span<const std::byte>{});
      served_.fetch_add(1, std::memory_order_relaxed);
    }
  } catch (const error&) {
    // peer closed or protocol failure: drop the connection
  }
}

transport::link& transport::link_to(unit_t peer) {
  {
    std::lock_guard lk(links_mu_);
    auto it = links_.find(peer);
    if (it != links_.end()) return *it->second;
  }
  HPGAS_CHECK(have_dir_);
  const endpoint& ep = dir_.at(peer);
  auto deadline = std::chrono::steady_clock::now() + io_timeout_;
  int fd = -1;
  for (;;) {
    fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_error(errc::transport_error, "socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1)
      throw_error(errc::transport_error, "bad host " + ep.host);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) break;
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline)
      throw_error(errc::timeout, "connect to unit " + std::to_string(peer) + " timed out");
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  set_nodelay(fd);
  std::lock_guard lk(links_mu_);
  auto [it, inserted] = links_.emplace(peer, std::make_unique<link>());
  if (!inserted) {
    ::close(fd);  // lost a race with ourselves; keep the existing link
    return *it->second;
  }
  it->second->fd = fd;
  return *it->second;
}

wire::reply transport::roundtrip_on(int fd, const wire::request_header& h,
                                    std::span<const std::byte> payload) {
  send_request(fd, h, payload);
  wire::reply r = recv_reply(fd);
  HPGAS_CHECK(r.hdr.tag == h.tag);  // serial per link: replies come back in order
  return r;
}

wire::reply transport::roundtrip(unit_t peer, wire::request_header h,
                                 std::span<const std::byte> payload) {
  link& l = link_to(peer);
  std::lock_guard lk(l.mu);
  return roundtrip_on(l.fd, h, payload);
}

int transport::outbound_connections() const {
  std::lock_guard lk(links_mu_);
  return static_cast<int>(links_.size());
}

// ---------------------------------------------------------------------------
// collectives

void transport::barrier(const team& t) {
  int size = t.size();
  int me_rel = t.rel_unit(me_);
  if (size == 1) return;
  std::uint64_t epoch = ++barrier_epoch_[t.index()];
  for (std::uint32_t round = 0; (1 << round) < size; ++round) {
    int dist = 1 << round;
    int to_rel = (me_rel + dist) % size;
    wire::request_header h;
    h.op = wire::opcode::barrier_token;
    h.segid = static_cast<std::uint32_t>(t.index());
    h.target_rel_unit = static_cast<std::uint32_t>(to_rel);
    h.aux = round;
    h.target_disp = epoch;
    h.nbytes = 0;
    h.tag = next_tag();
    roundtrip(t.abs_unit(to_rel), h, {});
    inbox_.await_barrier(t.index(), epoch, round, collective_timeout_);
  }
}

std::vector<std::byte> transport::allgather(const team& t, std::span<const std::byte> contribution) {
  int size = t.size();
  int me_rel = t.rel_unit(me_);
  std::size_t n = contribution.size();
  std::vector<std::byte> out(n * static_cast<std::size_t>(size));
  std::copy(contribution.begin(), contribution.end(),
            out.begin() + static_cast<std::ptrdiff_t>(n * static_cast<std::size_t>(me_rel)));
  if (size == 1) return out;

  std::uint64_t epoch = ++allgather_epoch_[t.index()];
  int succ_rel = (me_rel + 1) % size;
  unit_t succ_abs = t.abs_unit(succ_rel);
  for (int step = 0; step < size - 1; ++step) {
    int send_owner = (me_rel - step + 2 * size) % size;
    wire::request_header h;
    h.op = wire::opcode::allgather_part;
    h.segid = static_cast<std::uint32_t>(t.index());
    h.target_rel_unit = static_cast<std::uint32_t>(succ_rel);
    h.aux = static_cast<std::uint32_t>(send_owner);
    h.target_disp = epoch;
    h.nbytes = n;
    h.tag = next_tag();
    roundtrip(succ_abs, h,
              std::span<const std::byte>(out.data() + n * static_cast<std::size_t>(send_owner), n));

    int recv_owner = (me_rel - step - 1 + 2 * size) % size;
    std::vector<std::byte> part =
        inbox_.await_part(t.index(), epoch, static_cast<std::uint32_t>(recv_owner),
                          collective_timeout_);
    if (part.size() != n)
      throw_error(errc::collective_mismatch,
                  "allgather contribution size mismatch: " + std::to_string(part.size()) +
                      " != " + std::to_string(n));
    std::copy(part.begin(), part.end(),
              out.begin() + static_cast<std::ptrdiff_t>(n * static_cast<std::size_t>(recv_owner)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// pipelined access

transport::pipe::pipe(transport& tp, unit_t peer) : tp_(tp), fd_(-1) {
  link& l = tp_.link_to(peer);
  lock_ = std::unique_lock(l.mu);
  fd_ = l.fd;
}

void transport::pipe::post(wire::request_header h, std::span<const std::byte> payload) {
  send_request(fd_, h, payload);
}

wire::reply transport::pipe::next_reply() { return recv_reply(fd_); }

}  // namespace hpgas
