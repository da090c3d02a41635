#include "hpgas/shm.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "hpgas/error.hpp"

namespace hpgas {

namespace {

std::string os_name(const std::string& name) { return "/" + name; }

std::byte* map_fd(int fd, std::size_t bytes) {
  void* p = ::mmap(nullptr, bytes, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
  if (p == MAP_FAILED) return nullptr;
  return static_cast<std::byte*>(p);
}

}  // namespace

shared_segment::shared_segment(shared_segment&& other) noexcept
    : name_(std::move(other.name_)), base_(other.base_), size_(other.size_) {
  other.base_ = nullptr;
  other.size_ = 0;
}

shared_segment& shared_segment::operator=(shared_segment&& other) noexcept {
  if (this != &other) {
    this->~shared_segment();
    name_ = std::move(other.name_);
    base_ = other.base_;
    size_ = other.size_;
    other.base_ = nullptr;
    other.size_ = 0;
  }
  return *this;
}

shared_segment::~shared_segment() {
  if (base_ != nullptr) ::munmap(base_, size_);
  base_ = nullptr;
}

shared_segment shared_segment::create(const std::string& name, std::size_t bytes) {
  HPGAS_CHECK(bytes > 0);
  int fd = ::shm_open(os_name(name).c_str(), O_CREAT | O_EXCL | O_RDWR, 0600);
  if (fd < 0)
    throw_error(errc::allocation_failure,
                "shm_open(" + name + "): " + std::strerror(errno));
  if (::ftruncate(fd, static_cast<off_t>(bytes)) != 0) {
    int e = errno;
    ::close(fd);
    ::shm_unlink(os_name(name).c_str());
    throw_error(errc::allocation_failure, "ftruncate(" + name + "): " + std::strerror(e));
  }
  std::byte* base = map_fd(fd, bytes);
  ::close(fd);
  if (base == nullptr) {
    ::shm_unlink(os_name(name).c_str());
    throw_error(errc::allocation_failure, "mmap(" + name + ") failed");
  }
  shared_segment s;
  s.name_ = name;
  s.base_ = base;
  s.size_ = bytes;
  return s;
}

shared_segment shared_segment::open(const std::string& name, std::size_t bytes,
                                    std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    int fd = ::shm_open(os_name(name).c_str(), O_RDWR, 0600);
    if (fd >= 0) {
      struct stat st{};
      if (::fstat(fd, &st) == 0 && static_cast<std::size_t>(st.st_size) == bytes) {
        std::byte* base = map_fd(fd, bytes);
        ::close(fd);
        if (base == nullptr) throw_error(errc::allocation_failure, "mmap(" + name + ") failed");
        shared_segment s;
        s.name_ = name;
        s.base_ = base;
        s.size_ = bytes;
        return s;
      }
      ::close(fd);  // exists but not yet sized; retry
    }
    if (std::chrono::steady_clock::now() >= deadline)
      throw_error(errc::timeout, "waiting for segment " + name);
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
}

void shared_segment::unlink(const std::string& name) {
  ::shm_unlink(os_name(name).c_str());  // ENOENT is fine
}

std::string segment_name(const std::string& run_id, int team_index, std::uint32_t segid,
                         node_t node) {
  return "hpgas." + run_id + "." + std::to_string(team_index) + "." + std::to_string(segid) +
         "." + std::to_string(node);
}

}  // namespace hpgas
