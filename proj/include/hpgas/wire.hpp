#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hpgas::wire {

// Wire protocol for the inter-node one-sided engine. All integers are
// little-endian regardless of host order; layouts are fixed so independent
// implementations can interoperate (documented in the README).
//
// Request header, 40 bytes:
//   offset  size  field
//        0     4  opcode
//        4     4  segid            (collective ops: teamlist index)
//        8     4  target_rel_unit  (relative id of the addressed unit)
//       12     4  aux              (barrier: round; allgather: block owner; else 0)
//       16     8  target_disp      (byte displacement; collective ops: epoch)
//       24     8  nbytes           (payload bytes for PUT/ATOMIC/ALLGATHER, read size for GET)
//       32     8  tag              (unique per origin while in flight)
//
// Reply header, 24 bytes:
//   offset  size  field
//        0     8  tag
//        8     4  status
//       12     4  reserved (0)
//       16     8  nbytes   (payload bytes; 0 unless status is OK)

enum class opcode : std::uint32_t {
  put = 1,
  get = 2,
  atomic_add = 3,
  atomic_xor = 4,
  barrier_token = 5,
  allgather_part = 6,
};

enum class status : std::uint32_t {
  ok = 0,
  err_range = 1,
  err_segid = 2,
};

inline constexpr std::size_t request_header_size = 40;
inline constexpr std::size_t reply_header_size = 24;

// Frames larger than this are treated as protocol corruption.
inline constexpr std::uint64_t max_frame_payload = std::uint64_t{1} << 30;

struct request_header {
  opcode op = opcode::put;
  std::uint32_t segid = 0;
  std::uint32_t target_rel_unit = 0;
  std::uint32_t aux = 0;
  std::uint64_t target_disp = 0;
  std::uint64_t nbytes = 0;
  std::uint64_t tag = 0;

  friend bool operator==(const request_header&, const request_header&) = default;
};

struct reply_header {
  std::uint64_t tag = 0;
  status st = status::ok;
  std::uint64_t nbytes = 0;

  friend bool operator==(const reply_header&, const reply_header&) = default;
};

struct reply {
  reply_header hdr;
  std::vector<std::byte> payload;
};

void encode_request(const request_header& h, std::span<std::byte> out);  // out.size() == 40
request_header decode_request(std::span<const std::byte> in);            // throws on bad opcode

void encode_reply(const reply_header& h, std::span<std::byte> out);  // out.size() == 24
reply_header decode_reply(std::span<const std::byte> in);

bool valid_opcode(std::uint32_t v);
bool valid_status(std::uint32_t v);

}  // namespace hpgas::wire
