#include "hpgas/wire.hpp"

#include <string>

#include "hpgas/error.hpp"
#include "hpgas/util.hpp"

namespace hpgas::wire {

bool valid_opcode(std::uint32_t v) {
  return v >= static_cast<std::uint32_t>(opcode::put) &&
         v <= static_cast<std::uint32_t>(opcode::allgather_part);
}

bool valid_status(std::uint32_t v) { return v <= static_cast<std::uint32_t>(status::err_segid); }

void encode_request(const request_header& h, std::span<std::byte> out) {
  HPGAS_CHECK(out.size() == request_header_size);
  store_le32(out.data() + 0, static_cast<std::uint32_t>(h.op));
  store_le32(out.data() + 4, h.segid);
  store_le32(out.data() + 8, h.target_rel_unit);
  store_le32(out.data() + 12, h.aux);
  store_le64(out.data() + 16, h.target_disp);
  store_le64(out.data() + 24, h.nbytes);
  store_le64(out.data() + 32, h.tag);
}

request_header decode_request(std::span<const std::byte> in) {
  HPGAS_CHECK(in.size() == request_header_size);
  std::uint32_t op = load_le32(in.data() + 0);
  if (!valid_opcode(op))
    throw_error(errc::transport_error, "bad opcode " + std::to_string(op));
  request_header h;
  h.op = static_cast<opcode>(op);
  h.segid = load_le32(in.data() + 4);
  h.target_rel_unit = load_le32(in.data() + 8);
  h.aux = load_le32(in.data() + 12);
  h.target_disp = load_le64(in.data() + 16);
  h.nbytes = load_le64(in.data() + 24);
  h.tag = load_le64(in.data() + 32);
  if (h.nbytes > max_frame_payload)
    throw_error(errc::transport_error, "oversized frame: " + std::to_string(h.nbytes));
  return h;
}

void encode_reply(const reply_header& h, std::span<std::byte> out) {
  HPGAS_CHECK(out.size() == reply_header_size);
  store_le64(out.data() + 0, h.tag);
  store_le32(out.data() + 8, static_cast<std::uint32_t>(h.st));
  store_le32(out.data() + 12, 0);
  store_le64(out.data() + 16, h.nbytes);
}

reply_header decode_reply(std::span<const std::byte> in) {
  HPGAS_CHECK(in.size() == reply_header_size);
  reply_header h;
  h.tag = load_le64(in.data() + 0);
  std::uint32_t st = load_le32(in.data() + 8);
  if (!valid_status(st))
    throw_error(errc::transport_error, "bad status " + std::to_string(st));
  h.st = static_cast<status>(st);
  h.nbytes = load_le64(in.data() + 16);
  if (h.nbytes > max_frame_payload)
    throw_error(errc::transport_error, "oversized reply: " + std::to_string(h.nbytes));
  return h;
}

}  // namespace hpgas::wire
