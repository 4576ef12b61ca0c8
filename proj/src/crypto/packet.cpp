#include "canopy/crypto/packet.hpp"

#include "canopy/error.hpp"

namespace canopy::crypto {

Bytes encode_packet(const SensorPacket& packet) {
  Bytes out;
  put_field(out, packet.encrypted_data);
  put_field(out, packet.fhash);
  put_field(out, packet.lp_ip);
  put_field(out, packet.node_id);
  put_field(out, u64_be(packet.sequence));
  put_field(out, packet.ach_ref);
  return out;
}

SensorPacket decode_packet(ByteSpan wire) {
  ByteReader reader(wire);
  SensorPacket packet;
  packet.encrypted_data = reader.field();
  packet.fhash = reader.field();
  packet.lp_ip = reader.string_field();
  packet.node_id = reader.string_field();
  Bytes seq = reader.field();
  if (seq.size() != 8) raise(Errc::decode_failure, "sequence field must be 8 bytes");
  packet.sequence = read_u64_be(seq);
  packet.ach_ref = reader.field();
  if (!reader.done()) raise(Errc::decode_failure, "trailing bytes after packet");
  return packet;
}

}  // namespace canopy::crypto
