#pragma once

#include <cstdint>
#include <string>

#include "canopy/bytes.hpp"

namespace canopy::crypto {

// The six-field authenticated sensor transaction payload. Wire format is
// length-prefixed fields in exactly this order (see docs/formats.md).
struct SensorPacket {
  Bytes encrypted_data;
  Bytes fhash;
  std::string lp_ip;
  std::string node_id;
  std::uint64_t sequence = 0;
  Bytes ach_ref;  // digest of the access-control header version in force

  bool operator==(const SensorPacket&) const = default;
};

Bytes encode_packet(const SensorPacket& packet);
SensorPacket decode_packet(ByteSpan wire);  // throws decode_failure

}  // namespace canopy::crypto
