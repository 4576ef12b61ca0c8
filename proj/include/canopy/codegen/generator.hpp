#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "canopy/codegen/manifest.hpp"
#include "canopy/crypto/digest.hpp"

namespace canopy::codegen {

struct SensorTemplate {
  std::string library;     // one DSL line per distinct type
  std::string declare;     // PO line; {pin} {var} substituted
  std::string setup;       // SU line
  std::string read_expr;   // DP line
};

struct OutputTemplate {
  std::string declare;
  std::string write_stmt;  // DP line
};

struct BoardTemplate {
  std::vector<std::string> libraries;  // DNL lines
};

// Fixed template catalog covering the shipped service kinds and boards.
class TemplateCatalog {
 public:
  static const TemplateCatalog& builtin();

  const BoardTemplate* board(const std::string& name) const;
  const SensorTemplate* sensor(const std::string& type) const;
  const OutputTemplate* output(const std::string& type) const;

  std::map<std::string, BoardTemplate> boards;
  std::map<std::string, SensorTemplate> sensors;
  std::map<std::string, OutputTemplate> outputs;
};

// Section order of the generated node code.
enum class Section { snl = 0, dnl, dsl, po, su, dp, d };
inline constexpr std::size_t kSectionCount = 7;
const char* section_name(Section section);

struct GeneratedCode {
  std::array<std::string, kSectionCount> sections;
  std::string rendered;
  Bytes code_hash;  // digest(rendered)
  crypto::DigestKind digest_kind = crypto::DigestKind::sha256;
  std::string unit;  // node name, or node:pin for per-binding HP units
};

// LP firmware skeleton: static libraries, board libraries, deduplicated
// sensor libraries, pin/object declarations, setup (sensors + static network
// part), packet construction matching the wire format, and per-binding delays.
// Deterministic: same manifest and catalog give byte-identical output.
GeneratedCode generate_lp(const NodeManifest& manifest, const TemplateCatalog& catalog,
                          crypto::DigestKind kind);

// One receive/send pipeline unit per sensor and per output (n1 + n2 units).
std::vector<GeneratedCode> generate_hp(const NodeManifest& manifest,
                                       const TemplateCatalog& catalog, crypto::DigestKind kind);

// Code-alteration check: digest(observed) == code.code_hash.
bool attest(const GeneratedCode& code, std::string_view observed);

// The packet field list emitted into the DP section, in wire order. Exposed
// so tests can parse the generated layout back out and round-trip it against
// the packet codec.
std::vector<std::string> parse_packet_layout(const std::string& rendered);

}  // namespace canopy::codegen
