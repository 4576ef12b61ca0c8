#include "canopy/codegen/generator.hpp"

#include <set>
#include <sstream>

#include "canopy/error.hpp"

namespace canopy::codegen {

const char* section_name(Section section) {
  switch (section) {
    case Section::snl: return "SNL";
    case Section::dnl: return "DNL";
    case Section::dsl: return "DSL";
    case Section::po: return "PO";
    case Section::su: return "SU";
    case Section::dp: return "DP";
    case Section::d: return "D";
  }
  return "?";
}

const TemplateCatalog& TemplateCatalog::builtin() {
  static const TemplateCatalog catalog = [] {
    TemplateCatalog c;
    c.boards["esp-class"] = BoardTemplate{{"boards/esp-class/core", "boards/esp-class/netstack"}};
    c.boards["esp32"] = BoardTemplate{{"boards/esp32/core", "boards/esp32/webserver"}};
    c.boards["esp8266"] = BoardTemplate{{"boards/esp8266/core", "boards/esp8266/webserver"}};
    c.boards["nodemcu"] = BoardTemplate{{"boards/esp8266/core", "boards/nodemcu/pins"}};

    auto sensor = [&](const std::string& type, const std::string& lib, const std::string& call) {
      c.sensors[type] = SensorTemplate{
          lib,
          "sensor " + type + " at pin {pin} as {var}",
          "setup {var}: " + call + ".begin({pin})",
          "read {var} -> payload: " + call + ".read({pin})",
      };
    };
    sensor("gps", "sensors/gps-serial", "gps");
    sensor("health_structure", "sensors/strain-gauge", "strain");
    sensor("weather", "sensors/weather-station", "weather");
    sensor("air_quality", "sensors/air-quality", "airq");
    sensor("camera", "sensors/camera-module", "camera");
    sensor("light", "sensors/ldr", "ldr");
    sensor("temperature", "sensors/dht", "dht");
    sensor("humidity", "sensors/dht", "dht");
    sensor("pressure", "sensors/barometer", "baro");
    sensor("ir", "sensors/ir-proximity", "ir");

    auto output = [&](const std::string& type, const std::string& call) {
      c.outputs[type] = OutputTemplate{
          "output " + type + " at pin {pin} as {var}",
          "emit {var} <- read-request: " + call + ".apply({pin})",
      };
    };
    output("smart_light", "smart-light");
    output("traffic_light", "traffic-light");
    output("relay", "relay");
    return c;
  }();
  return catalog;
}

const BoardTemplate* TemplateCatalog::board(const std::string& name) const {
  auto it = boards.find(name);
  return it == boards.end() ? nullptr : &it->second;
}

const SensorTemplate* TemplateCatalog::sensor(const std::string& type) const {
  auto it = sensors.find(type);
  return it == sensors.end() ? nullptr : &it->second;
}

const OutputTemplate* TemplateCatalog::output(const std::string& type) const {
  auto it = outputs.find(type);
  return it == outputs.end() ? nullptr : &it->second;
}

namespace {

std::string substitute(std::string text, const Binding& binding, const std::string& var) {
  auto replace_all = [&](const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
      text.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all("{pin}", binding.pin);
  replace_all("{var}", var);
  return text;
}

std::string sensor_var(const Binding& b) { return "s_" + b.pin; }
std::string output_var(const Binding& b) { return "o_" + b.pin; }

constexpr std::string_view kPacketLayoutHeader =
    "packet fields (wire order, u32be length prefixed):";

// The six wire fields in codec order; field 5 is an 8-byte big-endian
// sequence number inside its length-prefixed slot.
constexpr std::string_view kPacketLayout =
    "  1 encrypted_data\n"
    "  2 fhash\n"
    "  3 lp_ip\n"
    "  4 node_id\n"
    "  5 sequence\n"
    "  6 ach\n";

std::string render(const std::string& banner,
                   const std::array<std::string, kSectionCount>& sections) {
  std::string out = banner;
  for (std::size_t i = 0; i < kSectionCount; ++i) {
    out += "\n;; section ";
    out += section_name(static_cast<Section>(i));
    out += "\n";
    out += sections[i];
  }
  return out;
}

}  // namespace

GeneratedCode generate_lp(const NodeManifest& manifest, const TemplateCatalog& catalog,
                          crypto::DigestKind kind) {
  validate_manifest(manifest);
  const BoardTemplate* board = catalog.board(manifest.board);
  if (board == nullptr) {
    raise(Errc::catalog_miss, "unknown board '" + manifest.board + "' (node " + manifest.node + ")");
  }
  std::vector<const SensorTemplate*> sensor_templates;
  for (const Binding& b : manifest.sensors) {
    const SensorTemplate* t = catalog.sensor(b.type);
    if (t == nullptr) {
      raise(Errc::catalog_miss, "unknown sensor type '" + b.type + "' at pin " + b.pin);
    }
    sensor_templates.push_back(t);
  }
  std::vector<const OutputTemplate*> output_templates;
  for (const Binding& b : manifest.outputs) {
    const OutputTemplate* t = catalog.output(b.type);
    if (t == nullptr) {
      raise(Errc::catalog_miss, "unknown output type '" + b.type + "' at pin " + b.pin);
    }
    output_templates.push_back(t);
  }

  GeneratedCode code;
  code.digest_kind = kind;
  code.unit = manifest.node;

  // SNL: board-independent crypto and network plumbing.
  code.sections[0] =
      "use lib \"net/wifi-client\"\n"
      "use lib \"net/ota-receiver\"\n"
      "use lib \"crypto/digest\"\n"
      "use lib \"crypto/stream-cipher\"\n"
      "use lib \"chain/hash-chain\"\n"
      "use lib \"packet/wire\"\n";

  // DNL: board-keyed libraries.
  {
    std::string dnl;
    for (const std::string& lib : board->libraries) {
      dnl += "use board lib \"" + lib + "\"\n";
    }
    code.sections[1] = std::move(dnl);
  }

  // DSL: union of sensor-type libraries, first occurrence wins.
  {
    std::string dsl;
    std::set<std::string> seen;
    for (const SensorTemplate* t : sensor_templates) {
      if (seen.insert(t->library).second) {
        dsl += "use sensor lib \"" + t->library + "\"\n";
      }
    }
    code.sections[2] = std::move(dsl);
  }

  // PO: pin/object declarations for sensors then outputs.
  {
    std::string po;
    for (std::size_t i = 0; i < manifest.sensors.size(); ++i) {
      po += substitute(sensor_templates[i]->declare, manifest.sensors[i],
                       sensor_var(manifest.sensors[i])) +
            "\n";
    }
    for (std::size_t i = 0; i < manifest.outputs.size(); ++i) {
      po += substitute(output_templates[i]->declare, manifest.outputs[i],
                       output_var(manifest.outputs[i])) +
            "\n";
    }
    code.sections[3] = std::move(po);
  }

  // SU: per-sensor setup plus the static network part (SUN).
  {
    std::string su;
    for (std::size_t i = 0; i < manifest.sensors.size(); ++i) {
      su += substitute(sensor_templates[i]->setup, manifest.sensors[i],
                       sensor_var(manifest.sensors[i])) +
            "\n";
    }
    su +=
        "setup network [SUN]: join local block; establish shared key with admin; "
        "load one-time key; prehash := 0\n";
    code.sections[4] = std::move(su);
  }

  // DP: packet construction matching the wire format.
  {
    std::string dp{kPacketLayoutHeader};
    dp += "\n";
    dp += kPacketLayout;
    for (std::size_t i = 0; i < manifest.sensors.size(); ++i) {
      dp += substitute(sensor_templates[i]->read_expr, manifest.sensors[i],
                       sensor_var(manifest.sensors[i])) +
            "\n";
    }
    for (std::size_t i = 0; i < manifest.outputs.size(); ++i) {
      dp += substitute(output_templates[i]->write_stmt, manifest.outputs[i],
                       output_var(manifest.outputs[i])) +
            "\n";
    }
    dp +=
        "seal: dhash := H(payload); khash := H(otk + prehash); fhash := H(khash + dhash); "
        "payload := encrypt(payload)\n";
    code.sections[5] = std::move(dp);
  }

  // D: per-binding delays.
  {
    std::string d;
    for (const Binding& b : manifest.sensors) {
      d += "delay after " + sensor_var(b) + ": " + std::to_string(b.delay_ms) + " ms\n";
    }
    for (const Binding& b : manifest.outputs) {
      d += "delay after " + output_var(b) + ": " + std::to_string(b.delay_ms) + " ms\n";
    }
    code.sections[6] = std::move(d);
  }

  code.rendered =
      render(";; node code: " + manifest.node + " (" + manifest.board + ")\n", code.sections);
  code.code_hash = crypto::digest(kind, code.rendered);
  return code;
}

std::vector<GeneratedCode> generate_hp(const NodeManifest& manifest,
                                       const TemplateCatalog& catalog, crypto::DigestKind kind) {
  validate_manifest(manifest);
  auto pipeline = [&](const Binding& binding, bool is_sensor) {
    if (is_sensor ? catalog.sensor(binding.type) == nullptr
                  : catalog.output(binding.type) == nullptr) {
      raise(Errc::catalog_miss, std::string("unknown ") + (is_sensor ? "sensor" : "output") +
                                    " type '" + binding.type + "' at pin " + binding.pin);
    }
    GeneratedCode code;
    code.digest_kind = kind;
    code.unit = manifest.node + ":" + binding.pin;
    std::ostringstream out;
    out << ";; hp unit: " << code.unit << " (" << (is_sensor ? "sensor " : "output ")
        << binding.type << ")\n";
    if (is_sensor) {
      out << "step 1: receive packet fields (encrypted_data, fhash, lp_ip, node_id, sequence, "
             "ach) from "
          << manifest.node << "\n";
    } else {
      out << "step 1: receive read-request fields (target id, requester id, signature, "
             "requester ip, ach) for "
          << binding.type << " at pin " << binding.pin << "\n";
    }
    out << "step 2: stamp the receipt time as the packet timestamp\n"
        << "step 3: extract the node's private key by node id; derive otk = H(H(private_key) + "
           "H(nonce))\n"
        << "step 4: compute khash = H(otk + prehash); decrypt payload with the shared key; "
           "compute dhash = H(payload)\n"
        << "step 5: check fhash == H(khash + dhash); accept on match, else discard and request "
           "retransmission\n"
        << "step 6: generate the prehash for the next packet and return it to the sender\n";
    code.rendered = out.str();
    code.code_hash = crypto::digest(kind, code.rendered);
    return code;
  };
  std::vector<GeneratedCode> units;
  units.reserve(manifest.sensors.size() + manifest.outputs.size());
  for (const Binding& b : manifest.sensors) units.push_back(pipeline(b, true));
  for (const Binding& b : manifest.outputs) units.push_back(pipeline(b, false));
  return units;
}

bool attest(const GeneratedCode& code, std::string_view observed) {
  return crypto::digest(code.digest_kind, observed) == code.code_hash;
}

std::vector<std::string> parse_packet_layout(const std::string& rendered) {
  std::vector<std::string> fields;
  std::istringstream in(rendered);
  std::string line;
  bool in_layout = false;
  while (std::getline(in, line)) {
    if (!in_layout) {
      if (line == kPacketLayoutHeader) in_layout = true;
      continue;
    }
    std::istringstream tokens(line);
    int index = 0;
    std::string name;
    if (!(tokens >> index >> name)) break;
    fields.push_back(name);
  }
  return fields;
}

}  // namespace canopy::codegen
