#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace canopy::codegen {

struct Binding {
  std::string pin;
  std::string type;
  std::int64_t delay_ms = 1000;

  bool operator==(const Binding&) const = default;
};

struct NodeManifest {
  std::string node;   // node identifier/label
  std::string board;  // board type, catalog-keyed
  std::vector<Binding> sensors;
  std::vector<Binding> outputs;

  bool operator==(const NodeManifest&) const = default;
};

// Pins unique within the node, at least one binding. Throws invalid_argument.
void validate_manifest(const NodeManifest& manifest);

// Plain-text manifest, one node per file:
//   node <name>
//   board <board-type>
//   sensor <pin> <type> [delay <ms>]
//   output <pin> <type> [delay <ms>]
NodeManifest parse_manifest(std::string_view text, std::string_view origin);
NodeManifest load_manifest(const std::string& path);

}  // namespace canopy::codegen
