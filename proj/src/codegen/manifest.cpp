#include "canopy/codegen/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "canopy/error.hpp"

namespace canopy::codegen {

void validate_manifest(const NodeManifest& manifest) {
  if (manifest.node.empty()) raise(Errc::invalid_argument, "manifest has no node name");
  if (manifest.board.empty()) raise(Errc::invalid_argument, "manifest has no board type");
  if (manifest.sensors.empty() && manifest.outputs.empty()) {
    raise(Errc::invalid_argument, "manifest needs at least one sensor or output");
  }
  std::set<std::string> pins;
  auto check = [&](const Binding& binding) {
    if (binding.pin.empty()) raise(Errc::invalid_argument, "binding with empty pin");
    if (binding.type.empty()) raise(Errc::invalid_argument, "binding with empty type");
    if (!pins.insert(binding.pin).second) {
      raise(Errc::invalid_argument, "duplicate pin '" + binding.pin + "'");
    }
  };
  for (const Binding& s : manifest.sensors) check(s);
  for (const Binding& o : manifest.outputs) check(o);
}

NodeManifest parse_manifest(std::string_view text, std::string_view origin) {
  NodeManifest manifest;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    raise(Errc::config_error, std::string(origin) + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string keyword;
    if (!(fields >> keyword)) continue;
    if (keyword == "node") {
      if (!(fields >> manifest.node)) fail("expected node name");
    } else if (keyword == "board") {
      if (!(fields >> manifest.board)) fail("expected board type");
    } else if (keyword == "sensor" || keyword == "output") {
      Binding binding;
      if (!(fields >> binding.pin >> binding.type)) fail("expected '<pin> <type>'");
      std::string tail;
      if (fields >> tail) {
        if (tail != "delay") fail("unexpected token '" + tail + "'");
        if (!(fields >> binding.delay_ms) || binding.delay_ms < 0) fail("bad delay value");
      }
      (keyword == "sensor" ? manifest.sensors : manifest.outputs).push_back(std::move(binding));
    } else {
      fail("unknown keyword '" + keyword + "'");
    }
  }
  try {
    validate_manifest(manifest);
  } catch (const Error& e) {
    raise(Errc::config_error, std::string(origin) + ": " + e.what());
  }
  return manifest;
}

NodeManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::io_error, "cannot read manifest " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_manifest(text, path);
}

}  // namespace canopy::codegen
