#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "canopy/bytes.hpp"

namespace canopy::ledger {

struct KeyEvent {
  enum class Kind { added, removed };
  Kind kind;
  std::string node_id;
  Bytes public_key;  // empty for removals
  std::uint64_t height = 0;
};

// Active key set plus the append-only add/remove log it is the fold of.
class KeyList {
 public:
  bool contains(const std::string& node_id) const;
  const Bytes* find(const std::string& node_id) const;
  std::size_t size() const { return active_.size(); }

  void add(std::string node_id, Bytes public_key, std::uint64_t height);
  void remove(const std::string& node_id, std::uint64_t height);

  const std::map<std::string, Bytes>& active() const { return active_; }
  const std::vector<KeyEvent>& history() const { return history_; }

  static std::map<std::string, Bytes> replay(const std::vector<KeyEvent>& history);

 private:
  std::map<std::string, Bytes> active_;
  std::vector<KeyEvent> history_;
};

}  // namespace canopy::ledger
