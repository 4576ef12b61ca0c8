#include "canopy/ledger/keylist.hpp"

#include "canopy/error.hpp"

namespace canopy::ledger {

bool KeyList::contains(const std::string& node_id) const { return active_.count(node_id) > 0; }

const Bytes* KeyList::find(const std::string& node_id) const {
  auto it = active_.find(node_id);
  return it == active_.end() ? nullptr : &it->second;
}

void KeyList::add(std::string node_id, Bytes public_key, std::uint64_t height) {
  if (contains(node_id)) raise(Errc::invalid_argument, "key already active: " + node_id);
  history_.push_back(KeyEvent{KeyEvent::Kind::added, node_id, public_key, height});
  active_.emplace(std::move(node_id), std::move(public_key));
}

void KeyList::remove(const std::string& node_id, std::uint64_t height) {
  auto it = active_.find(node_id);
  if (it == active_.end()) raise(Errc::invalid_argument, "key not active: " + node_id);
  history_.push_back(KeyEvent{KeyEvent::Kind::removed, node_id, {}, height});
  active_.erase(it);
}

std::map<std::string, Bytes> KeyList::replay(const std::vector<KeyEvent>& history) {
  std::map<std::string, Bytes> active;
  for (const KeyEvent& event : history) {
    if (event.kind == KeyEvent::Kind::added) {
      active[event.node_id] = event.public_key;
    } else {
      active.erase(event.node_id);
    }
  }
  return active;
}

}  // namespace canopy::ledger
