#pragma once

#include <stdexcept>
#include <string>

namespace canopy {

enum class Errc {
  invalid_argument,
  key_exchange_failure,
  key_epoch_mismatch,
  decode_failure,
  config_error,
  catalog_miss,
  total_conflict,
  insufficient_neighbors,
  no_data,
  no_ach_entry,
  chain_corrupt,
  sync_refused,
  not_owner,
  io_error,
  schema_mismatch,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace canopy
