#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace m3l {

// Every failure mode gets its own code so callers (and the CLI exit-code
// table) can tell them apart.
enum class ErrorCode {
  io_open = 0,
  io_read,
  io_write,
  bad_magic,
  bad_version,
  truncated,
  zero_dims,
  dim_mismatch,
  row_count_mismatch,
  missing_bow,
  index_out_of_range,
  empty_corpus,
  empty_dataset,
  empty_input,
  config_unknown_key,
  config_bad_value,
  line_count_mismatch,
  view_not_found,
  arch_mismatch,
  bad_argument,
  parse_error,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace m3l
