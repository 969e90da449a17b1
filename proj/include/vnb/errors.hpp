#pragma once

#include <stdexcept>
#include <string>

namespace vnb {

// Error taxonomy mirrors the process exit contract:
//   config_error -> 1, data_error -> 2, numeric_error -> 3.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace vnb
