#pragma once

#include <stdexcept>
#include <string>

namespace mmt {

// All rejections carry a short machine-parsable category ("shape", "domain",
// "io", "config", "vocab", "data", "usage") plus a human diagnostic. The CLI
// prints them as "error: <category>: <message>".
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

[[noreturn]] inline void fail(const std::string& category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace mmt
