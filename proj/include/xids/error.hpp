#pragma once

#include <stdexcept>
#include <string>

namespace xids {

// Base of every error raised by the library. `kind()` is a stable tag used in
// CLI diagnostics and HTTP payloads.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define XIDS_DEFINE_ERROR(Name)                                  \
  class Name : public ::xids::Error {                            \
   public:                                                       \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

XIDS_DEFINE_ERROR(ShapeMismatch);
XIDS_DEFINE_ERROR(IoError);
XIDS_DEFINE_ERROR(FormatError);

}  // namespace xids
