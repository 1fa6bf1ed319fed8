#pragma once

#include <stdexcept>
#include <string>

namespace emo {

// Every failure the engine reports carries a stable class name so the CLI can
// print it and tests can match on it.
class Error : public std::runtime_error {
 public:
  Error(const char* kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  const char* kind() const noexcept { return kind_; }

 private:
  const char* kind_;
};

#define EMO_DEFINE_ERROR(Name)                                     \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

EMO_DEFINE_ERROR(InvalidInput)
EMO_DEFINE_ERROR(InvalidSpec)
EMO_DEFINE_ERROR(InvalidConfig)
EMO_DEFINE_ERROR(InvalidLabel)
EMO_DEFINE_ERROR(InvalidAlignment)
EMO_DEFINE_ERROR(ShapeError)
EMO_DEFINE_ERROR(FormatError)
EMO_DEFINE_ERROR(MissingData)
EMO_DEFINE_ERROR(UsageError)

#undef EMO_DEFINE_ERROR

}  // namespace emo
