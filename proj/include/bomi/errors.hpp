#pragma once

#include <stdexcept>
#include <string>

namespace bomi {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error reports.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define BOMI_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

BOMI_DEFINE_ERROR(DimensionMismatch);
BOMI_DEFINE_ERROR(DegenerateData);
BOMI_DEFINE_ERROR(RankDeficient);
BOMI_DEFINE_ERROR(InvalidConfig);
BOMI_DEFINE_ERROR(Diverged);
BOMI_DEFINE_ERROR(IoError);
BOMI_DEFINE_ERROR(SchemaVersionMismatch);
BOMI_DEFINE_ERROR(FitDiverged);
BOMI_DEFINE_ERROR(WindowTooLong);
BOMI_DEFINE_ERROR(ZeroTrueMapping);
BOMI_DEFINE_ERROR(EmptyGroup);

#undef BOMI_DEFINE_ERROR

}  // namespace bomi
