#pragma once

#include <stdexcept>
#include <string>

namespace une {

/// Base class for every error raised by the library. The CLI maps these to
/// exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define UNE_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

// latent_store
UNE_DEFINE_ERROR(FormatError);
UNE_DEFINE_ERROR(TruncationError);
UNE_DEFINE_ERROR(DataError);
UNE_DEFINE_ERROR(IoError);
UNE_DEFINE_ERROR(IndexError);
UNE_DEFINE_ERROR(ManifestError);
UNE_DEFINE_ERROR(ChecksumError);

// numerics
UNE_DEFINE_ERROR(InsufficientData);
UNE_DEFINE_ERROR(DegenerateSample);
UNE_DEFINE_ERROR(UnsupportedSampleSize);
UNE_DEFINE_ERROR(RankError);
UNE_DEFINE_ERROR(DegenerateLabels);
UNE_DEFINE_ERROR(AlignmentError);
UNE_DEFINE_ERROR(ShapeError);
UNE_DEFINE_ERROR(KeyError);
UNE_DEFINE_ERROR(DegenerateDirection);
UNE_DEFINE_ERROR(ConfigError);

#undef UNE_DEFINE_ERROR

}  // namespace une
