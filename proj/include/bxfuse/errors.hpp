#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bxfuse {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two images (or an image and a mask) share no valid voxels.
class EmptyOverlap : public Error {
 public:
  using Error::Error;
};

/// An intensity image is constant where a contrast-dependent measure needs variation.
class DegenerateImage : public Error {
 public:
  using Error::Error;
};

/// Point configuration does not determine a unique rigid transform.
class DegenerateConfiguration : public Error {
 public:
  using Error::Error;
};

/// A box with non-positive extent on some axis.
class DegenerateBox : public Error {
 public:
  using Error::Error;
};

/// A zero-length needle segment where a direction is required.
class DegenerateSegment : public Error {
 public:
  using Error::Error;
};

/// An operation over an empty list that needs at least one element.
class EmptyInput : public Error {
 public:
  using Error::Error;
};

/// Invalid generator or session configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content; carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}
  std::size_t byte_offset() const { return offset_; }

 private:
  std::size_t offset_ = 0;
};

/// Volume dimensions violate an invariant (zero or too small).
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A trajectory references a volume with no successful registration.
class MissingTransform : public Error {
 public:
  using Error::Error;
};

}  // namespace bxfuse
