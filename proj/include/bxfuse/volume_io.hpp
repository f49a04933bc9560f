#pragma once

// BVOL1 volume files: a 5-line ASCII header followed by raw little-endian
// 32-bit float voxels, x-fastest.
//
//   BVOL1
//   dims X Y Z
//   spacing SX SY SZ
//   origin OX OY OZ
//   dtype f32le
//   <payload: 4*X*Y*Z bytes>

#include <string>

#include "bxfuse/volume.hpp"

namespace bxfuse {

/// Throws FormatError (with byte offset) on malformed content and
/// DimensionMismatch when the header violates volume invariants.
Volume3D read_volume(const std::string& path);

/// Writes spacing/origin with enough digits to round-trip bit-exactly.
void write_volume(const Volume3D& v, const std::string& path);

}  // namespace bxfuse
