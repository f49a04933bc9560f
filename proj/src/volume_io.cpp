#include "bxfuse/volume_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bxfuse/errors.hpp"

namespace bxfuse {

namespace {

static_assert(std::endian::native == std::endian::little,
              "BVOL1 io assumes a little-endian host");

/// Read one \n-terminated header line; offset tracks the file position.
std::string read_line(std::istream& in, std::size_t& offset) {
  std::string line;
  char c;
  while (in.get(c)) {
    ++offset;
    if (c == '\n') return line;
    line.push_back(c);
  }
  throw FormatError("unexpected end of header", offset);
}

}  // namespace

Volume3D read_volume(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file: " + path, 0);

  std::size_t offset = 0;
  const std::string magic = read_line(in, offset);
  if (magic != "BVOL1") throw FormatError("bad magic, expected BVOL1", 0);

  std::size_t line_start = offset;
  std::string line = read_line(in, offset);
  long long dx = 0, dy = 0, dz = 0;
  if (std::sscanf(line.c_str(), "dims %lld %lld %lld", &dx, &dy, &dz) != 3)
    throw FormatError("bad dims line", line_start);
  if (dx < 2 || dy < 2 || dz < 2 || dx * dy * dz > (1LL << 31))
    throw DimensionMismatch("dims must be >= 2 per axis (and fit in memory), got " +
                            line);

  line_start = offset;
  line = read_line(in, offset);
  Vec3 spacing;
  if (std::sscanf(line.c_str(), "spacing %lf %lf %lf", &spacing.x, &spacing.y,
                  &spacing.z) != 3)
    throw FormatError("bad spacing line", line_start);

  line_start = offset;
  line = read_line(in, offset);
  Vec3 origin;
  if (std::sscanf(line.c_str(), "origin %lf %lf %lf", &origin.x, &origin.y,
                  &origin.z) != 3)
    throw FormatError("bad origin line", line_start);

  line_start = offset;
  line = read_line(in, offset);
  if (line != "dtype f32le") throw FormatError("unsupported dtype: " + line, line_start);

  Volume3D v;
  try {
    v = Volume3D({static_cast<int>(dx), static_cast<int>(dy), static_cast<int>(dz)},
                 spacing, origin);
  } catch (const DimensionMismatch&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("bad geometry: ") + e.what(), line_start);
  }

  const std::size_t payload = v.voxel_count() * sizeof(float);
  in.read(reinterpret_cast<char*>(v.data.data()),
          static_cast<std::streamsize>(payload));
  const std::size_t got = static_cast<std::size_t>(in.gcount());
  if (got != payload)
    throw FormatError("truncated payload: expected " + std::to_string(payload) +
                          " bytes, got " + std::to_string(got),
                      offset + got);
  char extra;
  if (in.get(extra))
    throw FormatError("trailing bytes after payload", offset + payload);

  for (std::size_t i = 0; i < v.data.size(); ++i) {
    if (!std::isfinite(v.data[i]))
      throw FormatError("non-finite intensity", offset + i * sizeof(float));
  }
  return v;
}

void write_volume(const Volume3D& v, const std::string& path) {
  v.validate_geometry();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open file for writing: " + path);

  std::ostringstream header;
  char buf[256];
  header << "BVOL1\n";
  std::snprintf(buf, sizeof buf, "dims %d %d %d\n", v.dims[0], v.dims[1], v.dims[2]);
  header << buf;
  std::snprintf(buf, sizeof buf, "spacing %.17g %.17g %.17g\n", v.spacing.x,
                v.spacing.y, v.spacing.z);
  header << buf;
  std::snprintf(buf, sizeof buf, "origin %.17g %.17g %.17g\n", v.origin.x,
                v.origin.y, v.origin.z);
  header << buf;
  header << "dtype f32le\n";
  out << header.str();
  out.write(reinterpret_cast<const char*>(v.data.data()),
            static_cast<std::streamsize>(v.data.size() * sizeof(float)));
  if (!out) throw Error("write failed: " + path);
}

}  // namespace bxfuse
