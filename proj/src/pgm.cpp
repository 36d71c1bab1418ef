#include "acsc/pgm.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

namespace acsc {

namespace {

// Advances past whitespace and '#' comment lines, then parses one integer.
bool next_int(const std::string& bytes, std::size_t& pos, long& out) {
  while (pos < bytes.size()) {
    const unsigned char c = bytes[pos];
    if (std::isspace(c)) {
      ++pos;
    } else if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
    return false;
  long v = 0;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    v = v * 10 + (bytes[pos] - '0');
    ++pos;
  }
  out = v;
  return true;
}

}  // namespace

Image read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_pgm: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw FormatError("read_pgm: not a binary PGM (P5): " + path);
  std::size_t pos = 2;
  long width = 0, height = 0, maxval = 0;
  if (!next_int(bytes, pos, width) || !next_int(bytes, pos, height) ||
      !next_int(bytes, pos, maxval))
    throw FormatError("read_pgm: malformed header: " + path);
  if (width <= 0 || height <= 0) throw FormatError("read_pgm: bad dimensions: " + path);
  if (maxval != 255) throw FormatError("read_pgm: only maxval 255 is supported: " + path);
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw FormatError("read_pgm: missing pixel separator: " + path);
  ++pos;

  const std::size_t need = static_cast<std::size_t>(width) * height;
  if (bytes.size() - pos < need) throw CorruptionError("read_pgm: truncated pixels: " + path);

  Image out(static_cast<int>(height), static_cast<int>(width), 1);
  for (std::size_t i = 0; i < need; ++i)
    out.data[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  return out;
}

void write_pgm(const Image& x, const std::string& path) {
  if (x.channels != 1) throw ShapeError("write_pgm: single-channel images only");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("write_pgm: cannot open " + path);
  f << "P5\n" << x.width << ' ' << x.height << "\n255\n";
  std::string pixels(x.data.size(), '\0');
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double v = std::min(1.0, std::max(0.0, x.data[i]));
    pixels[i] = static_cast<char>(std::lround(v * 255.0));
  }
  f.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  if (!f) throw IoError("write_pgm: write failed for " + path);
}

}  // namespace acsc
