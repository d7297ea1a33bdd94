#include "textplace/ppm.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace textplace {

std::string encode_ppm(const Raster& raster) {
  if (raster.width <= 0 || raster.height <= 0)
    throw std::invalid_argument("invalid raster size");
  char header[64];
  std::snprintf(header, sizeof(header), "P6\n%d %d\n255\n", raster.width,
                raster.height);
  std::string out(header);
  out.append(reinterpret_cast<const char*>(raster.pixels.data()),
             raster.pixels.size());
  return out;
}

Raster decode_ppm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw std::runtime_error("not a P6 ppm");
  int w = 0, h = 0, maxval = 0;
  in >> w >> h >> maxval;
  if (!in || w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("bad ppm header");
  in.get();  // single whitespace after maxval
  Raster r(w, h);
  in.read(reinterpret_cast<char*>(r.pixels.data()),
          static_cast<std::streamsize>(r.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(r.pixels.size()))
    throw std::runtime_error("truncated ppm payload");
  return r;
}

void write_ppm(const std::string& path, const Raster& raster) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  const std::string bytes = encode_ppm(raster);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Raster read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_ppm(buf.str());
}

}  // namespace textplace
