#pragma once

#include <string>

#include "textplace/layout.hpp"

namespace textplace {

// Binary PPM (P6), header "P6\n<w> <h>\n255\n" followed by RGB bytes.
std::string encode_ppm(const Raster& raster);
Raster decode_ppm(const std::string& bytes);

void write_ppm(const std::string& path, const Raster& raster);
Raster read_ppm(const std::string& path);

}  // namespace textplace
