#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace textplace {

// Normalized rectangle in canvas-fraction units. left/top may lie outside
// [0,1] for boxes that bleed off-canvas; drawing clips, metrics do not.
struct BBox {
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;

  double right() const { return left + width; }
  double bottom() const { return top + height; }
  double center_x() const { return left + width / 2.0; }
  double center_y() const { return top + height / 2.0; }
  double area() const { return width * height; }
  bool finite() const;

  bool operator==(const BBox&) const = default;
};

enum class ElementKind {
  textElement,
  imageElement,
  maskElement,
  svgElement,
  coloredBackground,
};

const char* to_string(ElementKind kind);
std::optional<ElementKind> element_kind_from_string(const std::string& name);

struct Rgb {
  uint8_t r = 0;
  uint8_t g = 0;
  uint8_t b = 0;
  bool operator==(const Rgb&) const = default;
};

struct Raster {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // row-major RGB

  Raster() = default;
  Raster(int w, int h, Rgb fill = {255, 255, 255});

  Rgb get(int row, int col) const;
  void set(int row, int col, Rgb c);
  bool operator==(const Raster&) const = default;
};

struct Element {
  ElementKind kind = ElementKind::textElement;
  std::string text;
  int char_count = 0;  // non-newline characters
  int line_count = 0;  // 1 + newline count for text, 0 otherwise
  double angle = 0.0;  // degrees; stored but not rasterized
  Rgb color;
  int font_id = 0;  // index into font vocabulary, 0 = none/unknown
  BBox bbox;
  std::optional<Raster> raster;
};

int count_non_newline(const std::string& text);
int count_lines(const std::string& text);

// Fills in char_count/line_count from the text.
Element make_text_element(std::string text, BBox box, Rgb color,
                          int font_id = 0, double angle = 0.0);

struct Layout {
  std::string id;
  int canvas_width = 0;
  int canvas_height = 0;
  std::vector<Element> elements;  // bottom-to-top z-order
  int target_index = 0;

  const Element& target() const { return elements.at(static_cast<size_t>(target_index)); }
  int text_element_count() const;
};

struct Violation {
  int element_index = -1;  // -1 for layout-level rules
  std::string rule;
};

// Violations are data, not failures: an empty list means all invariants hold.
std::vector<Violation> validate_layout(const Layout& layout);

// A bbox covers pixel (r,c) iff the pixel center ((c+0.5)/W, (r+0.5)/H)
// lies inside [left, left+width) x [top, top+height).
bool bbox_covers_pixel(const BBox& box, int row, int col, int out_width, int out_height);

Raster render_layout(const Layout& layout, bool exclude_target,
                     int out_width, int out_height);
Raster render_element(const Element& element, int out_width, int out_height);

}  // namespace textplace
