#include "textplace/layout.hpp"

#include <cmath>
#include <stdexcept>

namespace textplace {

bool BBox::finite() const {
  return std::isfinite(left) && std::isfinite(top) && std::isfinite(width) &&
         std::isfinite(height);
}

const char* to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::textElement: return "textElement";
    case ElementKind::imageElement: return "imageElement";
    case ElementKind::maskElement: return "maskElement";
    case ElementKind::svgElement: return "svgElement";
    case ElementKind::coloredBackground: return "coloredBackground";
  }
  return "unknown";
}

std::optional<ElementKind> element_kind_from_string(const std::string& name) {
  if (name == "textElement") return ElementKind::textElement;
  if (name == "imageElement") return ElementKind::imageElement;
  if (name == "maskElement") return ElementKind::maskElement;
  if (name == "svgElement") return ElementKind::svgElement;
  if (name == "coloredBackground") return ElementKind::coloredBackground;
  return std::nullopt;
}

Raster::Raster(int w, int h, Rgb fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw std::invalid_argument("invalid raster size");
  pixels.resize(static_cast<size_t>(w) * static_cast<size_t>(h) * 3);
  for (size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = fill.r;
    pixels[i + 1] = fill.g;
    pixels[i + 2] = fill.b;
  }
}

Rgb Raster::get(int row, int col) const {
  size_t off = (static_cast<size_t>(row) * width + col) * 3;
  return {pixels[off], pixels[off + 1], pixels[off + 2]};
}

void Raster::set(int row, int col, Rgb c) {
  size_t off = (static_cast<size_t>(row) * width + col) * 3;
  pixels[off] = c.r;
  pixels[off + 1] = c.g;
  pixels[off + 2] = c.b;
}

int count_non_newline(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c != '\n') ++n;
  return n;
}

int count_lines(const std::string& text) {
  int n = 1;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

Element make_text_element(std::string text, BBox box, Rgb color, int font_id,
                          double angle) {
  Element e;
  e.kind = ElementKind::textElement;
  e.char_count = count_non_newline(text);
  e.line_count = count_lines(text);
  e.text = std::move(text);
  e.bbox = box;
  e.color = color;
  e.font_id = font_id;
  e.angle = angle;
  return e;
}

int Layout::text_element_count() const {
  int n = 0;
  for (const auto& e : elements)
    if (e.kind == ElementKind::textElement) ++n;
  return n;
}

std::vector<Violation> validate_layout(const Layout& layout) {
  std::vector<Violation> out;
  if (layout.canvas_width <= 0 || layout.canvas_height <= 0)
    out.push_back({-1, "invalid canvas size"});
  if (layout.elements.empty()) {
    out.push_back({-1, "no elements"});
    return out;
  }
  if (layout.target_index < 0 ||
      layout.target_index >= static_cast<int>(layout.elements.size())) {
    out.push_back({-1, "target_index out of range"});
  } else if (layout.elements[static_cast<size_t>(layout.target_index)].kind !=
             ElementKind::textElement) {
    out.push_back({layout.target_index, "target not textElement"});
  }
  for (int i = 0; i < static_cast<int>(layout.elements.size()); ++i) {
    const Element& e = layout.elements[static_cast<size_t>(i)];
    if (!e.bbox.finite()) {
      out.push_back({i, "bbox not finite"});
    } else if (e.bbox.width < 0.0 || e.bbox.height < 0.0) {
      out.push_back({i, "negative bbox size"});
    }
    if (e.raster) {
      const Raster& r = *e.raster;
      if (r.width < 0 || r.height < 0 ||
          r.pixels.size() !=
              static_cast<size_t>(r.width) * static_cast<size_t>(r.height) * 3)
        out.push_back({i, "raster size mismatch"});
    }
    if (e.kind == ElementKind::textElement) {
      if (e.char_count != count_non_newline(e.text))
        out.push_back({i, "char_count mismatch"});
      if (e.line_count != count_lines(e.text))
        out.push_back({i, "line_count mismatch"});
    } else {
      if (!e.text.empty() || e.char_count != 0 || e.line_count != 0 ||
          e.font_id != 0)
        out.push_back({i, "non-text attributes not zeroed"});
    }
  }
  return out;
}

bool bbox_covers_pixel(const BBox& box, int row, int col, int out_width,
                       int out_height) {
  const double cx = (col + 0.5) / out_width;
  const double cy = (row + 0.5) / out_height;
  return cx >= box.left && cx < box.left + box.width && cy >= box.top &&
         cy < box.top + box.height;
}

namespace {

// Scaled nearest-neighbor sample of the element's source raster at a canvas
// position inside its bbox.
Rgb sample_source(const Raster& src, const BBox& box, double cx, double cy) {
  double sx = (cx - box.left) / box.width * src.width;
  double sy = (cy - box.top) / box.height * src.height;
  int col = static_cast<int>(std::floor(sx));
  int row = static_cast<int>(std::floor(sy));
  col = std::max(0, std::min(src.width - 1, col));
  row = std::max(0, std::min(src.height - 1, row));
  return src.get(row, col);
}

void draw_element(Raster& out, const Element& e) {
  const BBox& box = e.bbox;
  if (box.width <= 0.0 || box.height <= 0.0) return;
  const bool sample = e.raster && e.kind != ElementKind::textElement &&
                      e.kind != ElementKind::coloredBackground &&
                      e.raster->width > 0 && e.raster->height > 0;
  for (int r = 0; r < out.height; ++r) {
    const double cy = (r + 0.5) / out.height;
    if (cy < box.top || cy >= box.top + box.height) continue;
    for (int c = 0; c < out.width; ++c) {
      const double cx = (c + 0.5) / out.width;
      if (cx < box.left || cx >= box.left + box.width) continue;
      out.set(r, c, sample ? sample_source(*e.raster, box, cx, cy) : e.color);
    }
  }
}

}  // namespace

Raster render_layout(const Layout& layout, bool exclude_target, int out_width,
                     int out_height) {
  if (out_width <= 0 || out_height <= 0)
    throw std::invalid_argument("invalid raster size");
  Raster out(out_width, out_height);
  for (int i = 0; i < static_cast<int>(layout.elements.size()); ++i) {
    if (exclude_target && i == layout.target_index) continue;
    draw_element(out, layout.elements[static_cast<size_t>(i)]);
  }
  return out;
}

Raster render_element(const Element& element, int out_width, int out_height) {
  if (out_width <= 0 || out_height <= 0)
    throw std::invalid_argument("invalid raster size");
  Raster out(out_width, out_height);
  draw_element(out, element);
  return out;
}

}  // namespace textplace
