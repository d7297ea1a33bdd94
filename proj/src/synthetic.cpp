#include "textplace/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "textplace/rng.hpp"

namespace textplace::data {
namespace {

constexpr double kCell = 1.0 / 3.0;
constexpr double kCellMargin = 0.015;

const char* kWords[] = {"Make",  "SALE",   "Hello",  "Summer", "Enjoy",
                        "Party", "Fresh",  "Travel", "Coffee", "Music",
                        "Today", "Bright", "Offer",  "Story",  "Design",
                        "Lunch", "Beach",  "Night",  "Smile",  "Free"};

const Rgb kBackgrounds[] = {{246, 241, 231}, {230, 240, 250}, {240, 233, 244},
                            {235, 245, 235}, {250, 236, 230}};
const Rgb kInkColors[] = {{30, 30, 34}, {60, 30, 30}, {24, 48, 72}, {40, 56, 32}};
const Rgb kShapeColors[] = {{214, 120, 96}, {120, 164, 210}, {150, 190, 140},
                            {226, 188, 98}, {160, 130, 190}};

template <typename T, size_t N>
const T& pick(const T (&arr)[N], Rng& rng) {
  return arr[rng.uniform_int(N)];
}

Raster noise_texture(Rng& rng, double base, double spread) {
  Raster r(8, 8);
  for (int row = 0; row < 8; ++row)
    for (int col = 0; col < 8; ++col) {
      auto channel = [&] {
        const double v = base + rng.uniform(-spread, spread);
        return static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
      };
      r.set(row, col, {channel(), channel(), channel()});
    }
  return r;
}

BBox cell_rect(int cell) {
  const int row = cell / 3, col = cell % 3;
  return {col * kCell + kCellMargin, row * kCell + kCellMargin,
          kCell - 2 * kCellMargin, kCell - 2 * kCellMargin};
}

// Random box inside the cell, side 50-95% of the cell.
BBox sample_in_cell(int cell, Rng& rng) {
  const BBox c = cell_rect(cell);
  const double w = c.width * rng.uniform(0.5, 0.95);
  const double h = c.height * rng.uniform(0.5, 0.95);
  return {c.left + rng.uniform(0.0, c.width - w),
          c.top + rng.uniform(0.0, c.height - h), w, h};
}

std::vector<int> shuffled_cells(Rng& rng) {
  std::vector<int> cells{0, 1, 2, 3, 4, 5, 6, 7, 8};
  for (size_t i = cells.size(); i > 1; --i)
    std::swap(cells[i - 1], cells[rng.uniform_int(i)]);
  return cells;
}

Element make_context(ElementKind kind, const BBox& box, Rng& rng) {
  Element e;
  e.kind = kind;
  e.bbox = box;
  switch (kind) {
    case ElementKind::textElement:
      e = make_text_element(pick(kWords, rng), box, pick(kInkColors, rng),
                            static_cast<int>(rng.uniform_int(4)));
      break;
    case ElementKind::imageElement:
    case ElementKind::maskElement:
      e.raster = noise_texture(rng, rng.uniform(90.0, 200.0), 25.0);
      break;
    case ElementKind::svgElement:
    case ElementKind::coloredBackground:
      e.color = pick(kShapeColors, rng);
      break;
  }
  return e;
}

Layout container_layout(const SynthConfig& cfg, Rng& rng, int index) {
  Layout layout;
  layout.id = "cont-" + std::to_string(cfg.seed) + "-" + std::to_string(index);
  layout.canvas_width = layout.canvas_height = cfg.canvas_px;

  Element bg;
  bg.kind = ElementKind::coloredBackground;
  bg.bbox = {0.0, 0.0, 1.0, 1.0};
  bg.color = pick(kBackgrounds, rng);
  layout.elements.push_back(bg);

  const int n = std::max(2, cfg.min_contexts +
                                static_cast<int>(rng.uniform_int(
                                    size_t(cfg.max_contexts - cfg.min_contexts + 1))));
  const std::vector<int> cells = shuffled_cells(rng);
  // One geometry sampler for container and decoys: only the raster says which
  // is which.
  BBox container_box;
  for (int i = 0; i < n; ++i) {
    Element e;
    e.kind = ElementKind::imageElement;
    e.bbox = sample_in_cell(cells[static_cast<size_t>(i)], rng);
    const bool is_container = i == 0;
    e.raster = is_container ? noise_texture(rng, rng.uniform(228.0, 244.0), 6.0)
                            : noise_texture(rng, rng.uniform(25.0, 85.0), 6.0);
    if (is_container) container_box = e.bbox;
    layout.elements.push_back(e);
  }

  const double w = container_box.width * rng.uniform(0.55, 0.8);
  const double h = container_box.height * rng.uniform(0.55, 0.8);
  const BBox target_box{container_box.center_x() - w / 2.0,
                        container_box.center_y() - h / 2.0, w, h};
  layout.elements.push_back(make_text_element(
      pick(kWords, rng), target_box, pick(kInkColors, rng),
      static_cast<int>(rng.uniform_int(size_t(cfg.font_vocab)))));
  layout.target_index = static_cast<int>(layout.elements.size()) - 1;
  return layout;
}

Layout scatter_layout(const SynthConfig& cfg, Rng& rng, int index) {
  Layout layout;
  layout.id = "synth-" + std::to_string(cfg.seed) + "-" + std::to_string(index);
  layout.canvas_width = layout.canvas_height = cfg.canvas_px;

  Element bg;
  bg.kind = ElementKind::coloredBackground;
  bg.bbox = {0.0, 0.0, 1.0, 1.0};
  bg.color = pick(kBackgrounds, rng);
  layout.elements.push_back(bg);

  const int n = cfg.min_contexts +
                static_cast<int>(rng.uniform_int(
                    size_t(cfg.max_contexts - cfg.min_contexts + 1)));
  const std::vector<int> cells = shuffled_cells(rng);
  static const ElementKind kContextKinds[] = {
      ElementKind::imageElement, ElementKind::maskElement,
      ElementKind::svgElement, ElementKind::textElement};
  for (int i = 0; i < n; ++i)
    layout.elements.push_back(make_context(
        kContextKinds[rng.uniform_int(4)],
        sample_in_cell(cells[static_cast<size_t>(i)], rng), rng));

  // Farthest empty cell from every context center, ties to the lowest index.
  int best_cell = cells[static_cast<size_t>(n)];
  double best_dist = -1.0;
  for (size_t k = static_cast<size_t>(n); k < cells.size(); ++k) {
    const BBox cr = cell_rect(cells[k]);
    double nearest = 1e9;
    for (int i = 0; i < n; ++i) {
      const BBox& cb = layout.elements[static_cast<size_t>(i) + 1].bbox;
      nearest = std::min(nearest, std::hypot(cr.center_x() - cb.center_x(),
                                             cr.center_y() - cb.center_y()));
    }
    if (nearest > best_dist ||
        (nearest == best_dist && cells[k] < best_cell)) {
      best_dist = nearest;
      best_cell = cells[k];
    }
  }

  const BBox cr = cell_rect(best_cell);
  const double w =
      std::min(rng.uniform(cfg.min_text_size, cfg.max_text_size), cr.width);
  const double h =
      std::min(rng.uniform(cfg.min_text_size, cfg.max_text_size), cr.height);
  const BBox target_box{cr.left + (cr.width - w) / 2.0,
                        cr.top + (cr.height - h) / 2.0, w, h};
  layout.elements.push_back(make_text_element(
      pick(kWords, rng), target_box, pick(kInkColors, rng),
      static_cast<int>(rng.uniform_int(size_t(cfg.font_vocab)))));
  layout.target_index = static_cast<int>(layout.elements.size()) - 1;
  return layout;
}

}  // namespace

std::vector<Layout> generate_synthetic(const SynthConfig& cfg) {
  if (cfg.count < 0 || cfg.canvas_px <= 0 || cfg.font_vocab <= 0 ||
      cfg.min_contexts < 0 || cfg.max_contexts < cfg.min_contexts ||
      cfg.max_contexts > 6 || cfg.min_text_size <= 0.0 ||
      cfg.max_text_size < cfg.min_text_size || cfg.max_text_size > 1.0)
    throw std::invalid_argument("infeasible config");

  Rng rng(cfg.seed);
  std::vector<Layout> out;
  out.reserve(static_cast<size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i)
    out.push_back(cfg.container_mode ? container_layout(cfg, rng, i)
                                     : scatter_layout(cfg, rng, i));
  return out;
}

}  // namespace textplace::data
