#pragma once

#include <cstdint>
#include <vector>

#include "textplace/layout.hpp"

namespace textplace::data {

struct SynthConfig {
  int count = 100;
  uint64_t seed = 1;
  int canvas_px = 256;
  int min_contexts = 1;  // non-background context elements
  int max_contexts = 4;
  bool container_mode = false;
  double min_text_size = 0.10;  // target box side, canvas fraction
  double max_text_size = 0.30;
  int font_vocab = 8;
};

// Seeded layouts on a 3x3 placement grid: a full-canvas coloredBackground,
// contexts in distinct cells (so decorative contexts never overlap the
// target), and one target text element.
//
// container_mode: contexts are same-kind rectangles drawn from one geometry
// sampler; exactly one (the container) has a bright raster, the decoys dark
// ones, and the target is centered inside the container — appearance, not
// geometry, says where the text belongs. Otherwise the target goes to the
// empty cell farthest from all contexts.
std::vector<Layout> generate_synthetic(const SynthConfig& cfg);

}  // namespace textplace::data
