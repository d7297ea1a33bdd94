#pragma once

#include <string>
#include <vector>

#include "textplace/layout.hpp"

namespace textplace::data {

struct LoadResult {
  std::vector<Layout> layouts;
  int skipped_no_text = 0;  // records with no text element (paper's filter)
};

// JSON Lines, one layout per line:
// {"id","canvas_width","canvas_height","target_index","elements":[{"kind",
//  "text","left","top","width","height","angle","color":[r,g,b],"font_id",
//  "raster_path"?}]}
// raster_path resolves relative to the dataset file; rasters are PPM.
// Malformed lines, unknown kinds, and invariant violations fail with the line
// number; records without any text element are skipped and counted.
LoadResult load_dataset(const std::string& path);

// Writes JSONL next to element rasters in "<path>.rasters/". Loading the
// result reproduces the layouts structurally, rasters included.
void save_dataset(const std::vector<Layout>& layouts, const std::string& path);

struct SplitSpec {
  std::vector<Layout> single_text;    // exactly one text element
  std::vector<Layout> multiple_text;  // two or more
};

SplitSpec split_by_text_count(const std::vector<Layout>& layouts);

}  // namespace textplace::data
