#pragma once

#include <optional>
#include <string>
#include <vector>

#include "textplace/layout.hpp"

namespace textplace::vlm {

// One line of the structured prompt. Canonical rendering has the fixed key
// order {type, text, left, top, width, height}, numbers as 6-decimal
// fractions, and null geometry only on the target record.
struct PromptRecord {
  std::string type;
  std::string text;  // "{blank}" for non-text elements
  std::optional<BBox> geometry;  // nullopt = target
};

struct PromptDocument {
  std::vector<PromptRecord> records;  // contexts sorted, target last
  Raster image;                       // whole layout with the target removed

  // Canonical records, one JSON object per line, trailing newline.
  std::string records_text() const;
};

std::string canonical_record(const PromptRecord& r);

// Canonical reply shape, used by mocks and round-trip tests.
std::string canonical_response(const BBox& box);

// Instruction text sent ahead of the records; versioned so transcripts can be
// compared across runs.
extern const char kPreambleVersion[];
extern const char kPromptPreamble[];

// Contexts sorted ascending by (top, left, original index); target last with
// null geometry; image rendered at the layout's canvas size sans target.
PromptDocument serialize_prompt(const Layout& layout);

enum class ResponseStatus { valid, invalid_format, out_of_range_clamped };

const char* to_string(ResponseStatus s);

struct PredictorResponse {
  std::string raw;
  std::optional<BBox> parsed;
  ResponseStatus status = ResponseStatus::invalid_format;
  double latency_seconds = 0.0;
  int retries = 0;
};

// Finds the first balanced JSON object carrying all of left/top/width/height,
// tolerating surrounding prose and code fences. All-numeric values in [0,1]
// are valid; out-of-range values are clamped componentwise and flagged;
// everything else is invalid_format. Never throws.
PredictorResponse parse_response(const std::string& raw);

}  // namespace textplace::vlm
