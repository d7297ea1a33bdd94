#include "textplace/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

namespace textplace::vlm {
namespace {

using nlohmann::json;

std::string fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string quoted(const std::string& s) { return json(s).dump(); }

}  // namespace

const char kPreambleVersion[] = "v1";
const char kPromptPreamble[] =
    "You are a graphic design assistant. The attached image shows a design "
    "canvas; the JSON lines below describe its elements in normalized "
    "coordinates (fractions of the canvas, origin top-left). One text element "
    "has null geometry: choose where it belongs. Reply with a single JSON "
    "object {\"left\":..,\"top\":..,\"width\":..,\"height\":..} with values "
    "in [0,1] and nothing else. [preamble v1]\n";

std::string canonical_record(const PromptRecord& r) {
  std::string out = "{\"type\":" + quoted(r.type) + ",\"text\":" + quoted(r.text);
  if (r.geometry) {
    out += ",\"left\":" + fixed6(r.geometry->left);
    out += ",\"top\":" + fixed6(r.geometry->top);
    out += ",\"width\":" + fixed6(r.geometry->width);
    out += ",\"height\":" + fixed6(r.geometry->height);
  } else {
    out += ",\"left\":null,\"top\":null,\"width\":null,\"height\":null";
  }
  return out + "}";
}

std::string canonical_response(const BBox& box) {
  return "{\"left\":" + fixed6(box.left) + ",\"top\":" + fixed6(box.top) +
         ",\"width\":" + fixed6(box.width) + ",\"height\":" + fixed6(box.height) +
         "}";
}

std::string PromptDocument::records_text() const {
  std::string out;
  for (const PromptRecord& r : records) {
    out += canonical_record(r);
    out += '\n';
  }
  return out;
}

PromptDocument serialize_prompt(const Layout& layout) {
  const auto violations = validate_layout(layout);
  if (!violations.empty())
    throw std::invalid_argument("invalid layout '" + layout.id +
                                "': " + violations.front().rule);

  std::vector<size_t> order;
  for (size_t i = 0; i < layout.elements.size(); ++i)
    if (static_cast<int>(i) != layout.target_index) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const BBox& ba = layout.elements[a].bbox;
    const BBox& bb = layout.elements[b].bbox;
    return std::tie(ba.top, ba.left, a) < std::tie(bb.top, bb.left, b);
  });

  PromptDocument doc;
  for (size_t i : order) {
    const Element& e = layout.elements[i];
    doc.records.push_back({to_string(e.kind),
                           e.kind == ElementKind::textElement ? e.text : "{blank}",
                           e.bbox});
  }
  const Element& target = layout.target();
  doc.records.push_back({to_string(target.kind), target.text, std::nullopt});
  doc.image = render_layout(layout, /*exclude_target=*/true, layout.canvas_width,
                            layout.canvas_height);
  return doc;
}

const char* to_string(ResponseStatus s) {
  switch (s) {
    case ResponseStatus::valid: return "valid";
    case ResponseStatus::invalid_format: return "invalid_format";
    case ResponseStatus::out_of_range_clamped: return "out_of_range_clamped";
  }
  return "invalid_format";
}

namespace {

// Extent of the balanced JSON object starting at raw[start] ('{'), or npos.
size_t balanced_end(const std::string& raw, size_t start) {
  int depth = 0;
  bool in_string = false, escaped = false;
  for (size_t i = start; i < raw.size(); ++i) {
    const char ch = raw[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (ch == '\\') escaped = true;
      else if (ch == '"') in_string = false;
      continue;
    }
    if (ch == '"') in_string = true;
    else if (ch == '{') ++depth;
    else if (ch == '}' && --depth == 0) return i;
  }
  return std::string::npos;
}

}  // namespace

PredictorResponse parse_response(const std::string& raw) {
  PredictorResponse resp;
  resp.raw = raw;
  static const char* kKeys[4] = {"left", "top", "width", "height"};

  for (size_t pos = raw.find('{'); pos != std::string::npos;
       pos = raw.find('{', pos + 1)) {
    const size_t end = balanced_end(raw, pos);
    if (end == std::string::npos) continue;
    const json obj = json::parse(raw.substr(pos, end - pos + 1), nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) continue;
    bool has_all = true;
    for (const char* k : kKeys) has_all = has_all && obj.contains(k);
    if (!has_all) continue;

    // First object with the full key set decides the outcome.
    double vals[4];
    for (int i = 0; i < 4; ++i) {
      const json& v = obj[kKeys[i]];
      if (!v.is_number() || !std::isfinite(v.get<double>())) return resp;
      vals[i] = v.get<double>();
    }
    bool clamped = false;
    for (double& v : vals) {
      const double c = std::clamp(v, 0.0, 1.0);
      clamped = clamped || c != v;
      v = c;
    }
    resp.parsed = BBox{vals[0], vals[1], vals[2], vals[3]};
    resp.status = clamped ? ResponseStatus::out_of_range_clamped
                          : ResponseStatus::valid;
    return resp;
  }
  return resp;
}

}  // namespace textplace::vlm
