#include "textplace/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "textplace/ppm.hpp"

namespace textplace::data {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void fail(const std::string& path, int line, const std::string& why) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + why);
}

Element element_from_json(const json& j, const fs::path& base,
                          const std::string& path, int line) {
  Element e;
  const std::string kind_name = j.value("kind", "");
  const auto kind = element_kind_from_string(kind_name);
  if (!kind) fail(path, line, "unknown kind '" + kind_name + "'");
  e.kind = *kind;
  e.text = j.value("text", "");
  e.bbox.left = j.value("left", 0.0);
  e.bbox.top = j.value("top", 0.0);
  e.bbox.width = j.value("width", 0.0);
  e.bbox.height = j.value("height", 0.0);
  e.angle = j.value("angle", 0.0);
  if (j.contains("color")) {
    const json& c = j["color"];
    if (!c.is_array() || c.size() != 3) fail(path, line, "color must be [r,g,b]");
    e.color = {c[0].get<uint8_t>(), c[1].get<uint8_t>(), c[2].get<uint8_t>()};
  }
  e.font_id = j.value("font_id", 0);
  if (e.kind == ElementKind::textElement) {
    e.char_count = count_non_newline(e.text);
    e.line_count = count_lines(e.text);
  }
  if (j.contains("raster_path")) {
    const fs::path rp = base / j["raster_path"].get<std::string>();
    try {
      e.raster = read_ppm(rp.string());
    } catch (const std::exception& ex) {
      fail(path, line, ex.what());
    }
  }
  return e;
}

json element_to_json(const Element& e, const std::string& raster_rel) {
  json j = {{"kind", to_string(e.kind)},
            {"text", e.text},
            {"left", e.bbox.left},
            {"top", e.bbox.top},
            {"width", e.bbox.width},
            {"height", e.bbox.height},
            {"angle", e.angle},
            {"color", {e.color.r, e.color.g, e.color.b}},
            {"font_id", e.font_id}};
  if (!raster_rel.empty()) j["raster_path"] = raster_rel;
  return j;
}

}  // namespace

LoadResult load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const fs::path base = fs::path(path).parent_path();

  LoadResult result;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(path, line_no, "malformed JSON");

    Layout layout;
    layout.id = j.value("id", "");
    layout.canvas_width = j.value("canvas_width", 0);
    layout.canvas_height = j.value("canvas_height", 0);
    layout.target_index = j.value("target_index", 0);
    if (!j.contains("elements") || !j["elements"].is_array())
      fail(path, line_no, "missing elements array");
    for (const json& ej : j["elements"])
      layout.elements.push_back(element_from_json(ej, base, path, line_no));

    if (layout.text_element_count() == 0) {
      ++result.skipped_no_text;
      continue;
    }
    const auto violations = validate_layout(layout);
    if (!violations.empty())
      fail(path, line_no, "invalid layout: " + violations.front().rule);
    result.layouts.push_back(std::move(layout));
  }
  return result;
}

void save_dataset(const std::vector<Layout>& layouts, const std::string& path) {
  const fs::path raster_dir = fs::path(path).concat(".rasters");
  bool raster_dir_made = false;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const Layout& layout : layouts) {
    json j = {{"id", layout.id},
              {"canvas_width", layout.canvas_width},
              {"canvas_height", layout.canvas_height},
              {"target_index", layout.target_index}};
    json elems = json::array();
    for (size_t i = 0; i < layout.elements.size(); ++i) {
      const Element& e = layout.elements[i];
      std::string rel;
      if (e.raster) {
        if (!raster_dir_made) {
          std::filesystem::create_directories(raster_dir);
          raster_dir_made = true;
        }
        rel = raster_dir.filename().string() + "/" + layout.id + "_" +
              std::to_string(i) + ".ppm";
        write_ppm((fs::path(path).parent_path() / rel).string(), *e.raster);
      }
      elems.push_back(element_to_json(e, rel));
    }
    j["elements"] = std::move(elems);
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("cannot write " + path);
}

SplitSpec split_by_text_count(const std::vector<Layout>& layouts) {
  SplitSpec split;
  for (const Layout& l : layouts)
    (l.text_element_count() == 1 ? split.single_text : split.multiple_text)
        .push_back(l);
  return split;
}

}  // namespace textplace::data
