#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "textplace/prompt.hpp"
#include "textplace/rng.hpp"

using namespace textplace;
using namespace textplace::vlm;
using testsupport::colored_element;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string golden(const char* name) {
  return read_file(std::string(TEXTPLACE_TEST_DIR) + "/golden/" + name);
}

Layout make_example() {
  Layout l;
  l.id = "make";
  l.canvas_width = l.canvas_height = 32;
  l.elements.push_back(colored_element(ElementKind::imageElement, {0, 0, 1, 1},
                                       {180, 170, 150}));
  l.elements.push_back(make_text_element("Make", {0.3, 0.4, 0.4, 0.2}, {20, 20, 20}));
  l.target_index = 1;
  return l;
}

Layout solo_example() {
  Layout l;
  l.id = "solo";
  l.canvas_width = l.canvas_height = 16;
  l.elements.push_back(
      make_text_element("Say \"hi\"\nnow", {0.1, 0.1, 0.5, 0.3}, {0, 0, 0}));
  l.target_index = 0;
  return l;
}

Layout sorted_example() {
  Layout l;
  l.id = "sorted";
  l.canvas_width = l.canvas_height = 40;
  l.elements.push_back(colored_element(ElementKind::coloredBackground,
                                       {0, 0, 1, 1}, {250, 250, 245}));
  l.elements.push_back(colored_element(ElementKind::svgElement,
                                       {0.2, 0.5, 0.3, 0.2}, {10, 90, 40}));
  l.elements.push_back(colored_element(ElementKind::maskElement,
                                       {0.1, 0.5, 0.2, 0.25}, {60, 60, 60}));
  l.elements.push_back(colored_element(ElementKind::imageElement,
                                       {0.7, 0.2, 0.15, 0.1}, {120, 30, 30}));
  l.elements.push_back(
      make_text_element("Offer", {0.4, 0.05, 0.2, 0.1}, {0, 0, 0}));
  l.target_index = 4;
  return l;
}

}  // namespace

TEST_CASE("canonical record rendering") {
  CHECK(canonical_record({"imageElement", "{blank}", BBox{0, 0, 1, 1}}) ==
        "{\"type\":\"imageElement\",\"text\":\"{blank}\","
        "\"left\":0.000000,\"top\":0.000000,\"width\":1.000000,\"height\":1.000000}");
  CHECK(canonical_record({"textElement", "Make", std::nullopt}) ==
        "{\"type\":\"textElement\",\"text\":\"Make\","
        "\"left\":null,\"top\":null,\"width\":null,\"height\":null}");
  // JSON escaping goes through for quotes and control characters.
  CHECK(canonical_record({"textElement", "a\"b\nc", std::nullopt}) ==
        "{\"type\":\"textElement\",\"text\":\"a\\\"b\\nc\","
        "\"left\":null,\"top\":null,\"width\":null,\"height\":null}");
  CHECK(canonical_response({0.1, 0.2, 0.3, 0.4}) ==
        "{\"left\":0.100000,\"top\":0.200000,\"width\":0.300000,\"height\":0.400000}");
}

TEST_CASE("preamble is fixed and versioned") {
  const std::string p = kPromptPreamble;
  CHECK(p.find("[preamble v1]") != std::string::npos);
  CHECK(std::string(kPreambleVersion) == "v1");
  CHECK(p.back() == '\n');
}

TEST_CASE("serialized records match the goldens byte for byte") {
  CHECK(serialize_prompt(make_example()).records_text() ==
        golden("prompt_make.txt"));
  CHECK(serialize_prompt(solo_example()).records_text() ==
        golden("prompt_solo.txt"));
  CHECK(serialize_prompt(sorted_example()).records_text() ==
        golden("prompt_sorted.txt"));
}

TEST_CASE("prompt structure invariants") {
  const PromptDocument doc = serialize_prompt(sorted_example());
  REQUIRE(doc.records.size() == 5);
  SUBCASE("exactly one record is the null-geometry target, last") {
    int nulls = 0;
    for (const PromptRecord& r : doc.records) nulls += !r.geometry;
    CHECK(nulls == 1);
    CHECK_FALSE(doc.records.back().geometry.has_value());
    CHECK(doc.records.back().type == "textElement");
    CHECK(doc.records.back().text == "Offer");
  }
  SUBCASE("non-text records carry the blank placeholder") {
    for (const PromptRecord& r : doc.records)
      if (r.type != "textElement") CHECK(r.text == "{blank}");
  }
  SUBCASE("contexts are sorted by top then left") {
    for (size_t i = 1; i + 1 < doc.records.size(); ++i) {
      const BBox& prev = *doc.records[i - 1].geometry;
      const BBox& cur = *doc.records[i].geometry;
      CHECK((prev.top < cur.top || (prev.top == cur.top && prev.left <= cur.left)));
    }
  }
  SUBCASE("attached image is the target-free render at canvas size") {
    const Layout l = sorted_example();
    CHECK(doc.image == render_layout(l, /*exclude_target=*/true,
                                     l.canvas_width, l.canvas_height));
    CHECK(doc.image.width == l.canvas_width);
  }
}

TEST_CASE("serialization is stable under input reordering") {
  Layout l = sorted_example();
  const std::string base = serialize_prompt(l).records_text();
  // Move the target to the front and reverse the contexts.
  Layout shuffled;
  shuffled.id = l.id;
  shuffled.canvas_width = l.canvas_width;
  shuffled.canvas_height = l.canvas_height;
  shuffled.elements.push_back(l.elements[4]);
  shuffled.elements.push_back(l.elements[3]);
  shuffled.elements.push_back(l.elements[2]);
  shuffled.elements.push_back(l.elements[1]);
  shuffled.elements.push_back(l.elements[0]);
  shuffled.target_index = 0;
  CHECK(serialize_prompt(shuffled).records_text() == base);
}

TEST_CASE("identical-geometry contexts fall back to input order") {
  Layout l;
  l.id = "twins";
  l.canvas_width = l.canvas_height = 16;
  l.elements.push_back(colored_element(ElementKind::svgElement,
                                       {0.2, 0.2, 0.3, 0.3}, {1, 1, 1}));
  l.elements.push_back(colored_element(ElementKind::maskElement,
                                       {0.2, 0.2, 0.3, 0.3}, {2, 2, 2}));
  l.elements.push_back(make_text_element("T", {0.6, 0.6, 0.2, 0.2}, {0, 0, 0}));
  l.target_index = 2;
  const PromptDocument doc = serialize_prompt(l);
  CHECK(doc.records[0].type == "svgElement");
  CHECK(doc.records[1].type == "maskElement");
}

TEST_CASE("serializer rejects invalid layouts") {
  Layout l = make_example();
  l.target_index = 0;
  CHECK_THROWS_WITH(serialize_prompt(l),
                    "invalid layout 'make': target not textElement");
}

TEST_CASE("target geometry never leaks into the prompt bytes") {
  Layout l = sorted_example();
  l.elements[4].bbox = {0.12345, 0.54321, 0.24680, 0.13579};
  const PromptDocument doc = serialize_prompt(l);
  const std::string text = doc.records_text();
  for (const char* needle :
       {"0.123450", "0.543210", "0.246800", "0.135790", "0.12345", "0.54321"})
    CHECK(text.find(needle) == std::string::npos);
  // And the attached image must not move with the hidden box either.
  Layout moved = sorted_example();
  moved.elements[4].bbox = {0.7, 0.7, 0.25, 0.25};
  CHECK(doc.image == serialize_prompt(moved).image);
  CHECK(text == serialize_prompt(moved).records_text());
}

TEST_CASE("response parsing") {
  SUBCASE("plain valid object") {
    const PredictorResponse r =
        parse_response("{\"left\":0.1,\"top\":0.2,\"width\":0.3,\"height\":0.4}");
    CHECK(r.status == ResponseStatus::valid);
    REQUIRE(r.parsed.has_value());
    CHECK(*r.parsed == BBox{0.1, 0.2, 0.3, 0.4});
  }
  SUBCASE("prose and code fences are tolerated, out-of-range clamps") {
    const PredictorResponse r = parse_response(
        "here you go: ```json {\"left\":1.2,\"top\":0,\"width\":0.5,"
        "\"height\":0.5}``` ");
    CHECK(r.status == ResponseStatus::out_of_range_clamped);
    REQUIRE(r.parsed.has_value());
    CHECK(r.parsed->left == 1.0);
    CHECK(r.parsed->top == 0.0);
    CHECK(r.parsed->width == 0.5);
    CHECK(r.parsed->height == 0.5);
  }
  SUBCASE("non-numeric value is invalid") {
    const PredictorResponse r = parse_response("{\"left\":\"abc\"}");
    CHECK(r.status == ResponseStatus::invalid_format);
    CHECK_FALSE(r.parsed.has_value());
  }
  SUBCASE("negative values clamp to zero") {
    const PredictorResponse r = parse_response(
        "{\"left\":-0.25,\"top\":0.5,\"width\":0.5,\"height\":2}");
    CHECK(r.status == ResponseStatus::out_of_range_clamped);
    CHECK(r.parsed->left == 0.0);
    CHECK(r.parsed->height == 1.0);
  }
  SUBCASE("first object with the full key set decides") {
    const PredictorResponse r = parse_response(
        "{\"note\":\"maybe\"} {\"left\":0.1,\"top\":0.1,\"width\":0.1,"
        "\"height\":0.1} {\"left\":0.9,\"top\":0.9,\"width\":0.9,\"height\":0.9}");
    CHECK(r.status == ResponseStatus::valid);
    CHECK(r.parsed->left == 0.1);
  }
  SUBCASE("a complete object with a bad value is final even if a later one is fine") {
    const PredictorResponse r = parse_response(
        "{\"left\":\"x\",\"top\":0,\"width\":0.5,\"height\":0.5} "
        "{\"left\":0.2,\"top\":0.2,\"width\":0.2,\"height\":0.2}");
    CHECK(r.status == ResponseStatus::invalid_format);
  }
  SUBCASE("nested braces and brace characters inside strings") {
    const PredictorResponse r = parse_response(
        "{\"msg\":\"box {here}\",\"inner\":{\"left\":0}}\n"
        "{\"left\":0.3,\"top\":0.3,\"width\":0.2,\"height\":0.2}");
    CHECK(r.status == ResponseStatus::valid);
    CHECK(r.parsed->left == 0.3);
  }
  SUBCASE("missing keys, empty input, unbalanced braces") {
    CHECK(parse_response("{\"left\":0.1,\"top\":0.2}").status ==
          ResponseStatus::invalid_format);
    CHECK(parse_response("").status == ResponseStatus::invalid_format);
    CHECK(parse_response("no json at all").status == ResponseStatus::invalid_format);
    CHECK(parse_response("{\"left\":0.1,").status == ResponseStatus::invalid_format);
  }
  SUBCASE("non-finite numbers are invalid") {
    CHECK(parse_response("{\"left\":1e999,\"top\":0,\"width\":0.5,\"height\":0.5}")
              .status == ResponseStatus::invalid_format);
  }
  SUBCASE("status names") {
    CHECK(std::string(to_string(ResponseStatus::valid)) == "valid");
    CHECK(std::string(to_string(ResponseStatus::invalid_format)) == "invalid_format");
    CHECK(std::string(to_string(ResponseStatus::out_of_range_clamped)) ==
          "out_of_range_clamped");
  }
}

TEST_CASE("canonical responses round-trip exactly") {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    // 6-decimal multiples survive the render/parse cycle bit-exactly.
    const auto grid = [&] { return rng.uniform_int(1000001) / 1e6; };
    const BBox box{grid(), grid(), grid(), grid()};
    const PredictorResponse r = parse_response(canonical_response(box));
    REQUIRE(r.status == ResponseStatus::valid);
    CHECK(r.parsed->left == doctest::Approx(box.left).epsilon(1e-12));
    CHECK(r.parsed->top == doctest::Approx(box.top).epsilon(1e-12));
    CHECK(r.parsed->width == doctest::Approx(box.width).epsilon(1e-12));
    CHECK(r.parsed->height == doctest::Approx(box.height).epsilon(1e-12));
  }
}
