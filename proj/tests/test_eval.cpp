#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "support.hpp"
#include "textplace/eval.hpp"
#include "textplace/metrics.hpp"
#include "textplace/ppm.hpp"
#include "textplace/prompt.hpp"
#include "textplace/rng.hpp"
#include "textplace/synthetic.hpp"

using namespace textplace;
using namespace textplace::eval;
using vlm::PredictorResponse;
using vlm::ResponseStatus;

namespace {

PredictorResponse respond(const BBox& box,
                          ResponseStatus status = ResponseStatus::valid) {
  PredictorResponse r;
  r.parsed = box;
  r.status = status;
  r.raw = vlm::canonical_response(box);
  return r;
}

LayoutPredictor oracle() {
  return [](const Layout& l) { return respond(l.target().bbox); };
}

std::vector<Layout> some_layouts(int count, uint64_t seed) {
  data::SynthConfig cfg;
  cfg.count = count;
  cfg.seed = seed;
  return data::generate_synthetic(cfg);
}

EvalRow metric_row(int n_texts, double gt_area, double iou_value,
                   double bde_value = 0.05,
                   ResponseStatus status = ResponseStatus::valid) {
  EvalRow r;
  r.layout_id = "row";
  r.predictor = "stub";
  r.n_texts = n_texts;
  r.n_elements = n_texts + 1;
  r.gt_area = gt_area;
  r.iou = iou_value;
  r.bde = bde_value;
  r.status = status;
  if (status != ResponseStatus::invalid_format)
    r.pred = BBox{0.1, 0.1, 0.2, 0.2};
  return r;
}

int count_color(const Raster& img, Rgb color) {
  int n = 0;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) n += img.get(r, c) == color;
  return n;
}

constexpr Rgb kGreen{0, 190, 0};
constexpr Rgb kRed{220, 0, 0};

}  // namespace

TEST_CASE("evaluate with an oracle predictor") {
  const std::vector<Layout> layouts = some_layouts(6, 201);
  const std::vector<EvalRow> rows = evaluate(oracle(), layouts, "oracle");
  REQUIRE(rows.size() == layouts.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    const EvalRow& r = rows[i];
    CHECK(r.layout_id == layouts[i].id);
    CHECK(r.predictor == "oracle");
    CHECK(r.status == ResponseStatus::valid);
    // (left+width)-left need not round back to width, so self-IoU can sit a
    // few ulps under 1.
    CHECK(r.iou == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.bde == 0.0);
    CHECK(r.gt == layouts[i].target().bbox);
    CHECK(r.gt_area == doctest::Approx(r.gt.area()).epsilon(1e-15));
    CHECK(r.n_elements == int(layouts[i].elements.size()));
    CHECK(r.n_texts == layouts[i].text_element_count());
  }
  const ReportTable table = make_report(rows);
  CHECK(table.all.count == 6);
  CHECK(table.all.invalid == 0);
  CHECK(table.all.mean_iou == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(table.all.mean_bde == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("constant predictor on a matching ground truth scores IoU 1") {
  Layout l;
  l.id = "half";
  l.canvas_width = l.canvas_height = 16;
  l.elements.push_back(make_text_element("X", {0.5, 0.5, 0.5, 0.5}, {0, 0, 0}));
  l.target_index = 0;
  const LayoutPredictor constant = [](const Layout&) {
    return respond({0.5, 0.5, 0.5, 0.5});
  };
  const std::vector<EvalRow> rows = evaluate(constant, {l}, "constant");
  CHECK(rows[0].iou == 1.0);
  CHECK(rows[0].bde == 0.0);
}

TEST_CASE("invalid and throwing predictors become excluded rows") {
  const std::vector<Layout> layouts = some_layouts(3, 202);

  SUBCASE("prose replies") {
    const LayoutPredictor prose = [](const Layout&) {
      return vlm::parse_response("somewhere near the top maybe?");
    };
    const std::vector<EvalRow> rows = evaluate(prose, layouts, "prose");
    for (const EvalRow& r : rows) {
      CHECK(r.status == ResponseStatus::invalid_format);
      CHECK_FALSE(r.pred.has_value());
      CHECK(r.note == "somewhere near the top maybe?");
      CHECK(r.n_texts >= 1);  // layout facts still recorded
    }
    const ReportTable table = make_report(rows);
    CHECK(table.all.invalid == 3);
    CHECK_FALSE(table.all.has_metrics);
    // Empty metric cells, not zeros, when nothing was measurable.
    const std::string csv = report_csv(table);
    CHECK(csv.find("all,3,3,0,,\n") != std::string::npos);
  }
  SUBCASE("exceptions carry their cause into the note") {
    const LayoutPredictor boom = [](const Layout& l) -> PredictorResponse {
      if (l.id.back() == '1') throw std::runtime_error("endpoint melted");
      return respond(l.target().bbox);
    };
    const std::vector<EvalRow> rows = evaluate(boom, layouts, "boom");
    CHECK(rows[0].status == ResponseStatus::valid);
    CHECK(rows[1].status == ResponseStatus::invalid_format);
    CHECK(rows[1].note == "endpoint melted");
    CHECK(rows[2].status == ResponseStatus::valid);
    CHECK(make_report(rows).all.invalid == 1);
  }
  SUBCASE("extremely long causes are truncated") {
    const std::string long_msg(500, 'x');
    const LayoutPredictor boom = [&](const Layout&) -> PredictorResponse {
      throw std::runtime_error(long_msg);
    };
    const std::vector<EvalRow> rows = evaluate(boom, {layouts[0]}, "boom");
    CHECK(rows[0].note.size() == 200);
  }
}

TEST_CASE("clamped responses count separately but keep their metrics") {
  const std::vector<Layout> layouts = some_layouts(2, 203);
  const LayoutPredictor clamping = [](const Layout& l) {
    return respond(l.target().bbox, ResponseStatus::out_of_range_clamped);
  };
  const ReportTable table = make_report(evaluate(clamping, layouts, "clamp"));
  CHECK(table.all.count == 2);
  CHECK(table.all.invalid == 0);
  CHECK(table.all.clamped == 2);
  CHECK(table.all.mean_iou == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the all split is the weighted recombination of the others") {
  Rng rng(57);
  std::vector<EvalRow> rows;
  for (int i = 0; i < 40; ++i) {
    const int n_texts = 1 + int(rng.uniform_int(4));
    const ResponseStatus status = rng.uniform(0.0, 1.0) < 0.2
                                      ? ResponseStatus::invalid_format
                                      : ResponseStatus::valid;
    rows.push_back(metric_row(n_texts, rng.uniform(0.01, 0.5),
                              rng.uniform(0.0, 1.0), rng.uniform(0.0, 0.5),
                              status));
  }
  const ReportTable t = make_report(rows);
  CHECK(t.single_text.count + t.multiple_text.count == t.all.count);
  CHECK(t.single_text.invalid + t.multiple_text.invalid == t.all.invalid);

  const int n1 = t.single_text.count - t.single_text.invalid;
  const int n2 = t.multiple_text.count - t.multiple_text.invalid;
  REQUIRE(n1 > 0);
  REQUIRE(n2 > 0);
  const double weighted_iou =
      (n1 * t.single_text.mean_iou + n2 * t.multiple_text.mean_iou) / (n1 + n2);
  const double weighted_bde =
      (n1 * t.single_text.mean_bde + n2 * t.multiple_text.mean_bde) / (n1 + n2);
  CHECK(std::abs(t.all.mean_iou - weighted_iou) < 1e-12);
  CHECK(std::abs(t.all.mean_bde - weighted_bde) < 1e-12);

  SUBCASE("aggregates ignore row order") {
    std::vector<EvalRow> shuffled = rows;
    std::reverse(shuffled.begin(), shuffled.end());
    const ReportTable t2 = make_report(shuffled);
    CHECK(t2.all.count == t.all.count);
    CHECK(t2.all.invalid == t.all.invalid);
    CHECK(std::abs(t2.all.mean_iou - t.all.mean_iou) < 1e-12);
    CHECK(std::abs(t2.all.mean_bde - t.all.mean_bde) < 1e-12);
    CHECK(std::abs(t2.single_text.mean_iou - t.single_text.mean_iou) < 1e-12);
  }
}

TEST_CASE("parallel evaluation matches the single-threaded rows") {
  const std::vector<Layout> layouts = some_layouts(12, 204);
  const std::vector<EvalRow> serial = evaluate(oracle(), layouts, "o", 1);
  const std::vector<EvalRow> parallel = evaluate(oracle(), layouts, "o", 6);
  REQUIRE(serial.size() == parallel.size());
  for (size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].layout_id == parallel[i].layout_id);
    CHECK(serial[i].iou == parallel[i].iou);
    CHECK(serial[i].bde == parallel[i].bde);
  }
  CHECK(evaluate(oracle(), {}, "o").empty());
}

TEST_CASE("text-count buckets") {
  std::vector<EvalRow> rows;
  SUBCASE("all singles populate exactly one bucket") {
    for (int i = 0; i < 5; ++i) rows.push_back(metric_row(1, 0.1, 0.5));
    const auto buckets = bucket_report(rows, BucketBy::n_texts);
    REQUIRE(buckets.size() == 5);
    CHECK(buckets[0].label == "1");
    CHECK(buckets[0].count == 5);
    CHECK(buckets[0].mean_iou == doctest::Approx(0.5).epsilon(1e-15));
    for (size_t b = 1; b < buckets.size(); ++b) CHECK(buckets[b].count == 0);
    CHECK(buckets[4].label == "5+");
  }
  SUBCASE("five or more text elements share the tail bucket") {
    rows.push_back(metric_row(5, 0.1, 0.4));
    rows.push_back(metric_row(9, 0.1, 0.6));
    rows.push_back(metric_row(2, 0.1, 0.9));
    const auto buckets = bucket_report(rows, BucketBy::n_texts);
    CHECK(buckets[1].count == 1);  // "2"
    CHECK(buckets[4].count == 2);  // "5+"
    CHECK(buckets[4].mean_iou == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("invalid rows never reach a bucket") {
    rows.push_back(metric_row(1, 0.1, 0.5));
    rows.push_back(metric_row(1, 0.1, 0.0, 0.0, ResponseStatus::invalid_format));
    CHECK(bucket_report(rows, BucketBy::n_texts)[0].count == 1);
  }
}

TEST_CASE("area buckets") {
  SUBCASE("two areas split across two geometric bins") {
    std::vector<EvalRow> rows{metric_row(1, 0.01, 0.3), metric_row(1, 0.5, 0.8)};
    const auto buckets = bucket_report(rows, BucketBy::gt_area, 2);
    REQUIRE(buckets.size() == 2);
    CHECK(buckets[0].label == "area_bin1");
    CHECK(buckets[0].count == 1);
    CHECK(buckets[0].lo == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(buckets[0].hi == doctest::Approx(std::sqrt(0.01 * 0.5)).epsilon(1e-9));
    CHECK(buckets[1].count == 1);
    CHECK(buckets[1].hi == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(buckets[0].mean_iou == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(buckets[1].mean_iou == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("noisier small boxes give monotone bucket means") {
    // Prediction = ground truth inflated more as the box shrinks, a noise
    // model whose IoU is a strictly increasing function of area.
    std::vector<EvalRow> rows;
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
      const double area = 1e-3 * std::pow(500.0, rng.uniform(0.0, 1.0));
      const double t = (std::log(area) - std::log(1e-3)) / std::log(500.0);
      const double inflate = 1.0 + 0.8 * (1.0 - t);
      rows.push_back(metric_row(1, area, 1.0 / (inflate * inflate)));
    }
    const auto buckets = bucket_report(rows, BucketBy::gt_area, 4);
    REQUIRE(buckets.size() == 4);
    for (const BucketRow& b : buckets) CHECK(b.count > 0);
    for (size_t b = 1; b < buckets.size(); ++b)
      CHECK(buckets[b].mean_iou >= buckets[b - 1].mean_iou);
  }
  SUBCASE("identical areas land in the first bin") {
    std::vector<EvalRow> rows{metric_row(1, 0.2, 0.5), metric_row(2, 0.2, 0.7)};
    const auto buckets = bucket_report(rows, BucketBy::gt_area, 4);
    CHECK(buckets[0].count == 2);
    for (size_t b = 1; b < buckets.size(); ++b) CHECK(buckets[b].count == 0);
  }
  SUBCASE("medians are order statistics") {
    std::vector<EvalRow> rows{
        metric_row(1, 0.1, 0.2, 0.8), metric_row(1, 0.1, 0.8, 0.6),
        metric_row(1, 0.1, 0.6, 0.4), metric_row(1, 0.1, 0.4, 0.2)};
    const auto buckets = bucket_report(rows, BucketBy::gt_area, 1);
    CHECK(buckets[0].median_iou == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(buckets[0].median_bde == doctest::Approx(0.5).epsilon(1e-15));
    rows.push_back(metric_row(1, 0.1, 0.9, 0.9));
    CHECK(bucket_report(rows, BucketBy::gt_area, 1)[0].median_iou ==
          doctest::Approx(0.6).epsilon(1e-15));
  }
  SUBCASE("failure modes") {
    CHECK_THROWS_WITH(bucket_report({}, BucketBy::gt_area), "no data");
    std::vector<EvalRow> invalid_only{
        metric_row(1, 0.1, 0.0, 0.0, ResponseStatus::invalid_format)};
    CHECK_THROWS_WITH(bucket_report(invalid_only, BucketBy::n_texts), "no data");
    std::vector<EvalRow> one{metric_row(1, 0.1, 0.5)};
    CHECK_THROWS_WITH(bucket_report(one, BucketBy::gt_area, 0),
                      "need at least one bin");
  }
}

TEST_CASE("bucket CSV shape") {
  std::vector<EvalRow> rows{metric_row(1, 0.1, 0.5, 0.1)};
  const std::string csv = buckets_csv(bucket_report(rows, BucketBy::n_texts));
  CHECK(csv.rfind("bucket,lo,hi,count,mean_iou,median_iou,mean_bde,median_bde\n",
                  0) == 0);
  CHECK(csv.find("1,1,1,1,0.5,0.5,0.1,0.1\n") != std::string::npos);
  CHECK(csv.find("2,2,2,0,,,,\n") != std::string::npos);  // empty bucket
  CHECK(csv.find("5+,5,-1,0,,,,\n") != std::string::npos);
}

TEST_CASE("metrics CSV round-trips") {
  const std::vector<Layout> layouts = some_layouts(5, 205);
  const LayoutPredictor mixed = [](const Layout& l) -> PredictorResponse {
    if (l.id.back() == '2') return vlm::parse_response("nope");
    if (l.id.back() == '3')
      return respond({0.0, 0.0, 1.0, 1.0}, ResponseStatus::out_of_range_clamped);
    return respond(l.target().bbox);
  };
  const std::vector<EvalRow> rows = evaluate(mixed, layouts, "mixed");
  const std::string csv = metrics_csv(rows);
  CHECK(csv.rfind("layout_id,predictor,status,n_elements,n_texts,gt_area,iou,"
                  "bde,pred_left,pred_top,pred_width,pred_height,gt_left,"
                  "gt_top,gt_width,gt_height\n",
                  0) == 0);

  const std::vector<EvalRow> parsed = parse_metrics_csv(csv);
  REQUIRE(parsed.size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    const EvalRow& a = rows[i];
    const EvalRow& b = parsed[i];
    CHECK(a.layout_id == b.layout_id);
    CHECK(a.predictor == b.predictor);
    CHECK(a.status == b.status);
    CHECK(a.n_elements == b.n_elements);
    CHECK(a.n_texts == b.n_texts);
    CHECK(a.gt_area == doctest::Approx(b.gt_area).epsilon(1e-9));
    CHECK(a.pred.has_value() == b.pred.has_value());
    if (a.pred)
      CHECK(a.pred->left == doctest::Approx(b.pred->left).epsilon(1e-9));
    if (a.status != ResponseStatus::invalid_format) {
      CHECK(a.iou == doctest::Approx(b.iou).epsilon(1e-9));
      CHECK(a.bde == doctest::Approx(b.bde).epsilon(1e-9));
    }
    CHECK(a.gt.left == doctest::Approx(b.gt.left).epsilon(1e-9));
    CHECK(a.gt.height == doctest::Approx(b.gt.height).epsilon(1e-9));
  }
  // Same table from re-parsed rows: no drift between file and aggregates.
  const ReportTable t1 = make_report(rows);
  const ReportTable t2 = make_report(parsed);
  CHECK(std::abs(t1.all.mean_iou - t2.all.mean_iou) < 1e-9);
  CHECK(t1.all.invalid == t2.all.invalid);

  CHECK_THROWS_WITH(parse_metrics_csv("id,not,the,right,header\n"),
                    "not a metrics CSV");
  CHECK_THROWS_WITH(parse_metrics_csv(""), "not a metrics CSV");
}

TEST_CASE("report CSV exact shape") {
  const std::vector<Layout> layouts = some_layouts(4, 206);
  const std::string csv = report_csv(make_report(evaluate(oracle(), layouts, "o")));
  CHECK(csv.rfind("split,count,invalid,clamped,mean_iou,mean_bde\n", 0) == 0);
  CHECK(csv.find("\nall,4,0,0,1,0\n") != std::string::npos);
  const size_t singles = csv.find("single_text,");
  const size_t multiples = csv.find("multiple_text,");
  CHECK(singles != std::string::npos);
  CHECK(multiples != std::string::npos);
  CHECK(singles < multiples);
}

TEST_CASE("overlay rendering") {
  const Layout layout = testsupport::small_layout({0.25, 0.25, 0.5, 0.25});
  const std::string path = "/tmp/textplace_eval_overlay.ppm";
  const BBox gt = layout.target().bbox;

  SUBCASE("prediction drawn over an identical ground truth hides the green") {
    render_overlay(layout, gt, gt, path);
    const Raster img = read_ppm(path);
    CHECK(img.width == layout.canvas_width);
    CHECK(img.height == layout.canvas_height);
    CHECK(count_color(img, kGreen) == 0);
    CHECK(count_color(img, kRed) > 0);
  }
  SUBCASE("distinct boxes show both outlines at their edges") {
    const BBox pred{0.0, 0.0, 0.25, 0.25};
    render_overlay(layout, pred, gt, path);
    const Raster img = read_ppm(path);
    const int w = layout.canvas_width, h = layout.canvas_height;
    CHECK(img.get(0, 0) == kRed);  // pred top-left corner
    CHECK(img.get(int(0.25 * h), int(0.5 * w)) == kGreen);  // gt top edge
    CHECK(count_color(img, kGreen) > 0);
    CHECK(count_color(img, kRed) > 0);
  }
  SUBCASE("degenerate width draws a one-pixel vertical line") {
    Layout plain = testsupport::small_layout({0.6, 0.6, 0.2, 0.2});
    const BBox pred{0.5, 0.25, 0.0, 0.25};
    render_overlay(plain, pred, plain.target().bbox, path);
    const Raster img = read_ppm(path);
    const int col = int(0.5 * img.width);
    int red_cols = 0;
    for (int c = 0; c < img.width; ++c) {
      bool any = false;
      for (int r = 0; r < img.height; ++r) any = any || img.get(r, c) == kRed;
      red_cols += any;
    }
    CHECK(red_cols == 1);
    CHECK(img.get(int(0.25 * img.height), col) == kRed);
    CHECK(img.get(int(0.5 * img.height), col) == kRed);
  }
  SUBCASE("rendering is deterministic across calls") {
    const std::string path2 = "/tmp/textplace_eval_overlay2.ppm";
    render_overlay(layout, {0.1, 0.1, 0.3, 0.3}, gt, path);
    render_overlay(layout, {0.1, 0.1, 0.3, 0.3}, gt, path2);
    CHECK(read_ppm(path) == read_ppm(path2));
    std::remove(path2.c_str());
  }
  SUBCASE("unwritable destinations fail loudly") {
    CHECK_THROWS_WITH(
        render_overlay(layout, gt, gt, "/tmp/no_such_dir_xyz/overlay.ppm"),
        doctest::Contains("cannot open for write"));
  }
  std::remove(path.c_str());
}
