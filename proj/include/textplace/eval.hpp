#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "textplace/layout.hpp"
#include "textplace/prompt.hpp"

namespace textplace::eval {

struct EvalRow {
  std::string layout_id;
  std::string predictor;
  std::optional<BBox> pred;
  BBox gt;
  double iou = 0.0;  // populated iff status != invalid_format
  double bde = 0.0;
  int n_elements = 0;
  int n_texts = 0;
  double gt_area = 0.0;
  vlm::ResponseStatus status = vlm::ResponseStatus::invalid_format;
  std::string note;  // failure cause for invalid rows
};

using LayoutPredictor = std::function<vlm::PredictorResponse(const Layout&)>;

// One row per layout, input order, invalid outputs kept as rows but excluded
// from every metric mean. Predictor exceptions become invalid rows with the
// cause in note. Fan-out over a bounded worker pool.
std::vector<EvalRow> evaluate(const LayoutPredictor& predictor,
                              const std::vector<Layout>& layouts,
                              const std::string& predictor_name,
                              int workers = 1);

struct SplitStats {
  int count = 0;    // rows in the split
  int invalid = 0;  // invalid_format rows (excluded from means)
  int clamped = 0;
  double mean_iou = 0.0;
  double mean_bde = 0.0;
  bool has_metrics = false;  // false when no valid rows
};

struct ReportTable {
  SplitStats single_text, multiple_text, all;
};

ReportTable make_report(const std::vector<EvalRow>& rows);
std::string report_csv(const ReportTable& table);

struct BucketRow {
  std::string label;
  double lo = 0.0, hi = 0.0;
  int count = 0;
  double mean_iou = 0.0, median_iou = 0.0;
  double mean_bde = 0.0, median_bde = 0.0;
};

enum class BucketBy { gt_area, n_texts };

// gt_area: geometric bins spanning the observed range; n_texts: 1,2,3,4,5+.
// Throws "no data" when no row carries metrics.
std::vector<BucketRow> bucket_report(const std::vector<EvalRow>& rows,
                                     BucketBy by, int area_bins = 4);
std::string buckets_csv(const std::vector<BucketRow>& buckets);

std::string metrics_csv(const std::vector<EvalRow>& rows);
std::vector<EvalRow> parse_metrics_csv(const std::string& text);

// Layout render plus 1-px outlines: ground truth green, then prediction red
// (red drawn last). Written as PPM.
void render_overlay(const Layout& layout, const BBox& pred, const BBox& gt,
                    const std::string& out_path);

}  // namespace textplace::eval
