#include "textplace/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "textplace/metrics.hpp"
#include "textplace/ppm.hpp"

namespace textplace::eval {
namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

bool has_metrics(const EvalRow& r) {
  return r.status != vlm::ResponseStatus::invalid_format;
}

}  // namespace

std::vector<EvalRow> evaluate(const LayoutPredictor& predictor,
                              const std::vector<Layout>& layouts,
                              const std::string& predictor_name, int workers) {
  std::vector<EvalRow> rows(layouts.size());
  if (layouts.empty()) return rows;
  workers = std::max(1, std::min<int>(workers, static_cast<int>(layouts.size())));

  std::atomic<size_t> next{0};
  auto run = [&] {
    for (size_t i = next.fetch_add(1); i < layouts.size();
         i = next.fetch_add(1)) {
      const Layout& layout = layouts[i];
      EvalRow& row = rows[i];
      row.layout_id = layout.id;
      row.predictor = predictor_name;
      row.gt = layout.target().bbox;
      row.gt_area = row.gt.area();
      row.n_elements = static_cast<int>(layout.elements.size());
      row.n_texts = layout.text_element_count();
      vlm::PredictorResponse resp;
      try {
        resp = predictor(layout);
      } catch (const std::exception& e) {
        resp.status = vlm::ResponseStatus::invalid_format;
        resp.raw = e.what();
      }
      row.status = resp.status;
      row.pred = resp.parsed;
      if (has_metrics(row) && row.pred) {
        row.iou = textplace::iou(*row.pred, row.gt);
        row.bde = bde(*row.pred, row.gt);
      } else {
        row.status = vlm::ResponseStatus::invalid_format;
        row.note = resp.raw.substr(0, 200);
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  return rows;
}

namespace {

void accumulate(SplitStats& s, const EvalRow& r) {
  ++s.count;
  if (!has_metrics(r)) {
    ++s.invalid;
    return;
  }
  if (r.status == vlm::ResponseStatus::out_of_range_clamped) ++s.clamped;
  s.mean_iou += r.iou;
  s.mean_bde += r.bde;
  s.has_metrics = true;
}

void finish(SplitStats& s) {
  const int n = s.count - s.invalid;
  if (n > 0) {
    s.mean_iou /= n;
    s.mean_bde /= n;
  }
}

}  // namespace

ReportTable make_report(const std::vector<EvalRow>& rows) {
  ReportTable t;
  for (const EvalRow& r : rows) {
    accumulate(r.n_texts == 1 ? t.single_text : t.multiple_text, r);
    accumulate(t.all, r);
  }
  finish(t.single_text);
  finish(t.multiple_text);
  finish(t.all);
  return t;
}

std::string report_csv(const ReportTable& table) {
  std::string out = "split,count,invalid,clamped,mean_iou,mean_bde\n";
  auto line = [&](const char* name, const SplitStats& s) {
    out += name;
    out += "," + std::to_string(s.count) + "," + std::to_string(s.invalid) +
           "," + std::to_string(s.clamped) + ",";
    out += s.has_metrics ? fmt(s.mean_iou) : "";
    out += ",";
    out += s.has_metrics ? fmt(s.mean_bde) : "";
    out += "\n";
  };
  line("single_text", table.single_text);
  line("multiple_text", table.multiple_text);
  line("all", table.all);
  return out;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

BucketRow finish_bucket(std::string label, double lo, double hi,
                        const std::vector<const EvalRow*>& members) {
  BucketRow row{std::move(label), lo, hi, static_cast<int>(members.size()),
                0, 0, 0, 0};
  if (members.empty()) return row;
  std::vector<double> ious, bdes;
  for (const EvalRow* r : members) {
    row.mean_iou += r->iou;
    row.mean_bde += r->bde;
    ious.push_back(r->iou);
    bdes.push_back(r->bde);
  }
  row.mean_iou /= double(members.size());
  row.mean_bde /= double(members.size());
  row.median_iou = median(std::move(ious));
  row.median_bde = median(std::move(bdes));
  return row;
}

}  // namespace

std::vector<BucketRow> bucket_report(const std::vector<EvalRow>& rows,
                                     BucketBy by, int area_bins) {
  std::vector<const EvalRow*> valid;
  for (const EvalRow& r : rows)
    if (has_metrics(r)) valid.push_back(&r);
  if (valid.empty()) throw std::runtime_error("no data");

  std::vector<BucketRow> out;
  if (by == BucketBy::n_texts) {
    for (int b = 1; b <= 5; ++b) {
      std::vector<const EvalRow*> members;
      for (const EvalRow* r : valid)
        if (b < 5 ? r->n_texts == b : r->n_texts >= 5) members.push_back(r);
      out.push_back(finish_bucket(b < 5 ? std::to_string(b) : "5+", b,
                                  b < 5 ? b : -1, members));
    }
    return out;
  }

  if (area_bins < 1) throw std::invalid_argument("need at least one bin");
  double lo = 1e300, hi = -1e300;
  for (const EvalRow* r : valid) {
    lo = std::min(lo, r->gt_area);
    hi = std::max(hi, r->gt_area);
  }
  lo = std::max(lo, 1e-9);
  hi = std::max(hi, lo * (1.0 + 1e-12));
  const double step = std::pow(hi / lo, 1.0 / area_bins);
  for (int b = 0; b < area_bins; ++b) {
    const double blo = lo * std::pow(step, b);
    const double bhi = b + 1 == area_bins ? hi : lo * std::pow(step, b + 1);
    std::vector<const EvalRow*> members;
    for (const EvalRow* r : valid) {
      const bool in = b + 1 == area_bins ? r->gt_area >= blo
                                         : r->gt_area >= blo && r->gt_area < bhi;
      if (in) members.push_back(r);
    }
    out.push_back(finish_bucket("area_bin" + std::to_string(b + 1), blo, bhi,
                                members));
  }
  return out;
}

std::string buckets_csv(const std::vector<BucketRow>& buckets) {
  std::string out =
      "bucket,lo,hi,count,mean_iou,median_iou,mean_bde,median_bde\n";
  for (const BucketRow& b : buckets) {
    out += b.label + "," + fmt(b.lo) + "," + fmt(b.hi) + "," +
           std::to_string(b.count) + ",";
    if (b.count > 0)
      out += fmt(b.mean_iou) + "," + fmt(b.median_iou) + "," +
             fmt(b.mean_bde) + "," + fmt(b.median_bde);
    else
      out += ",,,";
    out += "\n";
  }
  return out;
}

std::string metrics_csv(const std::vector<EvalRow>& rows) {
  std::string out =
      "layout_id,predictor,status,n_elements,n_texts,gt_area,iou,bde,"
      "pred_left,pred_top,pred_width,pred_height,"
      "gt_left,gt_top,gt_width,gt_height\n";
  for (const EvalRow& r : rows) {
    out += r.layout_id + "," + r.predictor + "," + to_string(r.status) + "," +
           std::to_string(r.n_elements) + "," + std::to_string(r.n_texts) +
           "," + fmt(r.gt_area) + ",";
    if (has_metrics(r)) out += fmt(r.iou) + "," + fmt(r.bde);
    else out += ",";
    out += ",";
    if (r.pred)
      out += fmt(r.pred->left) + "," + fmt(r.pred->top) + "," +
             fmt(r.pred->width) + "," + fmt(r.pred->height);
    else
      out += ",,,";
    out += "," + fmt(r.gt.left) + "," + fmt(r.gt.top) + "," +
           fmt(r.gt.width) + "," + fmt(r.gt.height) + "\n";
  }
  return out;
}

std::vector<EvalRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("layout_id,predictor,status", 0) != 0)
    throw std::runtime_error("not a metrics CSV");

  std::vector<EvalRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    f.resize(16);

    EvalRow r;
    r.layout_id = f[0];
    r.predictor = f[1];
    if (f[2] == "valid") r.status = vlm::ResponseStatus::valid;
    else if (f[2] == "out_of_range_clamped")
      r.status = vlm::ResponseStatus::out_of_range_clamped;
    else r.status = vlm::ResponseStatus::invalid_format;
    r.n_elements = std::atoi(f[3].c_str());
    r.n_texts = std::atoi(f[4].c_str());
    r.gt_area = std::atof(f[5].c_str());
    if (has_metrics(r)) {
      r.iou = std::atof(f[6].c_str());
      r.bde = std::atof(f[7].c_str());
    }
    if (!f[8].empty())
      r.pred = BBox{std::atof(f[8].c_str()), std::atof(f[9].c_str()),
                    std::atof(f[10].c_str()), std::atof(f[11].c_str())};
    r.gt = BBox{std::atof(f[12].c_str()), std::atof(f[13].c_str()),
                std::atof(f[14].c_str()), std::atof(f[15].c_str())};
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

void draw_outline(Raster& img, const BBox& box, Rgb color) {
  const int w = img.width, h = img.height;
  auto col_of = [w](double u) {
    return std::clamp(static_cast<int>(std::floor(u * w)), 0, w - 1);
  };
  auto row_of = [h](double v) {
    return std::clamp(static_cast<int>(std::floor(v * h)), 0, h - 1);
  };
  const int x0 = col_of(box.left), x1 = col_of(box.right());
  const int y0 = row_of(box.top), y1 = row_of(box.bottom());
  for (int y = y0; y <= y1; ++y) {
    img.set(y, x0, color);
    img.set(y, x1, color);
  }
  for (int x = x0; x <= x1; ++x) {
    img.set(y0, x, color);
    img.set(y1, x, color);
  }
}

}  // namespace

void render_overlay(const Layout& layout, const BBox& pred, const BBox& gt,
                    const std::string& out_path) {
  Raster img = render_layout(layout, /*exclude_target=*/false,
                             layout.canvas_width, layout.canvas_height);
  draw_outline(img, gt, {0, 190, 0});
  draw_outline(img, pred, {220, 0, 0});  // prediction last, on top
  write_ppm(out_path, img);
}

}  // namespace textplace::eval
