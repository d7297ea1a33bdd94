#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>

#include "textplace/dataset.hpp"
#include "textplace/eval.hpp"
#include "textplace/model.hpp"
#include "textplace/predictor.hpp"
#include "textplace/ppm.hpp"
#include "textplace/prompt.hpp"
#include "textplace/synthetic.hpp"

namespace fs = std::filesystem;
using namespace textplace;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitPredictor = 3;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Layout> load_or_die(const std::string& path) {
  data::LoadResult loaded = data::load_dataset(path);
  if (loaded.skipped_no_text > 0)
    std::fprintf(stderr, "%s: skipped %d record(s) without text elements\n",
                 path.c_str(), loaded.skipped_no_text);
  if (loaded.layouts.empty()) throw std::runtime_error(path + ": no layouts");
  return loaded.layouts;
}

const Layout& layout_at(const std::vector<Layout>& layouts, int index) {
  if (index < 0 || index >= static_cast<int>(layouts.size()))
    throw std::runtime_error("layout index " + std::to_string(index) +
                             " out of range (have " +
                             std::to_string(layouts.size()) + ")");
  return layouts[static_cast<size_t>(index)];
}

BBox parse_box_arg(const std::string& spec) {
  BBox b;
  char extra = 0;
  if (std::sscanf(spec.c_str(), "%lf,%lf,%lf,%lf%c", &b.left, &b.top, &b.width,
                  &b.height, &extra) != 4)
    throw CLI::ValidationError("--pred", "expected left,top,width,height");
  return b;
}

struct GenArgs {
  std::string out;
  data::SynthConfig cfg;
};

int run_gen(const GenArgs& a) {
  const std::vector<Layout> layouts = data::generate_synthetic(a.cfg);
  data::save_dataset(layouts, a.out);
  std::printf("wrote %zu layouts to %s\n", layouts.size(), a.out.c_str());
  return kExitOk;
}

struct TrainArgs {
  std::string data, val, out, log;
  nn::ModelConfig model_cfg;
  nn::TrainConfig train_cfg;
  bool paper_scale = false;
  bool multi_image = false;
  int raster_size = 32;
};

int run_train(const TrainArgs& a) {
  nn::ModelConfig cfg = a.paper_scale ? nn::paper_model_config() : a.model_cfg;
  cfg.seed = a.model_cfg.seed;
  cfg.feature.use_element_rasters = a.multi_image;
  cfg.feature.raster_size = a.raster_size;

  const auto train_set = load_or_die(a.data);
  const auto val_set = load_or_die(a.val);
  nn::TrainResult result = nn::train(train_set, val_set, cfg, a.train_cfg);
  result.model.save(a.out);
  const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
  write_file(log_path, nn::train_log_csv(result.log));
  std::printf("best epoch %d val_loss %.6f -> %s (log %s)\n", result.best_epoch,
              result.best_val_loss, a.out.c_str(), log_path.c_str());
  return kExitOk;
}

struct EvalArgs {
  std::string data, predictor = "transformer", model, out, mock_reply;
  int workers = 4;
  int overlays = 0;
  int retries = 3;
};

int run_eval(const EvalArgs& a) {
  const auto layouts = load_or_die(a.data);
  fs::create_directories(a.out);

  std::mutex transcript_mu;
  std::string transcripts;
  eval::LayoutPredictor fn;
  std::shared_ptr<nn::PlacementModel> model;
  std::shared_ptr<vlm::MockEndpoint> mock;
  vlm::QueryOptions qopts;
  qopts.max_retries = a.retries;

  if (a.predictor == "transformer") {
    model = std::make_shared<nn::PlacementModel>(nn::PlacementModel::load(a.model));
    fn = [model](const Layout& layout) {
      const BBox box = model->predict(layout);
      vlm::PredictorResponse resp;
      resp.raw = vlm::canonical_response(box);
      resp.parsed = box;
      resp.status = vlm::ResponseStatus::valid;
      return resp;
    };
  } else {
    auto query = [&](const Layout& layout, vlm::PredictorEndpoint& endpoint) {
      const vlm::PromptDocument prompt = vlm::serialize_prompt(layout);
      vlm::PredictorResponse resp = vlm::query_predictor(prompt, endpoint, qopts);
      std::lock_guard lock(transcript_mu);
      transcripts += vlm::transcript_json(layout.id, prompt, resp) + "\n";
      return resp;
    };
    if (a.predictor == "mock") {
      mock = std::make_shared<vlm::MockEndpoint>();
      if (!a.mock_reply.empty()) mock->set_default_reply(a.mock_reply);
      fn = [query, mock](const Layout& l) { return query(l, *mock); };
    } else if (a.predictor == "external") {
      fn = [query](const Layout& l) {
        // One client per call: httplib clients are not shareable across threads.
        vlm::HttpEndpoint endpoint(vlm::endpoint_config_from_env());
        return query(l, endpoint);
      };
    } else {
      throw CLI::ValidationError("--predictor",
                                 "expected transformer|external|mock");
    }
  }

  const auto rows = eval::evaluate(fn, layouts, a.predictor, a.workers);
  write_file(a.out + "/metrics.csv", eval::metrics_csv(rows));
  const eval::ReportTable table = eval::make_report(rows);
  write_file(a.out + "/table.csv", eval::report_csv(table));
  try {
    write_file(a.out + "/buckets_area.csv",
               eval::buckets_csv(eval::bucket_report(rows, eval::BucketBy::gt_area)));
    write_file(a.out + "/buckets_ntext.csv",
               eval::buckets_csv(eval::bucket_report(rows, eval::BucketBy::n_texts)));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bucket reports skipped: %s\n", e.what());
  }
  if (!transcripts.empty())
    write_file(a.out + "/transcripts.jsonl", transcripts);

  if (a.overlays > 0) {
    fs::create_directories(a.out + "/overlays");
    int done = 0;
    for (size_t i = 0; i < rows.size() && done < a.overlays; ++i) {
      if (!rows[i].pred) continue;
      char name[64];
      std::snprintf(name, sizeof(name), "%03zu_", i);
      eval::render_overlay(layouts[i], *rows[i].pred, rows[i].gt,
                           a.out + "/overlays/" + name + rows[i].layout_id +
                               ".ppm");
      ++done;
    }
  }

  std::fputs(eval::report_csv(table).c_str(), stdout);
  if (table.all.count == table.all.invalid)
    std::fprintf(stderr, "note: no valid predictions (metrics empty)\n");
  return kExitOk;
}

struct PromptArgs {
  std::string data, out;
  int index = 0;
};

int run_prompt(const PromptArgs& a) {
  const auto layouts = load_or_die(a.data);
  const vlm::PromptDocument doc =
      vlm::serialize_prompt(layout_at(layouts, a.index));
  std::fputs(doc.records_text().c_str(), stdout);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_file(a.out + "/records.jsonl", doc.records_text());
    write_ppm(a.out + "/prompt.ppm", doc.image);
  }
  return kExitOk;
}

struct QueryArgs {
  std::string data, predictor = "mock", mock_reply;
  int index = 0;
  int retries = 3;
};

int run_query(const QueryArgs& a) {
  const auto layouts = load_or_die(a.data);
  const Layout& layout = layout_at(layouts, a.index);
  const vlm::PromptDocument prompt = vlm::serialize_prompt(layout);
  vlm::QueryOptions qopts;
  qopts.max_retries = a.retries;

  vlm::PredictorResponse resp;
  if (a.predictor == "mock") {
    vlm::MockEndpoint endpoint;
    if (!a.mock_reply.empty()) endpoint.set_default_reply(a.mock_reply);
    resp = vlm::query_predictor(prompt, endpoint, qopts);
  } else if (a.predictor == "external") {
    vlm::HttpEndpoint endpoint(vlm::endpoint_config_from_env());
    resp = vlm::query_predictor(prompt, endpoint, qopts);
  } else {
    throw CLI::ValidationError("--predictor", "expected external|mock");
  }
  std::printf("%s\n", vlm::transcript_json(layout.id, prompt, resp).c_str());
  return kExitOk;
}

struct ReportArgs {
  std::string metrics, out;
};

int run_report(const ReportArgs& a) {
  const auto rows = eval::parse_metrics_csv(read_file(a.metrics));
  fs::create_directories(a.out);
  const eval::ReportTable table = eval::make_report(rows);
  write_file(a.out + "/table.csv", eval::report_csv(table));
  try {
    write_file(a.out + "/buckets_area.csv",
               eval::buckets_csv(eval::bucket_report(rows, eval::BucketBy::gt_area)));
    write_file(a.out + "/buckets_ntext.csv",
               eval::buckets_csv(eval::bucket_report(rows, eval::BucketBy::n_texts)));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bucket reports skipped: %s\n", e.what());
  }
  std::fputs(eval::report_csv(table).c_str(), stdout);
  return kExitOk;
}

struct RenderArgs {
  std::string data, pred, out = "overlay.ppm";
  int index = 0;
};

int run_render(const RenderArgs& a) {
  const auto layouts = load_or_die(a.data);
  const Layout& layout = layout_at(layouts, a.index);
  eval::render_overlay(layout, parse_box_arg(a.pred), layout.target().bbox,
                       a.out);
  std::printf("wrote %s\n", a.out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text box placement: data, training, prediction, evaluation"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* cmd_gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  cmd_gen->add_option("--out", gen.out, "Output JSONL path")->required();
  cmd_gen->add_option("--count", gen.cfg.count, "Layout count");
  cmd_gen->add_option("--seed", gen.cfg.seed, "Generator seed");
  cmd_gen->add_option("--canvas", gen.cfg.canvas_px, "Canvas size in pixels");
  cmd_gen->add_option("--min-contexts", gen.cfg.min_contexts, "Min context elements");
  cmd_gen->add_option("--max-contexts", gen.cfg.max_contexts, "Max context elements");
  cmd_gen->add_option("--min-text", gen.cfg.min_text_size, "Min target box side");
  cmd_gen->add_option("--max-text", gen.cfg.max_text_size, "Max target box side");
  cmd_gen->add_flag("--container", gen.cfg.container_mode,
                    "Text-container benchmark mode");

  TrainArgs train;
  CLI::App* cmd_train = app.add_subcommand("train", "Train the placement model");
  cmd_train->add_option("--data", train.data, "Training JSONL")->required();
  cmd_train->add_option("--val", train.val, "Validation JSONL")->required();
  cmd_train->add_option("--out", train.out, "Checkpoint path")->required();
  cmd_train->add_option("--log", train.log, "Training log CSV path");
  cmd_train->add_option("--epochs", train.train_cfg.max_epochs, "Max epochs");
  cmd_train->add_option("--batch", train.train_cfg.batch_size, "Batch size");
  cmd_train->add_option("--lr", train.train_cfg.lr, "Learning rate");
  cmd_train->add_option("--seed", train.model_cfg.seed, "Init/shuffle seed");
  cmd_train->add_option("--raster-size", train.raster_size, "Encoder raster size");
  cmd_train->add_flag("--multi-image", train.multi_image,
                      "Embed every element's raster");
  cmd_train->add_flag("--paper-scale", train.paper_scale,
                      "Paper-scale model (6 layers, 8 heads, 256 width)");
  cmd_train->add_flag("--verbose", train.train_cfg.verbose, "Per-epoch progress");

  EvalArgs eval_args;
  CLI::App* cmd_eval = app.add_subcommand("eval", "Evaluate a predictor");
  cmd_eval->add_option("--data", eval_args.data, "Test JSONL")->required();
  cmd_eval->add_option("--predictor", eval_args.predictor,
                       "transformer|external|mock");
  cmd_eval->add_option("--model", eval_args.model, "Checkpoint (transformer)");
  cmd_eval->add_option("--out", eval_args.out, "Output directory")->required();
  cmd_eval->add_option("--workers", eval_args.workers, "Worker threads");
  cmd_eval->add_option("--overlays", eval_args.overlays, "Overlay PPM count");
  cmd_eval->add_option("--mock-reply", eval_args.mock_reply, "Mock reply body");
  cmd_eval->add_option("--retries", eval_args.retries, "Retry budget");

  PromptArgs prompt;
  CLI::App* cmd_prompt = app.add_subcommand("prompt", "Emit a layout's prompt");
  cmd_prompt->add_option("--data", prompt.data, "Dataset JSONL")->required();
  cmd_prompt->add_option("--index", prompt.index, "Layout index");
  cmd_prompt->add_option("--out", prompt.out, "Directory for records + image");

  QueryArgs query;
  CLI::App* cmd_query = app.add_subcommand("query", "Query one layout");
  cmd_query->add_option("--data", query.data, "Dataset JSONL")->required();
  cmd_query->add_option("--index", query.index, "Layout index");
  cmd_query->add_option("--predictor", query.predictor, "external|mock");
  cmd_query->add_option("--mock-reply", query.mock_reply, "Mock reply body");
  cmd_query->add_option("--retries", query.retries, "Retry budget");

  ReportArgs report;
  CLI::App* cmd_report = app.add_subcommand("report", "Rebuild tables from metrics");
  cmd_report->add_option("--metrics", report.metrics, "metrics.csv path")->required();
  cmd_report->add_option("--out", report.out, "Output directory")->required();

  RenderArgs render;
  CLI::App* cmd_render = app.add_subcommand("render", "Render prediction overlay");
  cmd_render->add_option("--data", render.data, "Dataset JSONL")->required();
  cmd_render->add_option("--index", render.index, "Layout index");
  cmd_render->add_option("--pred", render.pred, "left,top,width,height")->required();
  cmd_render->add_option("--out", render.out, "Output PPM path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (cmd_gen->parsed()) return run_gen(gen);
    if (cmd_train->parsed()) {
      train.train_cfg.seed = train.model_cfg.seed;
      return run_train(train);
    }
    if (cmd_eval->parsed()) {
      if (eval_args.predictor == "transformer" && eval_args.model.empty()) {
        std::fprintf(stderr, "--model is required with --predictor transformer\n");
        return kExitUsage;
      }
      return run_eval(eval_args);
    }
    if (cmd_prompt->parsed()) return run_prompt(prompt);
    if (cmd_query->parsed()) return run_query(query);
    if (cmd_report->parsed()) return run_report(report);
    if (cmd_render->parsed()) return run_render(render);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitUsage;
  } catch (const vlm::PredictorError& e) {
    std::fprintf(stderr, "predictor error: %s\n", e.what());
    return kExitPredictor;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
