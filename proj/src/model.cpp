#include "textplace/model.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "textplace/checkpoint.hpp"
#include "textplace/metrics.hpp"
#include "textplace/rng.hpp"

namespace textplace::nn {
namespace {

constexpr double kSizeFloor = 1e-4;

void require_valid(const Layout& layout) {
  const auto violations = validate_layout(layout);
  if (!violations.empty())
    throw std::invalid_argument("invalid layout '" + layout.id +
                                "': " + violations.front().rule);
}

std::string layer_name(int i, const char* leaf) {
  return "block" + std::to_string(i) + "." + leaf;
}

}  // namespace

ModelConfig paper_model_config() {
  ModelConfig cfg;
  cfg.layers = 6;
  cfg.heads = 8;
  cfg.d_model = 256;
  cfg.d_ff = 512;
  cfg.feature.d_model = 256;
  return cfg;
}

PlacementModel::PlacementModel(ModelConfig cfg) : config(cfg) {
  config.feature.d_model = config.d_model;
  if (config.layers <= 0 || config.heads <= 0 || config.d_ff <= 0)
    throw std::invalid_argument("bad model config");
  if (config.d_model % config.heads != 0)
    throw std::invalid_argument("d_model not divisible by heads");

  Rng rng(config.seed);
  enc = make_encoder_params(config.feature, rng);
  const int d = config.d_model;
  auto ones = [](int n) {
    TensorPtr t = make_tensor({n});
    std::fill(t->data.begin(), t->data.end(), 1.0);
    return t;
  };
  blocks.reserve(static_cast<size_t>(config.layers));
  for (int i = 0; i < config.layers; ++i) {
    LayerParams lp;
    lp.ln1_g = ones(d);
    lp.ln1_b = make_tensor({d});
    lp.attn.wq = make_param({d, d}, rng, d);
    lp.attn.bq = make_tensor({d});
    lp.attn.wk = make_param({d, d}, rng, d);
    lp.attn.bk = make_tensor({d});
    lp.attn.wv = make_param({d, d}, rng, d);
    lp.attn.bv = make_tensor({d});
    lp.attn.wo = make_param({d, d}, rng, d);
    lp.attn.bo = make_tensor({d});
    lp.ln2_g = ones(d);
    lp.ln2_b = make_tensor({d});
    lp.ffn_w1 = make_param({d, config.d_ff}, rng, d);
    lp.ffn_b1 = make_tensor({config.d_ff});
    lp.ffn_w2 = make_param({config.d_ff, d}, rng, config.d_ff);
    lp.ffn_b2 = make_tensor({d});
    blocks.push_back(std::move(lp));
  }
  final_ln_g = ones(d);
  final_ln_b = make_tensor({d});
  head_w = make_param({d, 4}, rng, d);
  head_b = make_tensor({4});
}

std::vector<std::pair<std::string, TensorPtr>> PlacementModel::named_parameters()
    const {
  auto out = named_params(enc);
  for (int i = 0; i < config.layers; ++i) {
    const LayerParams& lp = blocks[static_cast<size_t>(i)];
    out.emplace_back(layer_name(i, "ln1.g"), lp.ln1_g);
    out.emplace_back(layer_name(i, "ln1.b"), lp.ln1_b);
    out.emplace_back(layer_name(i, "attn.wq"), lp.attn.wq);
    out.emplace_back(layer_name(i, "attn.bq"), lp.attn.bq);
    out.emplace_back(layer_name(i, "attn.wk"), lp.attn.wk);
    out.emplace_back(layer_name(i, "attn.bk"), lp.attn.bk);
    out.emplace_back(layer_name(i, "attn.wv"), lp.attn.wv);
    out.emplace_back(layer_name(i, "attn.bv"), lp.attn.bv);
    out.emplace_back(layer_name(i, "attn.wo"), lp.attn.wo);
    out.emplace_back(layer_name(i, "attn.bo"), lp.attn.bo);
    out.emplace_back(layer_name(i, "ln2.g"), lp.ln2_g);
    out.emplace_back(layer_name(i, "ln2.b"), lp.ln2_b);
    out.emplace_back(layer_name(i, "ffn.w1"), lp.ffn_w1);
    out.emplace_back(layer_name(i, "ffn.b1"), lp.ffn_b1);
    out.emplace_back(layer_name(i, "ffn.w2"), lp.ffn_w2);
    out.emplace_back(layer_name(i, "ffn.b2"), lp.ffn_b2);
  }
  out.emplace_back("final_ln.g", final_ln_g);
  out.emplace_back("final_ln.b", final_ln_b);
  out.emplace_back("head.w", head_w);
  out.emplace_back("head.b", head_b);
  return out;
}

std::vector<TensorPtr> PlacementModel::parameters() const {
  std::vector<TensorPtr> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

TensorPtr PlacementModel::forward(Tape& t, const Layout& layout) const {
  require_valid(layout);
  const int rs = config.feature.raster_size;

  Element whole;
  whole.raster = render_layout(layout, /*exclude_target=*/true, rs, rs);
  std::vector<TensorPtr> rows;
  rows.reserve(layout.elements.size() + 1);
  rows.push_back(
      encode_element(t, whole, TokenRole::whole_image, config.feature, enc)
          .embedding);
  for (size_t i = 0; i < layout.elements.size(); ++i) {
    if (static_cast<int>(i) == layout.target_index) continue;
    rows.push_back(encode_element(t, layout.elements[i],
                                  TokenRole::context_element, config.feature, enc)
                       .embedding);
  }
  rows.push_back(encode_element(t, layout.target(), TokenRole::target_text,
                                config.feature, enc)
                     .embedding);

  TensorPtr x = concat_rows(t, rows);
  for (const LayerParams& lp : blocks) {
    TensorPtr a = multi_head_self_attention(
        t, layer_norm(t, x, lp.ln1_g, lp.ln1_b), lp.attn, config.heads);
    x = add(t, x, a);
    TensorPtr h = linear(t, layer_norm(t, x, lp.ln2_g, lp.ln2_b), lp.ffn_w1,
                         lp.ffn_b1);
    x = add(t, x, linear(t, gelu(t, h), lp.ffn_w2, lp.ffn_b2));
  }
  x = layer_norm(t, x, final_ln_g, final_ln_b);
  TensorPtr target_row = take_row(t, x, x->rows() - 1);
  TensorPtr logits = linear(t, target_row, head_w, head_b);
  return clamp_min_cols(t, sigmoid(t, logits), 2, 4, kSizeFloor);
}

BBox PlacementModel::predict(const Layout& layout) const {
  Tape t;
  TensorPtr out = forward(t, layout);
  return {out->data[0], out->data[1], out->data[2], out->data[3]};
}

std::vector<BBox> PlacementModel::predict_batch(
    const std::vector<Layout>& layouts) const {
  std::vector<BBox> out;
  out.reserve(layouts.size());
  for (size_t i = 0; i < layouts.size(); ++i) {
    try {
      out.push_back(predict(layouts[i]));
    } catch (const std::exception& e) {
      throw std::runtime_error("layout " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

namespace {

nlohmann::json config_json(const ModelConfig& c) {
  return {{"layers", c.layers},
          {"heads", c.heads},
          {"d_model", c.d_model},
          {"d_ff", c.d_ff},
          {"seed", c.seed},
          {"feature",
           {{"raster_size", c.feature.raster_size},
            {"font_vocab", c.feature.font_vocab},
            {"type_vocab", c.feature.type_vocab},
            {"use_element_rasters", c.feature.use_element_rasters}}}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  const auto& f = j.at("feature");
  c.feature.raster_size = f.at("raster_size").get<int>();
  c.feature.font_vocab = f.at("font_vocab").get<int>();
  c.feature.type_vocab = f.at("type_vocab").get<int>();
  c.feature.use_element_rasters = f.at("use_element_rasters").get<bool>();
  c.feature.d_model = c.d_model;
  return c;
}

}  // namespace

void PlacementModel::save(const std::string& path) const {
  Checkpoint ckpt;
  ckpt.config = config_json(config);
  ckpt.tensors = named_parameters();
  save_checkpoint(path, ckpt);
}

void PlacementModel::save(const std::string& path, const AdamW& opt) const {
  Checkpoint ckpt;
  ckpt.config = config_json(config);
  ckpt.tensors = named_parameters();
  ckpt.optimizer.present = true;
  ckpt.optimizer.config = opt.config();
  ckpt.optimizer.step = opt.step_count();
  ckpt.optimizer.m = const_cast<AdamW&>(opt).m();
  ckpt.optimizer.v = const_cast<AdamW&>(opt).v();
  save_checkpoint(path, ckpt);
}

PlacementModel PlacementModel::load(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  PlacementModel model(config_from_json(ckpt.config));
  auto named = model.named_parameters();
  if (named.size() != ckpt.tensors.size())
    throw std::runtime_error("checkpoint tensor count mismatch");
  for (size_t i = 0; i < named.size(); ++i) {
    auto& [name, dst] = named[i];
    auto& [ck_name, src] = ckpt.tensors[i];
    if (name != ck_name || dst->shape != src->shape)
      throw std::runtime_error("checkpoint tensor mismatch at " + ck_name);
    dst->data = src->data;
  }
  return model;
}

std::string train_log_csv(const TrainLog& log) {
  std::string out = "epoch,train_loss,val_loss,wall_seconds\n";
  char line[160];
  for (const EpochStats& e : log) {
    std::snprintf(line, sizeof(line), "%d,%.12g,%.12g,%.3f\n", e.epoch,
                  e.train_loss, e.val_loss, e.wall_seconds);
    out += line;
  }
  return out;
}

namespace {

double example_loss(const PlacementModel& model, const Layout& layout,
                    double grad_scale, bool backward) {
  Tape tape;
  TensorPtr out = model.forward(tape, layout);
  const BBox pred{out->data[0], out->data[1], out->data[2], out->data[3]};
  const BBox gt = layout.target().bbox;
  const CIoUBreakdown bk = textplace::ciou(pred, gt);
  if (!backward) return bk.loss;

  const std::array<double, 4> grad = ciou_loss_grad(pred, gt);
  for (int j = 0; j < 4; ++j) out->grad[static_cast<size_t>(j)] = grad[j] * grad_scale;
  tape.backward();
  return bk.loss;
}

}  // namespace

TrainResult train(const std::vector<Layout>& train_set,
                  const std::vector<Layout>& val_set,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg) {
  if (train_set.empty()) throw std::invalid_argument("empty training set");
  if (val_set.empty()) throw std::invalid_argument("empty validation set");
  if (train_cfg.lr <= 0 || train_cfg.batch_size <= 0 || train_cfg.max_epochs <= 0)
    throw std::invalid_argument("bad training config");
  for (const Layout& l : train_set) require_valid(l);
  for (const Layout& l : val_set) require_valid(l);

  PlacementModel model(model_cfg);
  AdamWConfig opt_cfg;
  opt_cfg.lr = train_cfg.lr;
  opt_cfg.weight_decay = train_cfg.weight_decay;
  AdamW opt(model.parameters(), opt_cfg);
  Rng shuffle_rng(train_cfg.seed);

  TrainResult result{std::move(model), {}, 0, 0.0};
  PlacementModel& m = result.model;
  std::vector<std::vector<double>> best;
  double best_val = 0.0;
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
    // Fisher-Yates with the run's own generator, for reproducible epochs.
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = shuffle_rng.uniform_int(i);
      std::swap(order[i - 1], order[j]);
    }

    double train_loss = 0.0;
    for (size_t begin = 0; begin < order.size();
         begin += static_cast<size_t>(train_cfg.batch_size)) {
      const size_t end = std::min(
          order.size(), begin + static_cast<size_t>(train_cfg.batch_size));
      const double scale = 1.0 / double(end - begin);
      for (size_t k = begin; k < end; ++k) {
        const Layout& layout = train_set[order[k]];
        const double loss = example_loss(m, layout, scale, /*backward=*/true);
        if (!std::isfinite(loss))
          throw std::runtime_error("NaN loss on layout '" + layout.id + "'");
        train_loss += loss;
      }
      opt.step();
      opt.zero_grad();
    }
    train_loss /= double(train_set.size());

    double val_loss = 0.0;
    for (const Layout& layout : val_set)
      val_loss += example_loss(m, layout, 0.0, /*backward=*/false);
    val_loss /= double(val_set.size());
    if (!std::isfinite(val_loss))
      throw std::runtime_error("NaN validation loss at epoch " +
                               std::to_string(epoch));

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.log.push_back({epoch, train_loss, val_loss, wall});
    if (train_cfg.verbose)
      std::fprintf(stderr, "epoch %d train %.6f val %.6f (%.1fs)\n", epoch,
                   train_loss, val_loss, wall);

    if (best.empty() || val_loss < best_val) {
      best_val = val_loss;
      result.best_epoch = epoch;
      best.clear();
      for (const TensorPtr& p : m.parameters()) best.push_back(p->data);
    }
  }

  auto params = m.parameters();
  for (size_t i = 0; i < params.size(); ++i) params[i]->data = best[i];
  result.best_val_loss = best_val;
  return result;
}

}  // namespace textplace::nn
