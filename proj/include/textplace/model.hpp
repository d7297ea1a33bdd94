#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "textplace/adamw.hpp"
#include "textplace/encoders.hpp"
#include "textplace/layout.hpp"
#include "textplace/ops.hpp"
#include "textplace/tensor.hpp"

namespace textplace::nn {

struct ModelConfig {
  int layers = 2;
  int heads = 4;
  int d_model = 64;
  int d_ff = 128;
  FeatureConfig feature;  // feature.d_model is kept equal to d_model
  uint64_t seed = 1;
};

// Paper-scale configuration, selectable from the CLI.
ModelConfig paper_model_config();

struct LayerParams {
  TensorPtr ln1_g, ln1_b;
  AttentionParams attn;
  TensorPtr ln2_g, ln2_b;
  TensorPtr ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

// Pre-norm Transformer over the token set {whole_image, contexts..., target},
// read out at the target token, sigmoid head, width/height floored at 1e-4.
struct PlacementModel {
  ModelConfig config;
  EncoderParams enc;
  std::vector<LayerParams> blocks;
  TensorPtr final_ln_g, final_ln_b;
  TensorPtr head_w, head_b;  // [d_model,4], [4]

  explicit PlacementModel(ModelConfig cfg);

  std::vector<std::pair<std::string, TensorPtr>> named_parameters() const;
  std::vector<TensorPtr> parameters() const;

  // [1,4] row (left, top, width, height), differentiable.
  TensorPtr forward(Tape& t, const Layout& layout) const;

  BBox predict(const Layout& layout) const;
  std::vector<BBox> predict_batch(const std::vector<Layout>& layouts) const;

  void save(const std::string& path) const;
  void save(const std::string& path, const AdamW& opt) const;
  static PlacementModel load(const std::string& path);
};

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 8;  // desk default; paper uses 64
  int max_epochs = 150;
  double weight_decay = 0.01;
  uint64_t seed = 1;
  bool verbose = false;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_seconds = 0.0;
};

using TrainLog = std::vector<EpochStats>;

std::string train_log_csv(const TrainLog& log);

struct TrainResult {
  PlacementModel model;  // parameters of the lowest-validation-loss epoch
  TrainLog log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

// Minimizes mean CIoU loss with AdamW; keeps the epoch checkpoint with the
// lowest validation loss. Deterministic given seeds (wall_seconds aside).
TrainResult train(const std::vector<Layout>& train_set,
                  const std::vector<Layout>& val_set,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg);

}  // namespace textplace::nn
