#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "textplace/adamw.hpp"
#include "textplace/tensor.hpp"

namespace textplace::nn {

// On-disk format: a magic line, an 8-byte little-endian header length, a JSON
// header (free-form config, ordered tensor names/shapes, optional optimizer
// hyperparameters and step), then the tensor payloads as raw little-endian
// doubles in header order, followed by optimizer first/second moments in the
// same order when present. Doubles round-trip bit-exactly.

inline constexpr char kCheckpointMagic[] = "textplace-checkpoint v1\n";

struct OptimizerState {
  bool present = false;
  AdamWConfig config;
  int64_t step = 0;
  std::vector<std::vector<double>> m, v;
};

struct Checkpoint {
  nlohmann::json config;
  std::vector<std::pair<std::string, TensorPtr>> tensors;
  OptimizerState optimizer;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace textplace::nn
