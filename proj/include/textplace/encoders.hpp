#pragma once

#include <string>
#include <utility>
#include <vector>

#include "textplace/layout.hpp"
#include "textplace/ops.hpp"
#include "textplace/rng.hpp"
#include "textplace/tensor.hpp"

namespace textplace::nn {

enum class TokenRole { target_text, context_element, whole_image };

struct FeatureConfig {
  int raster_size = 32;
  int d_model = 64;
  int font_vocab = 8;
  int type_vocab = 5;  // element kinds
  bool use_element_rasters = false;

  // Spatial edge after the three stride-2 convolutions (each maps n -> ceil(n/2)).
  int conv_spatial() const;
  // Width of the concatenated pre-projection feature row:
  // [image d_model | text d_model | bbox 4 | angle | color 3 | counts 2 |
  //  type one-hot | font one-hot].
  int fusion_width() const;
};

inline constexpr int kByteEmbedDim = 32;
inline constexpr int kConvChannels[3] = {8, 16, 32};

struct EncoderParams {
  TensorPtr conv1_w, conv1_b;
  TensorPtr conv2_w, conv2_b;
  TensorPtr conv3_w, conv3_b;
  TensorPtr img_proj_w, img_proj_b;
  TensorPtr byte_embed;  // [256, kByteEmbedDim]
  TensorPtr txt_proj_w, txt_proj_b;
  TensorPtr txt_null;  // [1, d_model], returned as-is for empty text
  TensorPtr fuse_w, fuse_b;
};

EncoderParams make_encoder_params(const FeatureConfig& cfg, Rng& rng);
std::vector<std::pair<std::string, TensorPtr>> named_params(const EncoderParams& p);

// Aspect-preserving nearest-neighbor fit onto a white size x size square.
Raster letterbox(const Raster& src, int size);

// Letterboxed raster as a constant [3, size, size] tensor scaled to [0,1].
TensorPtr raster_to_tensor(const Raster& raster, int size);

TensorPtr encode_image(Tape& t, const Raster& raster, const FeatureConfig& cfg,
                       const EncoderParams& p);
TensorPtr encode_text(Tape& t, const std::string& text, const EncoderParams& p);

// The scalar/categorical feature slots (everything after the two embeddings).
// target_text zeroes the four geometry slots; whole_image zeroes everything.
std::vector<double> element_attribute_vector(const Element& e, TokenRole role,
                                             const FeatureConfig& cfg);

struct ElementToken {
  TensorPtr embedding;  // [1, d_model]
  TokenRole role = TokenRole::context_element;
};

// Appearance raster for the image slot. The element is drawn at a canonical
// full-canvas footprint, never at its real bbox, so the raster carries
// appearance only; geometry reaches the model through the attribute slots
// alone (and not at all for the target).
Raster element_appearance(const Element& e, int size);

// For role whole_image pass a pseudo-element whose raster holds
// render_layout(exclude_target=true); its other attributes are ignored.
ElementToken encode_element(Tape& t, const Element& e, TokenRole role,
                            const FeatureConfig& cfg, const EncoderParams& p);

}  // namespace textplace::nn
