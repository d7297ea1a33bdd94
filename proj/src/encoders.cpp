#include "textplace/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace textplace::nn {
namespace {

constexpr double kPi = 3.14159265358979323846;

TensorPtr conv_block(Tape& t, TensorPtr x, TensorPtr w, TensorPtr b) {
  return gelu(t, conv2d(t, x, w, b, /*stride=*/2, /*pad=*/1));
}

}  // namespace

int FeatureConfig::conv_spatial() const {
  int s = raster_size;
  for (int i = 0; i < 3; ++i) s = (s + 1) / 2;
  return s;
}

int FeatureConfig::fusion_width() const {
  return 2 * d_model + 4 + 1 + 3 + 2 + type_vocab + font_vocab;
}

EncoderParams make_encoder_params(const FeatureConfig& cfg, Rng& rng) {
  if (cfg.raster_size <= 0 || cfg.d_model <= 0 || cfg.font_vocab <= 0)
    throw std::invalid_argument("bad feature config");
  const int c1 = kConvChannels[0], c2 = kConvChannels[1], c3 = kConvChannels[2];
  const int s = cfg.conv_spatial();
  EncoderParams p;
  p.conv1_w = make_param({c1, 3, 3, 3}, rng, 3 * 9);
  p.conv1_b = make_param({c1}, rng, 3 * 9);
  p.conv2_w = make_param({c2, c1, 3, 3}, rng, c1 * 9);
  p.conv2_b = make_param({c2}, rng, c1 * 9);
  p.conv3_w = make_param({c3, c2, 3, 3}, rng, c2 * 9);
  p.conv3_b = make_param({c3}, rng, c2 * 9);
  p.img_proj_w = make_param({c3 * s * s, cfg.d_model}, rng, c3 * s * s);
  p.img_proj_b = make_param({cfg.d_model}, rng, c3 * s * s);
  p.byte_embed = make_param({256, kByteEmbedDim}, rng, kByteEmbedDim);
  p.txt_proj_w = make_param({kByteEmbedDim, cfg.d_model}, rng, kByteEmbedDim);
  p.txt_proj_b = make_param({cfg.d_model}, rng, kByteEmbedDim);
  p.txt_null = make_param({1, cfg.d_model}, rng, cfg.d_model);
  p.fuse_w = make_param({cfg.fusion_width(), cfg.d_model}, rng, cfg.fusion_width());
  p.fuse_b = make_param({cfg.d_model}, rng, cfg.fusion_width());
  return p;
}

std::vector<std::pair<std::string, TensorPtr>> named_params(const EncoderParams& p) {
  return {
      {"enc.conv1.w", p.conv1_w},       {"enc.conv1.b", p.conv1_b},
      {"enc.conv2.w", p.conv2_w},       {"enc.conv2.b", p.conv2_b},
      {"enc.conv3.w", p.conv3_w},       {"enc.conv3.b", p.conv3_b},
      {"enc.img_proj.w", p.img_proj_w}, {"enc.img_proj.b", p.img_proj_b},
      {"enc.byte_embed", p.byte_embed}, {"enc.txt_proj.w", p.txt_proj_w},
      {"enc.txt_proj.b", p.txt_proj_b}, {"enc.txt_null", p.txt_null},
      {"enc.fuse.w", p.fuse_w},         {"enc.fuse.b", p.fuse_b},
  };
}

Raster letterbox(const Raster& src, int size) {
  if (size <= 0) throw std::invalid_argument("invalid raster size");
  Raster out(size, size);
  if (src.width <= 0 || src.height <= 0) return out;
  const double scale = std::min(double(size) / src.width, double(size) / src.height);
  const int w = std::max(1, int(std::lround(src.width * scale)));
  const int h = std::max(1, int(std::lround(src.height * scale)));
  const int x0 = (size - w) / 2, y0 = (size - h) / 2;
  for (int r = 0; r < h; ++r) {
    const int sr = std::min(src.height - 1, int(double(r) * src.height / h));
    for (int c = 0; c < w; ++c) {
      const int sc = std::min(src.width - 1, int(double(c) * src.width / w));
      out.set(y0 + r, x0 + c, src.get(sr, sc));
    }
  }
  return out;
}

TensorPtr raster_to_tensor(const Raster& raster, int size) {
  const Raster fit = letterbox(raster, size);
  TensorPtr x = make_tensor({3, size, size}, /*with_grad=*/false);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const Rgb px = fit.get(r, c);
      x->data[(0 * size + r) * size + c] = px.r / 255.0;
      x->data[(1 * size + r) * size + c] = px.g / 255.0;
      x->data[(2 * size + r) * size + c] = px.b / 255.0;
    }
  return x;
}

TensorPtr encode_image(Tape& t, const Raster& raster, const FeatureConfig& cfg,
                       const EncoderParams& p) {
  TensorPtr x = raster_to_tensor(raster, cfg.raster_size);
  x = conv_block(t, x, p.conv1_w, p.conv1_b);
  x = conv_block(t, x, p.conv2_w, p.conv2_b);
  x = conv_block(t, x, p.conv3_w, p.conv3_b);
  const int flat = static_cast<int>(x->numel());
  return linear(t, reshape(t, x, {1, flat}), p.img_proj_w, p.img_proj_b);
}

TensorPtr encode_text(Tape& t, const std::string& text, const EncoderParams& p) {
  if (text.empty()) return p.txt_null;
  std::vector<int> bytes;
  bytes.reserve(text.size());
  for (unsigned char ch : text) bytes.push_back(ch);
  TensorPtr pooled = mean_rows(t, select_rows(t, p.byte_embed, bytes));
  return linear(t, pooled, p.txt_proj_w, p.txt_proj_b);
}

std::vector<double> element_attribute_vector(const Element& e, TokenRole role,
                                             const FeatureConfig& cfg) {
  std::vector<double> v(4 + 1 + 3 + 2 + cfg.type_vocab + cfg.font_vocab, 0.0);
  if (role == TokenRole::whole_image) return v;
  if (role != TokenRole::target_text) {
    v[0] = e.bbox.left;
    v[1] = e.bbox.top;
    v[2] = e.bbox.width;
    v[3] = e.bbox.height;
  }
  v[4] = e.angle * kPi / 180.0;
  v[5] = e.color.r / 255.0;
  v[6] = e.color.g / 255.0;
  v[7] = e.color.b / 255.0;
  v[8] = e.char_count / 100.0;
  v[9] = e.line_count / 100.0;
  const int kind = static_cast<int>(e.kind);
  if (kind >= 0 && kind < cfg.type_vocab) v[10 + kind] = 1.0;
  const int font = (e.font_id >= 0 && e.font_id < cfg.font_vocab) ? e.font_id : 0;
  v[10 + cfg.type_vocab + font] = 1.0;
  return v;
}

Raster element_appearance(const Element& e, int size) {
  Element flat = e;
  flat.bbox = {0.0, 0.0, 1.0, 1.0};
  return render_element(flat, size, size);
}

ElementToken encode_element(Tape& t, const Element& e, TokenRole role,
                            const FeatureConfig& cfg, const EncoderParams& p) {
  if (!e.bbox.finite() || e.bbox.width < 0.0 || e.bbox.height < 0.0)
    throw std::invalid_argument("invalid element");

  TensorPtr img;
  if (role == TokenRole::whole_image) {
    if (!e.raster) throw std::invalid_argument("whole-image raster missing");
    img = encode_image(t, *e.raster, cfg, p);
  } else if (role == TokenRole::target_text || cfg.use_element_rasters) {
    img = encode_image(t, element_appearance(e, cfg.raster_size), cfg, p);
  } else {
    img = make_tensor({1, cfg.d_model}, /*with_grad=*/false);
  }

  TensorPtr txt = role == TokenRole::whole_image
                      ? TensorPtr(p.txt_null)
                      : encode_text(t, e.text, p);
  TensorPtr attrs = make_const({1, cfg.fusion_width() - 2 * cfg.d_model},
                               element_attribute_vector(e, role, cfg));
  TensorPtr fused = linear(t, concat_cols(t, {img, txt, attrs}), p.fuse_w, p.fuse_b);
  return {fused, role};
}

}  // namespace textplace::nn
