#pragma once

#include <vector>

#include "textplace/tensor.hpp"

namespace textplace::nn {

// All operations validate shapes (std::invalid_argument on mismatch), write
// their forward result into a fresh tape node, and record one backward
// closure that accumulates into the inputs' grad buffers (skipping constants).

// x[n,din] * W[din,dout] + b[dout]
TensorPtr linear(Tape& t, TensorPtr x, TensorPtr w, TensorPtr b);

TensorPtr matmul(Tape& t, TensorPtr a, TensorPtr b);     // [n,k]x[k,m]
TensorPtr matmul_nt(Tape& t, TensorPtr a, TensorPtr b);  // [n,k]x[m,k]^T -> [n,m]
TensorPtr add(Tape& t, TensorPtr a, TensorPtr b);
TensorPtr scale(Tape& t, TensorPtr x, double c);
TensorPtr softmax_rows(Tape& t, TensorPtr x);
TensorPtr gelu(Tape& t, TensorPtr x);
TensorPtr sigmoid(Tape& t, TensorPtr x);

// Per-row normalization to zero mean and unit variance (eps 1e-5), then
// elementwise affine with gain/bias of width cols.
TensorPtr layer_norm(Tape& t, TensorPtr x, TensorPtr gain, TensorPtr bias);

TensorPtr slice_cols(Tape& t, TensorPtr x, int c0, int c1);
TensorPtr concat_cols(Tape& t, const std::vector<TensorPtr>& parts);
TensorPtr concat_rows(Tape& t, const std::vector<TensorPtr>& parts);
TensorPtr take_row(Tape& t, TensorPtr x, int row);
TensorPtr mean_rows(Tape& t, TensorPtr x);

// Embedding lookup: rows of table[v,d] selected by index.
TensorPtr select_rows(Tape& t, TensorPtr table, const std::vector<int>& indices);

// Copy with a new shape of identical element count.
TensorPtr reshape(Tape& t, TensorPtr x, std::vector<int> shape);

// max(x, floor_value) applied to columns [c0, c1); passes gradient only where
// not clamped.
TensorPtr clamp_min_cols(Tape& t, TensorPtr x, int c0, int c1, double floor_value);

// x[C,H,W], w[OC,IC,kh,kw], b[OC]; zero padding.
TensorPtr conv2d(Tape& t, TensorPtr x, TensorPtr w, TensorPtr b, int stride, int pad);

struct AttentionParams {
  TensorPtr wq, bq, wk, bk, wv, bv, wo, bo;
};

// Full bidirectional scaled-dot-product set attention over the rows of x,
// per-head, concatenated and output-projected. No mask, no position signal.
TensorPtr multi_head_self_attention(Tape& t, TensorPtr x,
                                    const AttentionParams& p, int heads);

}  // namespace textplace::nn
