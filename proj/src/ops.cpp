#include "textplace/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace textplace::nn {
namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void require_matrix(const TensorPtr& x, const char* name) {
  require(x != nullptr && x->shape.size() == 2,
          std::string(name) + ": expected a 2-d tensor");
}

}  // namespace

TensorPtr matmul(Tape& t, TensorPtr a, TensorPtr b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const int n = a->rows(), k = a->cols(), m = b->cols();
  require(b->rows() == k, "matmul: inner dimensions differ");
  TensorPtr out = t.make({n, m});
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < k; ++p) {
      const double av = a->at(i, p);
      if (av == 0.0) continue;
      for (int j = 0; j < m; ++j) out->at(i, j) += av * b->at(p, j);
    }
  t.record([a, b, out, n, k, m] {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        const double g = out->gat(i, j);
        if (g == 0.0) continue;
        if (a->has_grad())
          for (int p = 0; p < k; ++p) a->gat(i, p) += g * b->at(p, j);
        if (b->has_grad())
          for (int p = 0; p < k; ++p) b->gat(p, j) += g * a->at(i, p);
      }
  });
  return out;
}

TensorPtr matmul_nt(Tape& t, TensorPtr a, TensorPtr b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const int n = a->rows(), k = a->cols(), m = b->rows();
  require(b->cols() == k, "matmul_nt: inner dimensions differ");
  TensorPtr out = t.make({n, m});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += a->at(i, p) * b->at(j, p);
      out->at(i, j) = s;
    }
  t.record([a, b, out, n, k, m] {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        const double g = out->gat(i, j);
        if (g == 0.0) continue;
        if (a->has_grad())
          for (int p = 0; p < k; ++p) a->gat(i, p) += g * b->at(j, p);
        if (b->has_grad())
          for (int p = 0; p < k; ++p) b->gat(j, p) += g * a->at(i, p);
      }
  });
  return out;
}

TensorPtr linear(Tape& t, TensorPtr x, TensorPtr w, TensorPtr b) {
  require_matrix(x, "linear");
  require_matrix(w, "linear");
  require(b != nullptr && b->shape.size() == 1, "linear: bias must be 1-d");
  const int n = x->rows(), din = x->cols(), dout = w->cols();
  require(w->rows() == din, "linear: weight rows differ from input width");
  require(b->shape[0] == dout, "linear: bias width differs from output width");
  TensorPtr out = t.make({n, dout});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dout; ++j) out->at(i, j) = b->data[j];
    for (int p = 0; p < din; ++p) {
      const double xv = x->at(i, p);
      if (xv == 0.0) continue;
      for (int j = 0; j < dout; ++j) out->at(i, j) += xv * w->at(p, j);
    }
  }
  t.record([x, w, b, out, n, din, dout] {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < dout; ++j) {
        const double g = out->gat(i, j);
        if (g == 0.0) continue;
        if (b->has_grad()) b->grad[j] += g;
        if (w->has_grad())
          for (int p = 0; p < din; ++p) w->gat(p, j) += g * x->at(i, p);
        if (x->has_grad())
          for (int p = 0; p < din; ++p) x->gat(i, p) += g * w->at(p, j);
      }
  });
  return out;
}

TensorPtr add(Tape& t, TensorPtr a, TensorPtr b) {
  require(a != nullptr && b != nullptr && a->shape == b->shape,
          "add: shapes differ");
  TensorPtr out = t.make(a->shape);
  const size_t n = out->numel();
  for (size_t i = 0; i < n; ++i) out->data[i] = a->data[i] + b->data[i];
  t.record([a, b, out, n] {
    for (size_t i = 0; i < n; ++i) {
      const double g = out->grad[i];
      if (a->has_grad()) a->grad[i] += g;
      if (b->has_grad()) b->grad[i] += g;
    }
  });
  return out;
}

TensorPtr scale(Tape& t, TensorPtr x, double c) {
  require(x != nullptr, "scale: null input");
  TensorPtr out = t.make(x->shape);
  const size_t n = out->numel();
  for (size_t i = 0; i < n; ++i) out->data[i] = c * x->data[i];
  t.record([x, out, c, n] {
    if (!x->has_grad()) return;
    for (size_t i = 0; i < n; ++i) x->grad[i] += c * out->grad[i];
  });
  return out;
}

TensorPtr softmax_rows(Tape& t, TensorPtr x) {
  require_matrix(x, "softmax_rows");
  const int n = x->rows(), m = x->cols();
  require(m > 0, "softmax_rows: empty rows");
  TensorPtr out = t.make({n, m});
  for (int i = 0; i < n; ++i) {
    double mx = x->at(i, 0);
    for (int j = 1; j < m; ++j) mx = std::max(mx, x->at(i, j));
    double denom = 0.0;
    for (int j = 0; j < m; ++j) {
      const double e = std::exp(x->at(i, j) - mx);
      out->at(i, j) = e;
      denom += e;
    }
    for (int j = 0; j < m; ++j) out->at(i, j) /= denom;
  }
  t.record([x, out, n, m] {
    if (!x->has_grad()) return;
    for (int i = 0; i < n; ++i) {
      double dot = 0.0;
      for (int j = 0; j < m; ++j) dot += out->gat(i, j) * out->at(i, j);
      for (int j = 0; j < m; ++j)
        x->gat(i, j) += out->at(i, j) * (out->gat(i, j) - dot);
    }
  });
  return out;
}

TensorPtr gelu(Tape& t, TensorPtr x) {
  require(x != nullptr, "gelu: null input");
  TensorPtr out = t.make(x->shape);
  const size_t n = out->numel();
  for (size_t i = 0; i < n; ++i) {
    const double v = x->data[i];
    out->data[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  t.record([x, out, n] {
    if (!x->has_grad()) return;
    for (size_t i = 0; i < n; ++i) {
      const double v = x->data[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      x->grad[i] += out->grad[i] * (cdf + v * pdf);
    }
  });
  return out;
}

TensorPtr sigmoid(Tape& t, TensorPtr x) {
  require(x != nullptr, "sigmoid: null input");
  TensorPtr out = t.make(x->shape);
  const size_t n = out->numel();
  for (size_t i = 0; i < n; ++i)
    out->data[i] = 1.0 / (1.0 + std::exp(-x->data[i]));
  t.record([x, out, n] {
    if (!x->has_grad()) return;
    for (size_t i = 0; i < n; ++i) {
      const double y = out->data[i];
      x->grad[i] += out->grad[i] * y * (1.0 - y);
    }
  });
  return out;
}

TensorPtr layer_norm(Tape& t, TensorPtr x, TensorPtr gain, TensorPtr bias) {
  require_matrix(x, "layer_norm");
  const int n = x->rows(), m = x->cols();
  require(gain != nullptr && gain->shape.size() == 1 && gain->shape[0] == m,
          "layer_norm: gain width differs from input width");
  require(bias != nullptr && bias->shape.size() == 1 && bias->shape[0] == m,
          "layer_norm: bias width differs from input width");
  TensorPtr out = t.make({n, m});
  // Keep per-row statistics and normalized values for the backward pass.
  auto inv_std = std::make_shared<std::vector<double>>(n);
  auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    double mean = 0.0;
    for (int j = 0; j < m; ++j) mean += x->at(i, j);
    mean /= m;
    double var = 0.0;
    for (int j = 0; j < m; ++j) {
      const double d = x->at(i, j) - mean;
      var += d * d;
    }
    var /= m;
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    (*inv_std)[i] = is;
    for (int j = 0; j < m; ++j) {
      const double h = (x->at(i, j) - mean) * is;
      (*xhat)[static_cast<size_t>(i) * m + j] = h;
      out->at(i, j) = gain->data[j] * h + bias->data[j];
    }
  }
  t.record([x, gain, bias, out, inv_std, xhat, n, m] {
    for (int i = 0; i < n; ++i) {
      double sum_g = 0.0, sum_gh = 0.0;
      for (int j = 0; j < m; ++j) {
        const double dy = out->gat(i, j);
        const double h = (*xhat)[static_cast<size_t>(i) * m + j];
        if (gain->has_grad()) gain->grad[j] += dy * h;
        if (bias->has_grad()) bias->grad[j] += dy;
        const double gdy = gain->data[j] * dy;
        sum_g += gdy;
        sum_gh += gdy * h;
      }
      if (!x->has_grad()) continue;
      const double is = (*inv_std)[i];
      for (int j = 0; j < m; ++j) {
        const double gdy = gain->data[j] * out->gat(i, j);
        const double h = (*xhat)[static_cast<size_t>(i) * m + j];
        x->gat(i, j) += is * (gdy - sum_g / m - h * sum_gh / m);
      }
    }
  });
  return out;
}

TensorPtr slice_cols(Tape& t, TensorPtr x, int c0, int c1) {
  require_matrix(x, "slice_cols");
  require(c0 >= 0 && c0 < c1 && c1 <= x->cols(), "slice_cols: range out of bounds");
  const int n = x->rows(), m = c1 - c0;
  TensorPtr out = t.make({n, m});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out->at(i, j) = x->at(i, c0 + j);
  t.record([x, out, c0, n, m] {
    if (!x->has_grad()) return;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) x->gat(i, c0 + j) += out->gat(i, j);
  });
  return out;
}

TensorPtr concat_cols(Tape& t, const std::vector<TensorPtr>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  int n = -1, total = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (n < 0) n = p->rows();
    require(p->rows() == n, "concat_cols: row counts differ");
    total += p->cols();
  }
  TensorPtr out = t.make({n, total});
  int off = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p->cols(); ++j) out->at(i, off + j) = p->at(i, j);
    off += p->cols();
  }
  t.record([parts, out, n] {
    int off = 0;
    for (const auto& p : parts) {
      if (p->has_grad())
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < p->cols(); ++j) p->gat(i, j) += out->gat(i, off + j);
      off += p->cols();
    }
  });
  return out;
}

TensorPtr concat_rows(Tape& t, const std::vector<TensorPtr>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  int m = -1, total = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (m < 0) m = p->cols();
    require(p->cols() == m, "concat_rows: column counts differ");
    total += p->rows();
  }
  TensorPtr out = t.make({total, m});
  int off = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < p->rows(); ++i)
      for (int j = 0; j < m; ++j) out->at(off + i, j) = p->at(i, j);
    off += p->rows();
  }
  t.record([parts, out, m] {
    int off = 0;
    for (const auto& p : parts) {
      if (p->has_grad())
        for (int i = 0; i < p->rows(); ++i)
          for (int j = 0; j < m; ++j) p->gat(i, j) += out->gat(off + i, j);
      off += p->rows();
    }
  });
  return out;
}

TensorPtr take_row(Tape& t, TensorPtr x, int row) {
  require_matrix(x, "take_row");
  require(row >= 0 && row < x->rows(), "take_row: row out of range");
  const int m = x->cols();
  TensorPtr out = t.make({1, m});
  for (int j = 0; j < m; ++j) out->at(0, j) = x->at(row, j);
  t.record([x, out, row, m] {
    if (!x->has_grad()) return;
    for (int j = 0; j < m; ++j) x->gat(row, j) += out->gat(0, j);
  });
  return out;
}

TensorPtr mean_rows(Tape& t, TensorPtr x) {
  require_matrix(x, "mean_rows");
  const int n = x->rows(), m = x->cols();
  require(n > 0, "mean_rows: no rows");
  TensorPtr out = t.make({1, m});
  for (int j = 0; j < m; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x->at(i, j);
    out->at(0, j) = s / n;
  }
  t.record([x, out, n, m] {
    if (!x->has_grad()) return;
    for (int j = 0; j < m; ++j) {
      const double g = out->gat(0, j) / n;
      for (int i = 0; i < n; ++i) x->gat(i, j) += g;
    }
  });
  return out;
}

TensorPtr select_rows(Tape& t, TensorPtr table, const std::vector<int>& indices) {
  require_matrix(table, "select_rows");
  const int v = table->rows(), m = table->cols();
  for (int idx : indices)
    require(idx >= 0 && idx < v, "select_rows: index out of range");
  const int n = static_cast<int>(indices.size());
  require(n > 0, "select_rows: no indices");
  TensorPtr out = t.make({n, m});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out->at(i, j) = table->at(indices[i], j);
  t.record([table, out, indices, n, m] {
    if (!table->has_grad()) return;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) table->gat(indices[i], j) += out->gat(i, j);
  });
  return out;
}

TensorPtr reshape(Tape& t, TensorPtr x, std::vector<int> shape) {
  require(x != nullptr, "reshape: null input");
  require(shape_numel(shape) == x->numel(), "reshape: element count differs");
  TensorPtr out = t.make(std::move(shape));
  out->data = x->data;
  t.record([x, out] {
    if (!x->has_grad()) return;
    for (size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i];
  });
  return out;
}

TensorPtr clamp_min_cols(Tape& t, TensorPtr x, int c0, int c1, double floor_value) {
  require_matrix(x, "clamp_min_cols");
  require(c0 >= 0 && c0 < c1 && c1 <= x->cols(),
          "clamp_min_cols: range out of bounds");
  const int n = x->rows(), m = x->cols();
  TensorPtr out = t.make({n, m});
  out->data = x->data;
  for (int i = 0; i < n; ++i)
    for (int j = c0; j < c1; ++j)
      out->at(i, j) = std::max(out->at(i, j), floor_value);
  t.record([x, out, c0, c1, floor_value, n, m] {
    if (!x->has_grad()) return;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        const bool clamped = j >= c0 && j < c1 && x->at(i, j) < floor_value;
        if (!clamped) x->gat(i, j) += out->gat(i, j);
      }
  });
  return out;
}

TensorPtr conv2d(Tape& t, TensorPtr x, TensorPtr w, TensorPtr b, int stride,
                 int pad) {
  require(x != nullptr && x->shape.size() == 3, "conv2d: input must be [C,H,W]");
  require(w != nullptr && w->shape.size() == 4,
          "conv2d: weight must be [OC,IC,KH,KW]");
  require(b != nullptr && b->shape.size() == 1, "conv2d: bias must be 1-d");
  require(stride >= 1 && pad >= 0, "conv2d: bad stride or padding");
  const int ic = x->shape[0], h = x->shape[1], win = x->shape[2];
  const int oc = w->shape[0], kh = w->shape[2], kw = w->shape[3];
  require(w->shape[1] == ic, "conv2d: channel counts differ");
  require(b->shape[0] == oc, "conv2d: bias width differs from out channels");
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (win + 2 * pad - kw) / stride + 1;
  require(oh > 0 && ow > 0, "conv2d: empty output");

  auto xi = [h, win](int c, int r, int col) { return (c * h + r) * win + col; };
  auto wi = [ic, kh, kw](int o, int c, int r, int col) {
    return ((o * ic + c) * kh + r) * kw + col;
  };
  auto oi = [oh, ow](int o, int r, int col) { return (o * oh + r) * ow + col; };

  TensorPtr out = t.make({oc, oh, ow});
  for (int o = 0; o < oc; ++o)
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c) {
        double s = b->data[o];
        for (int ci = 0; ci < ic; ++ci)
          for (int fr = 0; fr < kh; ++fr) {
            const int sr = r * stride - pad + fr;
            if (sr < 0 || sr >= h) continue;
            for (int fc = 0; fc < kw; ++fc) {
              const int sc = c * stride - pad + fc;
              if (sc < 0 || sc >= win) continue;
              s += x->data[xi(ci, sr, sc)] * w->data[wi(o, ci, fr, fc)];
            }
          }
        out->data[oi(o, r, c)] = s;
      }
  t.record([x, w, b, out, xi, wi, oi, ic, h, win, oc, kh, kw, oh, ow, stride,
            pad] {
    for (int o = 0; o < oc; ++o)
      for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
          const double g = out->grad[oi(o, r, c)];
          if (g == 0.0) continue;
          if (b->has_grad()) b->grad[o] += g;
          for (int ci = 0; ci < ic; ++ci)
            for (int fr = 0; fr < kh; ++fr) {
              const int sr = r * stride - pad + fr;
              if (sr < 0 || sr >= h) continue;
              for (int fc = 0; fc < kw; ++fc) {
                const int sc = c * stride - pad + fc;
                if (sc < 0 || sc >= win) continue;
                if (w->has_grad())
                  w->grad[wi(o, ci, fr, fc)] += g * x->data[xi(ci, sr, sc)];
                if (x->has_grad())
                  x->grad[xi(ci, sr, sc)] += g * w->data[wi(o, ci, fr, fc)];
              }
            }
        }
  });
  return out;
}

TensorPtr multi_head_self_attention(Tape& t, TensorPtr x,
                                    const AttentionParams& p, int heads) {
  require_matrix(x, "attention");
  const int d = x->cols();
  require(heads > 0 && d % heads == 0,
          "attention: width not divisible by head count");
  const int dh = d / heads;
  TensorPtr q = linear(t, x, p.wq, p.bq);
  TensorPtr k = linear(t, x, p.wk, p.bk);
  TensorPtr v = linear(t, x, p.wv, p.bv);
  std::vector<TensorPtr> head_outs;
  head_outs.reserve(heads);
  for (int hd = 0; hd < heads; ++hd) {
    TensorPtr qh = slice_cols(t, q, hd * dh, (hd + 1) * dh);
    TensorPtr kh = slice_cols(t, k, hd * dh, (hd + 1) * dh);
    TensorPtr vh = slice_cols(t, v, hd * dh, (hd + 1) * dh);
    TensorPtr logits = scale(t, matmul_nt(t, qh, kh), 1.0 / std::sqrt(double(dh)));
    TensorPtr attn = softmax_rows(t, logits);
    head_outs.push_back(matmul(t, attn, vh));
  }
  TensorPtr merged = concat_cols(t, head_outs);
  return linear(t, merged, p.wo, p.bo);
}

}  // namespace textplace::nn
