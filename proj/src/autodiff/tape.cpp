// Copyright 2026 The mixctc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "autodiff/tape.hpp"

#include <algorithm>
#include <cmath>

namespace mixctc::autodiff {

namespace {

bool any_requires_grad(const std::vector<TensorPtr>& inputs) {
  for (const auto& t : inputs) {
    if (t && t->requires_grad) return true;
  }
  return false;
}

}  // namespace

TensorPtr Tape::alloc_output(std::vector<int> shape, const std::vector<TensorPtr>& inputs) {
  auto out = Tensor::zeros(std::move(shape));
  out->is_leaf = false;
  out->requires_grad = any_requires_grad(inputs);
  return out;
}

void Tape::record(const char* op, std::vector<TensorPtr> inputs, TensorPtr output,
                  std::function<void()> backward) {
  if (!output->requires_grad) return;
  nodes_.push_back(TapeNode{op, std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const TensorPtr& loss) {
  if (loss->size() != 1) throw NotScalar("backward requires a scalar loss");
  // Intermediate gradients are scratch state of this pass; leaves accumulate.
  for (auto& node : nodes_) {
    node.output->ensure_grad();
    if (!node.output->is_leaf) node.output->zero_grad();
    for (auto& in : node.inputs) {
      if (in && in->requires_grad) in->ensure_grad();
    }
  }
  loss->ensure_grad();
  loss->grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->requires_grad) it->backward();
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
  if (!a->same_shape(*b)) throw ShapeMismatch("add: shapes differ");
  auto out = alloc_output(a->shape, {a, b});
  const int64_t n = a->size();
  for (int64_t i = 0; i < n; ++i) out->values[i] = a->values[i] + b->values[i];
  record("add", {a, b}, out, [a, b, out, n]() {
    if (a->requires_grad) {
      for (int64_t i = 0; i < n; ++i) a->grad[i] += out->grad[i];
    }
    if (b->requires_grad) {
      for (int64_t i = 0; i < n; ++i) b->grad[i] += out->grad[i];
    }
  });
  return out;
}

TensorPtr Tape::mul(const TensorPtr& a, const TensorPtr& b) {
  if (!a->same_shape(*b)) throw ShapeMismatch("mul: shapes differ");
  auto out = alloc_output(a->shape, {a, b});
  const int64_t n = a->size();
  for (int64_t i = 0; i < n; ++i) out->values[i] = a->values[i] * b->values[i];
  record("mul", {a, b}, out, [a, b, out, n]() {
    if (a->requires_grad) {
      for (int64_t i = 0; i < n; ++i) a->grad[i] += out->grad[i] * b->values[i];
    }
    if (b->requires_grad) {
      for (int64_t i = 0; i < n; ++i) b->grad[i] += out->grad[i] * a->values[i];
    }
  });
  return out;
}

TensorPtr Tape::scale(const TensorPtr& a, double c) {
  auto out = alloc_output(a->shape, {a});
  const int64_t n = a->size();
  for (int64_t i = 0; i < n; ++i) out->values[i] = a->values[i] * c;
  record("scale", {a}, out, [a, out, c, n]() {
    if (a->requires_grad) {
      for (int64_t i = 0; i < n; ++i) a->grad[i] += out->grad[i] * c;
    }
  });
  return out;
}

TensorPtr Tape::sum(const TensorPtr& x) {
  auto out = alloc_output({1}, {x});
  const int64_t n = x->size();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += x->values[i];
  out->values[0] = acc;
  record("sum", {x}, out, [x, out, n]() {
    if (!x->requires_grad) return;
    const double g = out->grad[0];
    for (int64_t i = 0; i < n; ++i) x->grad[i] += g;
  });
  return out;
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

TensorPtr Tape::sigmoid(const TensorPtr& x) {
  auto out = alloc_output(x->shape, {x});
  const int64_t n = x->size();
  for (int64_t i = 0; i < n; ++i) out->values[i] = 1.0 / (1.0 + std::exp(-x->values[i]));
  record("sigmoid", {x}, out, [x, out, n]() {
    if (!x->requires_grad) return;
    for (int64_t i = 0; i < n; ++i) {
      double y = out->values[i];
      x->grad[i] += out->grad[i] * y * (1.0 - y);
    }
  });
  return out;
}

TensorPtr Tape::tanh_act(const TensorPtr& x) {
  auto out = alloc_output(x->shape, {x});
  const int64_t n = x->size();
  for (int64_t i = 0; i < n; ++i) out->values[i] = std::tanh(x->values[i]);
  record("tanh", {x}, out, [x, out, n]() {
    if (!x->requires_grad) return;
    for (int64_t i = 0; i < n; ++i) {
      double y = out->values[i];
      x->grad[i] += out->grad[i] * (1.0 - y * y);
    }
  });
  return out;
}

TensorPtr Tape::softmax_depth(const TensorPtr& x) {
  if (x->rank() < 1) throw ShapeMismatch("softmax_depth: rank 0 input");
  const int m = x->shape.back();
  const int64_t rows = x->size() / m;
  auto out = alloc_output(x->shape, {x});
  for (int64_t r = 0; r < rows; ++r) {
    const double* xin = &x->values[r * m];
    double* y = &out->values[r * m];
    double mx = xin[0];
    for (int c = 1; c < m; ++c) mx = std::max(mx, xin[c]);
    double sum = 0.0;
    for (int c = 0; c < m; ++c) {
      y[c] = std::exp(xin[c] - mx);
      sum += y[c];
    }
    double inv = 1.0 / sum;
    for (int c = 0; c < m; ++c) y[c] *= inv;
  }
  record("softmax", {x}, out, [x, out, m, rows]() {
    if (!x->requires_grad) return;
    for (int64_t r = 0; r < rows; ++r) {
      const double* y = &out->values[r * m];
      const double* dy = &out->grad[r * m];
      double* dx = &x->grad[r * m];
      double dot = 0.0;
      for (int c = 0; c < m; ++c) dot += dy[c] * y[c];
      for (int c = 0; c < m; ++c) dx[c] += y[c] * (dy[c] - dot);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

TensorPtr Tape::conv2d(const TensorPtr& input, const TensorPtr& kernel, const TensorPtr& bias,
                       int stride_h, int stride_w, Padding padding) {
  if (input->rank() != 4) throw ShapeMismatch("conv2d: input must be 4-D");
  if (kernel->rank() != 4) throw ShapeMismatch("conv2d: kernel must be 4-D");
  const int b_n = input->shape[0], depth = input->shape[1];
  const int h = input->shape[2], w = input->shape[3];
  const int d_out = kernel->shape[0], kd = kernel->shape[1];
  const int kh = kernel->shape[2], kw = kernel->shape[3];
  if (kd != depth) throw ShapeMismatch("conv2d: kernel depth does not match input depth");
  if (bias && (bias->rank() != 1 || bias->shape[0] != d_out)) {
    throw ShapeMismatch("conv2d: bias shape");
  }

  int pad_top = 0, pad_left = 0, out_h, out_w;
  if (padding == Padding::kSame) {
    out_h = (h + stride_h - 1) / stride_h;
    out_w = (w + stride_w - 1) / stride_w;
    int pad_h = std::max(0, (out_h - 1) * stride_h + kh - h);
    int pad_w = std::max(0, (out_w - 1) * stride_w + kw - w);
    pad_top = pad_h / 2;
    pad_left = pad_w / 2;
  } else {
    out_h = (h - kh) / stride_h + 1;
    out_w = (w - kw) / stride_w + 1;
    if (kh > h || kw > w) throw EmptyOutput("conv2d: kernel larger than input");
  }
  if (out_h <= 0 || out_w <= 0) throw EmptyOutput("conv2d: empty output");

  std::vector<TensorPtr> ins = {input, kernel};
  if (bias) ins.push_back(bias);
  auto out = alloc_output({b_n, d_out, out_h, out_w}, ins);

  const int64_t in_plane = static_cast<int64_t>(h) * w;
  const int64_t out_plane = static_cast<int64_t>(out_h) * out_w;
  const int64_t in_img = in_plane * depth;
  const int64_t out_img = out_plane * d_out;

  // Per-tap output range with the input row in bounds:
  //   0 <= ox*stride + k - pad < extent
  auto tap_range = [](int k, int pad, int stride, int extent, int out_extent, int* lo, int* hi) {
    int off = k - pad;
    int lo_v = off < 0 ? (-off + stride - 1) / stride : 0;
    int hi_v = (extent - 1 - off) / stride;  // inclusive
    *lo = std::max(0, lo_v);
    *hi = std::min(out_extent - 1, hi_v);
  };

  for (int b = 0; b < b_n; ++b) {
    for (int od = 0; od < d_out; ++od) {
      double* out_base = &out->values[b * out_img + od * out_plane];
      if (bias) {
        double bv = bias->values[od];
        for (int64_t i = 0; i < out_plane; ++i) out_base[i] = bv;
      }
      for (int id = 0; id < depth; ++id) {
        const double* in_base = &input->values[b * in_img + id * in_plane];
        const double* k_base =
            &kernel->values[((static_cast<int64_t>(od) * depth + id) * kh) * kw];
        for (int ky = 0; ky < kh; ++ky) {
          int oy_lo, oy_hi;
          tap_range(ky, pad_top, stride_h, h, out_h, &oy_lo, &oy_hi);
          for (int kx = 0; kx < kw; ++kx) {
            int ox_lo, ox_hi;
            tap_range(kx, pad_left, stride_w, w, out_w, &ox_lo, &ox_hi);
            const double kv = k_base[ky * kw + kx];
            for (int oy = oy_lo; oy <= oy_hi; ++oy) {
              const double* in_row = in_base + (oy * stride_h + ky - pad_top) * w + (kx - pad_left);
              double* out_row = out_base + static_cast<int64_t>(oy) * out_w;
              if (stride_w == 1) {
                for (int ox = ox_lo; ox <= ox_hi; ++ox) out_row[ox] += kv * in_row[ox];
              } else {
                for (int ox = ox_lo; ox <= ox_hi; ++ox) out_row[ox] += kv * in_row[ox * stride_w];
              }
            }
          }
        }
      }
    }
  }

  record("conv2d", ins, out,
         [input, kernel, bias, out, b_n, depth, d_out, h, w, kh, kw, out_h, out_w, stride_h,
          stride_w, pad_top, pad_left, in_plane, out_plane, in_img, out_img, tap_range]() {
           for (int b = 0; b < b_n; ++b) {
             for (int od = 0; od < d_out; ++od) {
               const double* dout_base = &out->grad[b * out_img + od * out_plane];
               if (bias && bias->requires_grad) {
                 double acc = 0.0;
                 for (int64_t i = 0; i < out_plane; ++i) acc += dout_base[i];
                 bias->grad[od] += acc;
               }
               for (int id = 0; id < depth; ++id) {
                 const int64_t k_off = ((static_cast<int64_t>(od) * depth + id) * kh) * kw;
                 const double* in_base = &input->values[b * in_img + id * in_plane];
                 double* din_base =
                     input->requires_grad ? &input->grad[b * in_img + id * in_plane] : nullptr;
                 for (int ky = 0; ky < kh; ++ky) {
                   int oy_lo, oy_hi;
                   tap_range(ky, pad_top, stride_h, h, out_h, &oy_lo, &oy_hi);
                   for (int kx = 0; kx < kw; ++kx) {
                     int ox_lo, ox_hi;
                     tap_range(kx, pad_left, stride_w, w, out_w, &ox_lo, &ox_hi);
                     const int row_shift = kx - pad_left;
                     double kgrad = 0.0;
                     const double kv = kernel->values[k_off + ky * kw + kx];
                     for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                       const int64_t in_row_off = (oy * stride_h + ky - pad_top) * w + row_shift;
                       const double* dout_row = dout_base + static_cast<int64_t>(oy) * out_w;
                       if (kernel->requires_grad) {
                         const double* in_row = in_base + in_row_off;
                         if (stride_w == 1) {
                           for (int ox = ox_lo; ox <= ox_hi; ++ox) kgrad += in_row[ox] * dout_row[ox];
                         } else {
                           for (int ox = ox_lo; ox <= ox_hi; ++ox)
                             kgrad += in_row[ox * stride_w] * dout_row[ox];
                         }
                       }
                       if (din_base) {
                         double* din_row = din_base + in_row_off;
                         if (stride_w == 1) {
                           for (int ox = ox_lo; ox <= ox_hi; ++ox) din_row[ox] += kv * dout_row[ox];
                         } else {
                           for (int ox = ox_lo; ox <= ox_hi; ++ox)
                             din_row[ox * stride_w] += kv * dout_row[ox];
                         }
                       }
                     }
                     if (kernel->requires_grad) kernel->grad[k_off + ky * kw + kx] += kgrad;
                   }
                 }
               }
             }
           }
         });
  return out;
}

// ---------------------------------------------------------------------------
// pooling / layout
// ---------------------------------------------------------------------------

TensorPtr Tape::max_pool(const TensorPtr& input, int win_h, int win_w, int stride_h,
                         int stride_w) {
  if (input->rank() != 4) throw ShapeMismatch("max_pool: input must be 4-D");
  const int b_n = input->shape[0], depth = input->shape[1];
  const int h = input->shape[2], w = input->shape[3];
  if (win_h > h || win_w > w) throw EmptyOutput("max_pool: window larger than input");
  const int out_h = (h - win_h) / stride_h + 1;
  const int out_w = (w - win_w) / stride_w + 1;
  if (out_h <= 0 || out_w <= 0) throw EmptyOutput("max_pool: empty output");

  auto out = alloc_output({b_n, depth, out_h, out_w}, {input});
  const int64_t in_plane = static_cast<int64_t>(h) * w;
  const int64_t out_plane = static_cast<int64_t>(out_h) * out_w;
  // Argmax offsets within each input plane; ties keep the lowest linear index.
  auto argmax = std::make_shared<std::vector<int64_t>>(out->size());

  int64_t oi = 0;
  for (int64_t p = 0; p < static_cast<int64_t>(b_n) * depth; ++p) {
    const double* in_base = &input->values[p * in_plane];
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        int64_t best = (oy * stride_h) * static_cast<int64_t>(w) + ox * stride_w;
        double best_v = in_base[best];
        for (int wy = 0; wy < win_h; ++wy) {
          for (int wx = 0; wx < win_w; ++wx) {
            int64_t idx = (oy * stride_h + wy) * static_cast<int64_t>(w) + ox * stride_w + wx;
            if (in_base[idx] > best_v) {
              best_v = in_base[idx];
              best = idx;
            }
          }
        }
        out->values[oi] = best_v;
        (*argmax)[oi] = p * in_plane + best;
        ++oi;
      }
    }
  }
  (void)out_plane;

  record("max_pool", {input}, out, [input, out, argmax]() {
    if (!input->requires_grad) return;
    const int64_t n = out->size();
    for (int64_t i = 0; i < n; ++i) input->grad[(*argmax)[i]] += out->grad[i];
  });
  return out;
}

TensorPtr Tape::space_to_depth(const TensorPtr& input, int block_h, int block_w) {
  if (input->rank() != 4) throw ShapeMismatch("space_to_depth: input must be 4-D");
  const int b_n = input->shape[0], depth = input->shape[1];
  const int h = input->shape[2], w = input->shape[3];
  if (h % block_h != 0 || w % block_w != 0) {
    throw ShapeMismatch("space_to_depth: dimensions not divisible by block");
  }
  const int oh = h / block_h, ow = w / block_w;
  const int od = depth * block_h * block_w;
  auto out = alloc_output({b_n, od, oh, ow}, {input});

  auto in_index = [=](int b, int d, int y, int x) {
    return ((static_cast<int64_t>(b) * depth + d) * h + y) * w + x;
  };
  auto out_index = [=](int b, int d, int y, int x) {
    return ((static_cast<int64_t>(b) * od + d) * oh + y) * ow + x;
  };

  for (int b = 0; b < b_n; ++b)
    for (int d = 0; d < depth; ++d)
      for (int dy = 0; dy < block_h; ++dy)
        for (int dx = 0; dx < block_w; ++dx) {
          int dd = (d * block_h + dy) * block_w + dx;
          for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x)
              out->values[out_index(b, dd, y, x)] =
                  input->values[in_index(b, d, y * block_h + dy, x * block_w + dx)];
        }

  record("space_to_depth", {input}, out,
         [input, out, b_n, depth, block_h, block_w, oh, ow, in_index, out_index]() {
           if (!input->requires_grad) return;
           for (int b = 0; b < b_n; ++b)
             for (int d = 0; d < depth; ++d)
               for (int dy = 0; dy < block_h; ++dy)
                 for (int dx = 0; dx < block_w; ++dx) {
                   int dd = (d * block_h + dy) * block_w + dx;
                   for (int y = 0; y < oh; ++y)
                     for (int x = 0; x < ow; ++x)
                       input->grad[in_index(b, d, y * block_h + dy, x * block_w + dx)] +=
                           out->grad[out_index(b, dd, y, x)];
                 }
         });
  return out;
}

TensorPtr Tape::collapse_height(const TensorPtr& input) {
  if (input->rank() != 4 || input->shape[2] != 1) {
    throw ShapeMismatch("collapse_height: expected [B,D,1,W]");
  }
  const int b_n = input->shape[0], depth = input->shape[1], w = input->shape[3];
  auto out = alloc_output({b_n, w, depth}, {input});
  for (int b = 0; b < b_n; ++b)
    for (int d = 0; d < depth; ++d) {
      const double* in_row = &input->values[(static_cast<int64_t>(b) * depth + d) * w];
      for (int t = 0; t < w; ++t)
        out->values[(static_cast<int64_t>(b) * w + t) * depth + d] = in_row[t];
    }
  record("collapse_height", {input}, out, [input, out, b_n, depth, w]() {
    if (!input->requires_grad) return;
    for (int b = 0; b < b_n; ++b)
      for (int d = 0; d < depth; ++d) {
        double* din_row = &input->grad[(static_cast<int64_t>(b) * depth + d) * w];
        for (int t = 0; t < w; ++t)
          din_row[t] += out->grad[(static_cast<int64_t>(b) * w + t) * depth + d];
      }
  });
  return out;
}

// ---------------------------------------------------------------------------
// linear
// ---------------------------------------------------------------------------

TensorPtr Tape::affine(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
  if (x->rank() != 3) throw ShapeMismatch("affine: input must be [B,T,D]");
  if (w->rank() != 2) throw ShapeMismatch("affine: weight must be 2-D");
  const int d_in = x->shape[2];
  if (w->shape[0] != d_in) throw ShapeMismatch("affine: weight rows do not match input depth");
  const int d_out = w->shape[1];
  if (b && (b->rank() != 1 || b->shape[0] != d_out)) throw ShapeMismatch("affine: bias shape");
  const int64_t rows = static_cast<int64_t>(x->shape[0]) * x->shape[1];

  std::vector<TensorPtr> ins = {x, w};
  if (b) ins.push_back(b);
  auto out = alloc_output({x->shape[0], x->shape[1], d_out}, ins);

  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = &x->values[r * d_in];
    double* yr = &out->values[r * d_out];
    if (b) {
      for (int j = 0; j < d_out; ++j) yr[j] = b->values[j];
    }
    for (int i = 0; i < d_in; ++i) {
      const double xv = xr[i];
      if (xv == 0.0) continue;
      const double* wr = &w->values[static_cast<int64_t>(i) * d_out];
      for (int j = 0; j < d_out; ++j) yr[j] += xv * wr[j];
    }
  }

  record("affine", ins, out, [x, w, b, out, rows, d_in, d_out]() {
    for (int64_t r = 0; r < rows; ++r) {
      const double* dyr = &out->grad[r * d_out];
      const double* xr = &x->values[r * d_in];
      if (b && b->requires_grad) {
        for (int j = 0; j < d_out; ++j) b->grad[j] += dyr[j];
      }
      if (w->requires_grad) {
        for (int i = 0; i < d_in; ++i) {
          const double xv = xr[i];
          if (xv == 0.0) continue;
          double* dwr = &w->grad[static_cast<int64_t>(i) * d_out];
          for (int j = 0; j < d_out; ++j) dwr[j] += xv * dyr[j];
        }
      }
      if (x->requires_grad) {
        double* dxr = &x->grad[r * d_in];
        for (int i = 0; i < d_in; ++i) {
          const double* wr = &w->values[static_cast<int64_t>(i) * d_out];
          double acc = 0.0;
          for (int j = 0; j < d_out; ++j) acc += wr[j] * dyr[j];
          dxr[i] += acc;
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// bidirectional LSTM (fused, exact BPTT)
// ---------------------------------------------------------------------------

namespace {

struct LstmTrace {
  // All saved per (t, b, h), indexed by real time t.
  std::vector<double> i, f, g, o, c, tc;
  std::vector<double> h;  // hidden outputs, used for dWh
  void resize(int64_t n) {
    i.assign(n, 0.0);
    f.assign(n, 0.0);
    g.assign(n, 0.0);
    o.assign(n, 0.0);
    c.assign(n, 0.0);
    tc.assign(n, 0.0);
    h.assign(n, 0.0);
  }
};

}  // namespace

TensorPtr Tape::blstm(const TensorPtr& x, const LstmParams& fwd, const LstmParams& bwd,
                      int hidden) {
  if (x->rank() != 3) throw ShapeMismatch("blstm: input must be [B,T,D]");
  const int b_n = x->shape[0], t_n = x->shape[1], d_in = x->shape[2];
  if (t_n < 1) throw ShapeMismatch("blstm: empty sequence");
  const int gates = 4 * hidden;
  for (const LstmParams* p : {&fwd, &bwd}) {
    if (p->wx->shape != std::vector<int>{d_in, gates} ||
        p->wh->shape != std::vector<int>{hidden, gates} ||
        p->b->shape != std::vector<int>{gates}) {
      throw ShapeMismatch("blstm: parameter shapes");
    }
  }

  std::vector<TensorPtr> ins = {x, fwd.wx, fwd.wh, fwd.b, bwd.wx, bwd.wh, bwd.b};
  auto out = alloc_output({b_n, t_n, 2 * hidden}, ins);

  auto traces = std::make_shared<std::array<LstmTrace, 2>>();
  const int64_t tbh = static_cast<int64_t>(t_n) * b_n * hidden;

  std::vector<double> z(static_cast<size_t>(b_n) * gates);
  for (int dir = 0; dir < 2; ++dir) {
    const LstmParams& p = dir == 0 ? fwd : bwd;
    LstmTrace& tr = (*traces)[dir];
    tr.resize(tbh);
    const int out_off = dir * hidden;
    for (int step = 0; step < t_n; ++step) {
      const int t = dir == 0 ? step : t_n - 1 - step;
      const int t_prev = dir == 0 ? t - 1 : t + 1;
      // z = x_t Wx + h_prev Wh + b
      for (int b = 0; b < b_n; ++b) {
        double* zr = &z[static_cast<size_t>(b) * gates];
        for (int j = 0; j < gates; ++j) zr[j] = p.b->values[j];
        const double* xr = &x->values[(static_cast<int64_t>(b) * t_n + t) * d_in];
        for (int i = 0; i < d_in; ++i) {
          const double xv = xr[i];
          if (xv == 0.0) continue;
          const double* wr = &p.wx->values[static_cast<int64_t>(i) * gates];
          for (int j = 0; j < gates; ++j) zr[j] += xv * wr[j];
        }
        if (step > 0) {
          const double* hp = &tr.h[(static_cast<int64_t>(t_prev) * b_n + b) * hidden];
          for (int i = 0; i < hidden; ++i) {
            const double hv = hp[i];
            if (hv == 0.0) continue;
            const double* wr = &p.wh->values[static_cast<int64_t>(i) * gates];
            for (int j = 0; j < gates; ++j) zr[j] += hv * wr[j];
          }
        }
      }
      for (int b = 0; b < b_n; ++b) {
        const double* zr = &z[static_cast<size_t>(b) * gates];
        const int64_t base = (static_cast<int64_t>(t) * b_n + b) * hidden;
        const double* cp =
            step > 0 ? &tr.c[(static_cast<int64_t>(t_prev) * b_n + b) * hidden] : nullptr;
        double* out_row = &out->values[(static_cast<int64_t>(b) * t_n + t) * 2 * hidden + out_off];
        for (int k = 0; k < hidden; ++k) {
          const double iv = 1.0 / (1.0 + std::exp(-zr[k]));
          const double fv = 1.0 / (1.0 + std::exp(-zr[hidden + k]));
          const double gv = std::tanh(zr[2 * hidden + k]);
          const double ov = 1.0 / (1.0 + std::exp(-zr[3 * hidden + k]));
          const double cv = fv * (cp ? cp[k] : 0.0) + iv * gv;
          const double tcv = std::tanh(cv);
          const double hv = ov * tcv;
          tr.i[base + k] = iv;
          tr.f[base + k] = fv;
          tr.g[base + k] = gv;
          tr.o[base + k] = ov;
          tr.c[base + k] = cv;
          tr.tc[base + k] = tcv;
          tr.h[base + k] = hv;
          out_row[k] = hv;
        }
      }
    }
  }

  record("blstm", ins, out, [x, fwd, bwd, out, traces, b_n, t_n, d_in, hidden]() {
    const int gates = 4 * hidden;
    std::vector<double> dz(static_cast<size_t>(b_n) * gates);
    std::vector<double> dh_carry(static_cast<size_t>(b_n) * hidden);
    std::vector<double> dc_carry(static_cast<size_t>(b_n) * hidden);
    for (int dir = 0; dir < 2; ++dir) {
      const LstmParams& p = dir == 0 ? fwd : bwd;
      const LstmTrace& tr = (*traces)[dir];
      const int out_off = dir * hidden;
      std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
      std::fill(dc_carry.begin(), dc_carry.end(), 0.0);
      for (int step = t_n - 1; step >= 0; --step) {
        const int t = dir == 0 ? step : t_n - 1 - step;
        const int t_prev = dir == 0 ? t - 1 : t + 1;
        for (int b = 0; b < b_n; ++b) {
          const int64_t base = (static_cast<int64_t>(t) * b_n + b) * hidden;
          const double* cp =
              step > 0 ? &tr.c[(static_cast<int64_t>(t_prev) * b_n + b) * hidden] : nullptr;
          const double* dout_row =
              &out->grad[(static_cast<int64_t>(b) * t_n + t) * 2 * hidden + out_off];
          double* dzr = &dz[static_cast<size_t>(b) * gates];
          double* dhc = &dh_carry[static_cast<size_t>(b) * hidden];
          double* dcc = &dc_carry[static_cast<size_t>(b) * hidden];
          for (int k = 0; k < hidden; ++k) {
            const double iv = tr.i[base + k], fv = tr.f[base + k], gv = tr.g[base + k];
            const double ov = tr.o[base + k], tcv = tr.tc[base + k];
            const double dh = dout_row[k] + dhc[k];
            const double dov = dh * tcv;
            const double dcv = dcc[k] + dh * ov * (1.0 - tcv * tcv);
            const double div = dcv * gv;
            const double dfv = cp ? dcv * cp[k] : 0.0;
            const double dgv = dcv * iv;
            dzr[k] = div * iv * (1.0 - iv);
            dzr[hidden + k] = dfv * fv * (1.0 - fv);
            dzr[2 * hidden + k] = dgv * (1.0 - gv * gv);
            dzr[3 * hidden + k] = dov * ov * (1.0 - ov);
            dcc[k] = dcv * fv;  // carried to t_prev
          }
        }
        // Parameter and input gradients from dz.
        for (int b = 0; b < b_n; ++b) {
          const double* dzr = &dz[static_cast<size_t>(b) * gates];
          if (p.b->requires_grad) {
            for (int j = 0; j < gates; ++j) p.b->grad[j] += dzr[j];
          }
          const double* xr = &x->values[(static_cast<int64_t>(b) * t_n + t) * d_in];
          if (p.wx->requires_grad) {
            for (int i = 0; i < d_in; ++i) {
              const double xv = xr[i];
              if (xv == 0.0) continue;
              double* dwr = &p.wx->grad[static_cast<int64_t>(i) * gates];
              for (int j = 0; j < gates; ++j) dwr[j] += xv * dzr[j];
            }
          }
          if (x->requires_grad) {
            double* dxr = &x->grad[(static_cast<int64_t>(b) * t_n + t) * d_in];
            for (int i = 0; i < d_in; ++i) {
              const double* wr = &p.wx->values[static_cast<int64_t>(i) * gates];
              double acc = 0.0;
              for (int j = 0; j < gates; ++j) acc += wr[j] * dzr[j];
              dxr[i] += acc;
            }
          }
          double* dhc = &dh_carry[static_cast<size_t>(b) * hidden];
          if (step > 0) {
            const double* hp = &tr.h[(static_cast<int64_t>(t_prev) * b_n + b) * hidden];
            if (p.wh->requires_grad) {
              for (int i = 0; i < hidden; ++i) {
                const double hv = hp[i];
                if (hv == 0.0) continue;
                double* dwr = &p.wh->grad[static_cast<int64_t>(i) * gates];
                for (int j = 0; j < gates; ++j) dwr[j] += hv * dzr[j];
              }
            }
            for (int i = 0; i < hidden; ++i) {
              const double* wr = &p.wh->values[static_cast<int64_t>(i) * gates];
              double acc = 0.0;
              for (int j = 0; j < gates; ++j) acc += wr[j] * dzr[j];
              dhc[i] = acc;
            }
          } else {
            std::fill(dhc, dhc + hidden, 0.0);
          }
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// dropout / mixing
// ---------------------------------------------------------------------------

TensorPtr Tape::dropout(const TensorPtr& x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw InvalidConfig("dropout rate must be in [0,1)");
  if (!training || rate == 0.0) return x;
  auto out = alloc_output(x->shape, {x});
  const int64_t n = x->size();
  auto mask = std::make_shared<std::vector<double>>(n);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (int64_t i = 0; i < n; ++i) {
    (*mask)[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out->values[i] = x->values[i] * (*mask)[i];
  }
  record("dropout", {x}, out, [x, out, mask, n]() {
    if (!x->requires_grad) return;
    for (int64_t i = 0; i < n; ++i) x->grad[i] += out->grad[i] * (*mask)[i];
  });
  return out;
}

TensorPtr Tape::mix_batch(const TensorPtr& x, const std::vector<std::vector<int>>& partners,
                          const std::vector<std::vector<double>>& weights) {
  if (x->rank() < 2) throw ShapeMismatch("mix_batch: input must be batched");
  const int b_n = x->shape[0];
  if (static_cast<int>(weights.size()) != b_n) throw ShapeMismatch("mix_batch: weights size");
  const int64_t plane = x->size() / b_n;

  auto srcs = std::make_shared<std::vector<std::vector<int>>>();
  srcs->resize(b_n);
  for (int i = 0; i < b_n; ++i) {
    (*srcs)[i].push_back(i);
    for (const auto& perm : partners) {
      if (static_cast<int>(perm.size()) != b_n) throw ShapeMismatch("mix_batch: partner size");
      (*srcs)[i].push_back(perm[i]);
    }
    if (weights[i].size() != (*srcs)[i].size()) {
      throw ShapeMismatch("mix_batch: weight count does not match sources");
    }
  }

  auto w = std::make_shared<std::vector<std::vector<double>>>(weights);
  auto out = alloc_output(x->shape, {x});
  for (int i = 0; i < b_n; ++i) {
    double* out_row = &out->values[i * plane];
    bool first = true;
    for (size_t m = 0; m < (*srcs)[i].size(); ++m) {
      const double wm = (*w)[i][m];
      if (wm == 0.0) continue;
      const double* src = &x->values[static_cast<int64_t>((*srcs)[i][m]) * plane];
      if (first && wm == 1.0) {
        std::copy(src, src + plane, out_row);
        first = false;
      } else if (first) {
        for (int64_t k = 0; k < plane; ++k) out_row[k] = wm * src[k];
        first = false;
      } else {
        for (int64_t k = 0; k < plane; ++k) out_row[k] += wm * src[k];
      }
    }
    if (first) {  // all weights zero
      std::fill(out_row, out_row + plane, 0.0);
    }
  }

  record("mix_batch", {x}, out, [x, out, srcs, w, b_n, plane]() {
    if (!x->requires_grad) return;
    for (int i = 0; i < b_n; ++i) {
      const double* dout_row = &out->grad[i * plane];
      for (size_t m = 0; m < (*srcs)[i].size(); ++m) {
        const double wm = (*w)[i][m];
        if (wm == 0.0) continue;
        double* dsrc = &x->grad[static_cast<int64_t>((*srcs)[i][m]) * plane];
        if (wm == 1.0) {
          for (int64_t k = 0; k < plane; ++k) dsrc[k] += dout_row[k];
        } else {
          for (int64_t k = 0; k < plane; ++k) dsrc[k] += wm * dout_row[k];
        }
      }
    }
  });
  return out;
}

}  // namespace mixctc::autodiff
