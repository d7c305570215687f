#include "uda/nn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uda::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
bool wants_grad(std::initializer_list<const Var<T>*> inputs) {
  if (NoGradGuard::active()) return false;
  for (const Var<T>* v : inputs) {
    if (v && *v && (*v)->requires_grad) return true;
  }
  return false;
}

template <typename T>
Var<T> make_result(Tensor<T> value, bool grad, std::vector<Var<T>> parents) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = grad;
  if (grad) {
    for (auto& p : parents) {
      if (p) node->parents.push_back(std::move(p));
    }
  }
  return node;
}

template <typename T>
T* grad_of(const Var<T>& v) {
  if (!v || !v->requires_grad) return nullptr;
  v->ensure_grad();
  return v->grad.data();
}

void check(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

inline void trace_bit(bool b, std::uint64_t& word, int& bits) {
  word = (word << 1) | static_cast<std::uint64_t>(b);
  if (++bits == 64) {
    BranchTrace::current()->record(word);
    word = 0;
    bits = 0;
  }
}

inline void trace_flush(std::uint64_t word, int bits) {
  if (bits > 0) BranchTrace::current()->record(word ^ (static_cast<std::uint64_t>(bits) << 58));
}

struct ConvGeom {
  int channels, height, width;  // image side
  int kernel, stride, pad;
  int out_h, out_w;             // column grid
};

// im2col: col[(c*K + ki)*K + kj][oy*out_w + ox] = img[c][oy*s - p + ki][ox*s - p + kj]
template <typename T>
void im2col(const T* img, const ConvGeom& g, T* col) {
  const int k = g.kernel;
  const int cols = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row = col + static_cast<std::size_t>((c * k + ki) * k + kj) * cols;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = img + (static_cast<std::size_t>(c) * g.height + iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col (accumulates into img).
template <typename T>
void col2im(const T* col, const ConvGeom& g, T* img) {
  const int k = g.kernel;
  const int cols = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row = col + static_cast<std::size_t>((c * k + ki) * k + kj) * cols;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.height) continue;
          T* dst = img + (static_cast<std::size_t>(c) * g.height + iy) * g.width;
          const T* src = row + oy * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
  const Shape xs = x->value.shape;
  const Shape ws = weight->value.shape;
  check(ws.c == xs.c && ws.h == ws.w, "conv2d: weight/input channel mismatch");
  check(!bias || bias->value.numel() == static_cast<std::size_t>(ws.n), "conv2d: bias size");
  const int k = ws.h;
  const ConvGeom g{xs.c, xs.h, xs.w, k, stride, pad, (xs.h + 2 * pad - k) / stride + 1,
                   (xs.w + 2 * pad - k) / stride + 1};
  check(g.out_h > 0 && g.out_w > 0, "conv2d: output would be empty");
  const int cout = ws.n;
  const int patch = xs.c * k * k;
  const int cols = g.out_h * g.out_w;

  const bool grad = wants_grad<T>({&x, &weight, &bias});
  auto col_store = std::make_shared<Buffer<T>>(static_cast<std::size_t>(xs.n) * patch * cols);
  Tensor<T> out(Shape{xs.n, cout, g.out_h, g.out_w});
  CMapMat<T> w(weight->value.data.data(), cout, patch);
  for (int n = 0; n < xs.n; ++n) {
    T* col = col_store->data() + static_cast<std::size_t>(n) * patch * cols;
    im2col(x->value.sample(n), g, col);
    MapMat<T> y(out.sample(n), cout, cols);
    y.noalias() = w * CMapMat<T>(col, patch, cols);
    if (bias) {
      for (int c = 0; c < cout; ++c) y.row(c).array() += bias->value.data[c];
    }
  }

  auto res = make_result<T>(std::move(out), grad, {x, weight, bias});
  if (!grad) return res;
  res->backward = [x, weight, bias, g, cout, patch, cols, col_store](Node<T>& self) {
    T* gx = grad_of(x);
    T* gw = grad_of(weight);
    T* gb = grad_of(bias);
    CMapMat<T> w(weight->value.data.data(), cout, patch);
    Buffer<T> gcol(gx ? static_cast<std::size_t>(patch) * cols : 0);
    const std::size_t out_stride = static_cast<std::size_t>(cout) * cols;
    for (int n = 0; n < x->value.shape.n; ++n) {
      CMapMat<T> gy(self.grad.data() + n * out_stride, cout, cols);
      const T* col = col_store->data() + static_cast<std::size_t>(n) * patch * cols;
      if (gw) MapMat<T>(gw, cout, patch).noalias() += gy * CMapMat<T>(col, patch, cols).transpose();
      if (gb) {
        for (int c = 0; c < cout; ++c) gb[c] += gy.row(c).sum();
      }
      if (gx) {
        MapMat<T>(gcol.data(), patch, cols).noalias() = w.transpose() * gy;
        col2im(gcol.data(), g, gx + n * x->value.shape.sample_numel());
      }
    }
  };
  return res;
}

template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride,
                        int pad) {
  const Shape xs = x->value.shape;
  const Shape ws = weight->value.shape;
  check(ws.n == xs.c && ws.h == ws.w, "conv_transpose2d: weight/input channel mismatch");
  check(!bias || bias->value.numel() == static_cast<std::size_t>(ws.c), "conv_transpose2d: bias size");
  const int k = ws.h;
  const int cout = ws.c;
  const int out_h = (xs.h - 1) * stride - 2 * pad + k;
  const int out_w = (xs.w - 1) * stride - 2 * pad + k;
  check(out_h > 0 && out_w > 0, "conv_transpose2d: output would be empty");
  // Geometry of the forward conv whose adjoint this is.
  const ConvGeom g{cout, out_h, out_w, k, stride, pad, xs.h, xs.w};
  const int patch = cout * k * k;
  const int cols = xs.h * xs.w;

  const bool grad = wants_grad<T>({&x, &weight, &bias});
  Tensor<T> out(Shape{xs.n, cout, out_h, out_w});
  CMapMat<T> w(weight->value.data.data(), xs.c, patch);
  Buffer<T> col(static_cast<std::size_t>(patch) * cols);
  for (int n = 0; n < xs.n; ++n) {
    MapMat<T>(col.data(), patch, cols).noalias() =
        w.transpose() * CMapMat<T>(x->value.sample(n), xs.c, cols);
    T* y = out.sample(n);
    col2im(col.data(), g, y);
    if (bias) {
      const int plane = out_h * out_w;
      for (int c = 0; c < cout; ++c) {
        std::for_each(y + c * plane, y + (c + 1) * plane, [&](T& v) { v += bias->value.data[c]; });
      }
    }
  }

  auto res = make_result<T>(std::move(out), grad, {x, weight, bias});
  if (!grad) return res;
  res->backward = [x, weight, bias, g, cout, patch, cols](Node<T>& self) {
    T* gx = grad_of(x);
    T* gw = grad_of(weight);
    T* gb = grad_of(bias);
    const Shape xs = x->value.shape;
    CMapMat<T> w(weight->value.data.data(), xs.c, patch);
    Buffer<T> gcol(static_cast<std::size_t>(patch) * cols);
    const std::size_t out_stride = static_cast<std::size_t>(cout) * g.height * g.width;
    const int plane = g.height * g.width;
    for (int n = 0; n < xs.n; ++n) {
      const T* gy = self.grad.data() + n * out_stride;
      if (gb) {
        for (int c = 0; c < cout; ++c) {
          T acc = 0;
          for (int i = 0; i < plane; ++i) acc += gy[c * plane + i];
          gb[c] += acc;
        }
      }
      im2col(gy, g, gcol.data());
      CMapMat<T> gc(gcol.data(), patch, cols);
      if (gx) MapMat<T>(gx + n * xs.sample_numel(), xs.c, cols).noalias() += w * gc;
      if (gw) {
        MapMat<T>(gw, xs.c, patch).noalias() +=
            CMapMat<T>(x->value.sample(n), xs.c, cols) * gc.transpose();
      }
    }
  };
  return res;
}

template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps) {
  const Shape s = x->value.shape;
  const int plane = s.h * s.w;
  const int groups = s.n * s.c;
  const bool grad = wants_grad<T>({&x});
  Tensor<T> out(s);
  auto inv_std = std::make_shared<std::vector<T>>(groups);
  for (int gi = 0; gi < groups; ++gi) {
    const T* src = x->value.data.data() + static_cast<std::size_t>(gi) * plane;
    T* dst = out.data.data() + static_cast<std::size_t>(gi) * plane;
    double mean = 0.0;
    for (int i = 0; i < plane; ++i) mean += src[i];
    mean /= plane;
    double var = 0.0;
    for (int i = 0; i < plane; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= plane;
    const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
    (*inv_std)[gi] = static_cast<T>(is);
    for (int i = 0; i < plane; ++i) dst[i] = static_cast<T>((src[i] - mean) * is);
  }
  auto res = make_result<T>(std::move(out), grad, {x});
  if (!grad) return res;
  res->backward = [x, inv_std, plane, groups](Node<T>& self) {
    T* gx = grad_of(x);
    for (int gi = 0; gi < groups; ++gi) {
      const std::size_t off = static_cast<std::size_t>(gi) * plane;
      const T* y = self.value.data.data() + off;
      const T* gy = self.grad.data() + off;
      double mean_g = 0.0, mean_gy = 0.0;
      for (int i = 0; i < plane; ++i) {
        mean_g += gy[i];
        mean_gy += gy[i] * y[i];
      }
      mean_g /= plane;
      mean_gy /= plane;
      const double is = (*inv_std)[gi];
      for (int i = 0; i < plane; ++i) {
        gx[off + i] += static_cast<T>(is * (gy[i] - mean_g - y[i] * mean_gy));
      }
    }
  };
  return res;
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, const Var<T>& running_mean,
                  const Var<T>& running_var, bool training, T momentum, T eps) {
  const Shape s = x->value.shape;
  const int plane = s.h * s.w;
  const int count = s.n * plane;
  check(gamma->value.numel() == static_cast<std::size_t>(s.c) && beta->value.numel() == static_cast<std::size_t>(s.c),
        "batch_norm: affine parameters must have one entry per channel");
  check(running_mean->value.numel() == static_cast<std::size_t>(s.c) &&
            running_var->value.numel() == static_cast<std::size_t>(s.c),
        "batch_norm: running statistics must have one entry per channel");
  check(!training || count > 1, "batch_norm: training needs more than one value per channel");
  const bool grad = wants_grad<T>({&x, &gamma, &beta});
  auto at = [channels = s.c, plane](int n, int c) { return static_cast<std::size_t>(n * channels + c) * plane; };

  Tensor<T> out(s);
  auto xhat = std::make_shared<std::vector<T>>(x->value.numel());
  auto inv_std = std::make_shared<std::vector<double>>(s.c);
  for (int c = 0; c < s.c; ++c) {
    double mean, var;
    if (training) {
      mean = 0.0;
      for (int n = 0; n < s.n; ++n) {
        for (int i = 0; i < plane; ++i) mean += x->value.data[at(n, c) + i];
      }
      mean /= count;
      var = 0.0;
      for (int n = 0; n < s.n; ++n) {
        for (int i = 0; i < plane; ++i) {
          const double d = x->value.data[at(n, c) + i] - mean;
          var += d * d;
        }
      }
      var /= count;
      // Running variance uses the unbiased estimate.
      T& rm = running_mean->value.data[c];
      T& rv = running_var->value.data[c];
      rm = static_cast<T>((1.0 - momentum) * rm + momentum * mean);
      rv = static_cast<T>((1.0 - momentum) * rv + momentum * var * count / (count - 1));
    } else {
      mean = running_mean->value.data[c];
      var = running_var->value.data[c];
    }
    const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
    (*inv_std)[c] = is;
    const double g = gamma->value.data[c], b = beta->value.data[c];
    for (int n = 0; n < s.n; ++n) {
      for (int i = 0; i < plane; ++i) {
        const std::size_t k = at(n, c) + i;
        const double h = (x->value.data[k] - mean) * is;
        (*xhat)[k] = static_cast<T>(h);
        out.data[k] = static_cast<T>(g * h + b);
      }
    }
  }
  auto res = make_result<T>(std::move(out), grad, {x, gamma, beta});
  if (!grad) return res;
  res->backward = [x, gamma, beta, xhat, inv_std, s, plane, count, training, at](Node<T>& self) {
    T* gx = grad_of(x);
    T* gg = grad_of(gamma);
    T* gb = grad_of(beta);
    for (int c = 0; c < s.c; ++c) {
      double sum_gy = 0.0, sum_gy_h = 0.0;
      for (int n = 0; n < s.n; ++n) {
        for (int i = 0; i < plane; ++i) {
          const std::size_t k = at(n, c) + i;
          sum_gy += self.grad[k];
          sum_gy_h += self.grad[k] * (*xhat)[k];
        }
      }
      if (gg) gg[c] += static_cast<T>(sum_gy_h);
      if (gb) gb[c] += static_cast<T>(sum_gy);
      if (!gx) continue;
      const double g = gamma->value.data[c];
      const double is = (*inv_std)[c];
      for (int n = 0; n < s.n; ++n) {
        for (int i = 0; i < plane; ++i) {
          const std::size_t k = at(n, c) + i;
          if (training) {
            gx[k] += static_cast<T>(g * is * (self.grad[k] - sum_gy / count - (*xhat)[k] * sum_gy_h / count));
          } else {
            gx[k] += static_cast<T>(g * is * self.grad[k]);
          }
        }
      }
    }
  };
  return res;
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  const bool grad = wants_grad<T>({&x});
  Tensor<T> out(x->value.shape);
  const auto& in = x->value.data;
  for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = in[i] > T(0) ? in[i] : slope * in[i];
  if (BranchTrace::current()) {
    std::uint64_t word = 0;
    int bits = 0;
    for (T v : in) trace_bit(v > T(0), word, bits);
    trace_flush(word, bits);
  }
  auto res = make_result<T>(std::move(out), grad, {x});
  if (!grad) return res;
  res->backward = [x, slope](Node<T>& self) {
    T* gx = grad_of(x);
    const auto& in = x->value.data;
    for (std::size_t i = 0; i < in.size(); ++i) gx[i] += in[i] > T(0) ? self.grad[i] : slope * self.grad[i];
  };
  return res;
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return leaky_relu<T>(x, T(0));
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  const bool grad = wants_grad<T>({&x});
  Tensor<T> out(x->value.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const T v = x->value.data[i];
    out.data[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  }
  auto res = make_result<T>(std::move(out), grad, {x});
  if (!grad) return res;
  res->backward = [x](Node<T>& self) {
    T* gx = grad_of(x);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T y = self.value.data[i];
      gx[i] += self.grad[i] * y * (T(1) - y);
    }
  };
  return res;
}

template <typename T>
Var<T> max_pool2(const Var<T>& x) {
  const Shape s = x->value.shape;
  check(s.h % 2 == 0 && s.w % 2 == 0, "max_pool2: spatial size must be even");
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  const bool grad = wants_grad<T>({&x});
  Tensor<T> out(os);
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(os.numel());
  const T* in = x->value.data.data();
  BranchTrace* trace = BranchTrace::current();
  std::size_t o = 0;
  for (int p = 0; p < s.n * s.c; ++p) {
    const std::size_t base = static_cast<std::size_t>(p) * s.h * s.w;
    for (int oy = 0; oy < os.h; ++oy) {
      for (int ox = 0; ox < os.w; ++ox, ++o) {
        std::size_t best = base + static_cast<std::size_t>(2 * oy) * s.w + 2 * ox;
        int which = 0;
        const std::size_t cand[3] = {best + 1, best + s.w, best + s.w + 1};
        for (int k = 0; k < 3; ++k) {
          if (in[cand[k]] > in[best]) {
            best = cand[k];
            which = k + 1;
          }
        }
        out.data[o] = in[best];
        (*argmax)[o] = static_cast<std::uint32_t>(best);
        if (trace) trace->record(static_cast<std::uint64_t>(which));
      }
    }
  }
  auto res = make_result<T>(std::move(out), grad, {x});
  if (!grad) return res;
  res->backward = [x, argmax](Node<T>& self) {
    T* gx = grad_of(x);
    for (std::size_t i = 0; i < argmax->size(); ++i) gx[(*argmax)[i]] += self.grad[i];
  };
  return res;
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  const Shape s = x->value.shape;
  const int plane = s.h * s.w;
  const bool grad = wants_grad<T>({&x});
  Tensor<T> out(Shape{s.n, s.c, 1, 1});
  for (int p = 0; p < s.n * s.c; ++p) {
    T acc = 0;
    for (int i = 0; i < plane; ++i) acc += x->value.data[static_cast<std::size_t>(p) * plane + i];
    out.data[p] = acc / static_cast<T>(plane);
  }
  auto res = make_result<T>(std::move(out), grad, {x});
  if (!grad) return res;
  res->backward = [x, plane](Node<T>& self) {
    T* gx = grad_of(x);
    for (std::size_t p = 0; p < self.grad.size(); ++p) {
      const T g = self.grad[p] / static_cast<T>(plane);
      for (int i = 0; i < plane; ++i) gx[p * plane + i] += g;
    }
  };
  return res;
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const Shape xs = x->value.shape;
  const int features = static_cast<int>(xs.sample_numel());
  const int outs = weight->value.shape.n;
  check(weight->value.shape.sample_numel() == static_cast<std::size_t>(features),
        "linear: weight does not match input features");
  const bool grad = wants_grad<T>({&x, &weight, &bias});
  Tensor<T> out(Shape{xs.n, outs, 1, 1});
  CMapMat<T> in(x->value.data.data(), xs.n, features);
  CMapMat<T> w(weight->value.data.data(), outs, features);
  MapMat<T> y(out.data.data(), xs.n, outs);
  y.noalias() = in * w.transpose();
  if (bias) {
    for (int r = 0; r < xs.n; ++r) {
      for (int c = 0; c < outs; ++c) y(r, c) += bias->value.data[c];
    }
  }
  auto res = make_result<T>(std::move(out), grad, {x, weight, bias});
  if (!grad) return res;
  res->backward = [x, weight, bias, features, outs](Node<T>& self) {
    const int n = x->value.shape.n;
    CMapMat<T> gy(self.grad.data(), n, outs);
    if (T* gx = grad_of(x)) {
      MapMat<T>(gx, n, features).noalias() += gy * CMapMat<T>(weight->value.data.data(), outs, features);
    }
    if (T* gw = grad_of(weight)) {
      MapMat<T>(gw, outs, features).noalias() += gy.transpose() * CMapMat<T>(x->value.data.data(), n, features);
    }
    if (T* gb = grad_of(bias)) {
      for (int c = 0; c < outs; ++c) gb[c] += gy.col(c).sum();
    }
  };
  return res;
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  check(a->value.shape == b->value.shape, "add: shape mismatch");
  const bool grad = wants_grad<T>({&a, &b});
  Tensor<T> out(a->value.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a->value.data[i] + b->value.data[i];
  auto res = make_result<T>(std::move(out), grad, {a, b});
  if (!grad) return res;
  res->backward = [a, b](Node<T>& self) {
    for (const Var<T>* v : {&a, &b}) {
      if (T* g = grad_of(*v)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  };
  return res;
}

template <typename T>
Var<T> scale(const Var<T>& x, T factor) {
  const bool grad = wants_grad<T>({&x});
  Tensor<T> out(x->value.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = factor * x->value.data[i];
  auto res = make_result<T>(std::move(out), grad, {x});
  if (!grad) return res;
  res->backward = [x, factor](Node<T>& self) {
    T* g = grad_of(x);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += factor * self.grad[i];
  };
  return res;
}

template <typename T>
Var<T> mean_squared_to(const Var<T>& x, T target) {
  const bool grad = wants_grad<T>({&x});
  const auto& v = x->value.data;
  double acc = 0.0;
  for (T e : v) acc += (static_cast<double>(e) - target) * (static_cast<double>(e) - target);
  Tensor<T> out(Shape{}, static_cast<T>(acc / static_cast<double>(v.size())));
  auto res = make_result<T>(std::move(out), grad, {x});
  if (!grad) return res;
  res->backward = [x, target](Node<T>& self) {
    T* g = grad_of(x);
    const auto& v = x->value.data;
    const T k = T(2) * self.grad[0] / static_cast<T>(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) g[i] += k * (v[i] - target);
  };
  return res;
}

template <typename T>
Var<T> l1_mean(const Var<T>& x, const Var<T>& y) {
  if (!(x->value.shape == y->value.shape)) {
    throw std::invalid_argument("l1_mean: shape mismatch " + x->value.shape.str() + " vs " +
                                y->value.shape.str());
  }
  const bool grad = wants_grad<T>({&x, &y});
  const auto& a = x->value.data;
  const auto& b = y->value.data;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(static_cast<double>(a[i]) - b[i]);
  if (BranchTrace::current()) {
    std::uint64_t word = 0;
    int bits = 0;
    for (std::size_t i = 0; i < a.size(); ++i) trace_bit(a[i] > b[i], word, bits);
    trace_flush(word, bits);
  }
  Tensor<T> out(Shape{}, static_cast<T>(acc / static_cast<double>(a.size())));
  auto res = make_result<T>(std::move(out), grad, {x, y});
  if (!grad) return res;
  res->backward = [x, y](Node<T>& self) {
    const auto& a = x->value.data;
    const auto& b = y->value.data;
    const T k = self.grad[0] / static_cast<T>(a.size());
    T* gx = grad_of(x);
    T* gy = grad_of(y);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const T s = a[i] > b[i] ? k : (a[i] < b[i] ? -k : T(0));
      if (gx) gx[i] += s;
      if (gy) gy[i] -= s;
    }
  };
  return res;
}

template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, std::span<const T> targets) {
  check(logits->value.numel() == targets.size(), "bce_with_logits: target count mismatch");
  const bool grad = wants_grad<T>({&logits});
  const auto& z = logits->value.data;
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double zi = z[i];
    acc += std::max(zi, 0.0) - zi * targets[i] + std::log1p(std::exp(-std::abs(zi)));
  }
  Tensor<T> out(Shape{}, static_cast<T>(acc / static_cast<double>(z.size())));
  auto res = make_result<T>(std::move(out), grad, {logits});
  if (!grad) return res;
  std::vector<T> t(targets.begin(), targets.end());
  res->backward = [logits, t = std::move(t)](Node<T>& self) {
    T* g = grad_of(logits);
    const auto& z = logits->value.data;
    const T k = self.grad[0] / static_cast<T>(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      const T p = z[i] >= T(0) ? T(1) / (T(1) + std::exp(-z[i])) : std::exp(z[i]) / (T(1) + std::exp(z[i]));
      g[i] += k * (p - t[i]);
    }
  };
  return res;
}

template <typename T>
Var<T> slice_batch(const Var<T>& x, int begin, int end) {
  const Shape s = x->value.shape;
  check(0 <= begin && begin < end && end <= s.n, "slice_batch: bad range");
  const std::size_t per = s.sample_numel();
  const bool grad = wants_grad<T>({&x});
  Tensor<T> out(Shape{end - begin, s.c, s.h, s.w});
  std::copy(x->value.data.begin() + begin * per, x->value.data.begin() + end * per, out.data.begin());
  auto res = make_result<T>(std::move(out), grad, {x});
  if (!grad) return res;
  res->backward = [x, begin, per](Node<T>& self) {
    T* g = grad_of(x) + begin * per;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  };
  return res;
}

template <typename T>
Var<T> concat_batch(const std::vector<Var<T>>& parts) {
  check(!parts.empty(), "concat_batch: nothing to concatenate");
  Shape s = parts.front()->value.shape;
  int total = 0;
  bool grad = false;
  for (const auto& p : parts) {
    const Shape ps = p->value.shape;
    check(ps.c == s.c && ps.h == s.h && ps.w == s.w, "concat_batch: shape mismatch");
    total += ps.n;
    grad = grad || wants_grad<T>({&p});
  }
  s.n = total;
  Tensor<T> out(s);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data.begin(), p->value.data.end(), out.data.begin() + off);
    off += p->value.numel();
  }
  auto res = make_result<T>(std::move(out), grad, parts);
  if (!grad) return res;
  res->backward = [parts](Node<T>& self) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      if (T* g = grad_of(p)) {
        for (std::size_t i = 0; i < p->value.numel(); ++i) g[i] += self.grad[off + i];
      }
      off += p->value.numel();
    }
  };
  return res;
}

#define UDA_INSTANTIATE_OPS(T)                                                              \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);           \
  template Var<T> conv_transpose2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int); \
  template Var<T> instance_norm(const Var<T>&, T);                                         \
  template Var<T> batch_norm(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&, bool, T, \
                             T);                                                          \
  template Var<T> relu(const Var<T>&);                                                     \
  template Var<T> leaky_relu(const Var<T>&, T);                                            \
  template Var<T> sigmoid(const Var<T>&);                                                  \
  template Var<T> max_pool2(const Var<T>&);                                                \
  template Var<T> global_avg_pool(const Var<T>&);                                          \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                     \
  template Var<T> add(const Var<T>&, const Var<T>&);                                       \
  template Var<T> scale(const Var<T>&, T);                                                 \
  template Var<T> mean_squared_to(const Var<T>&, T);                                       \
  template Var<T> l1_mean(const Var<T>&, const Var<T>&);                                   \
  template Var<T> bce_with_logits(const Var<T>&, std::span<const T>);                      \
  template Var<T> slice_batch(const Var<T>&, int, int);                                    \
  template Var<T> concat_batch(const std::vector<Var<T>>&);

UDA_INSTANTIATE_OPS(float)
UDA_INSTANTIATE_OPS(double)

}  // namespace uda::nn
