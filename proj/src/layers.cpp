// SPDX-License-Identifier: Apache-2.0
#include "tdet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tdet {

// ---------------------------------------------------------------------------
// ParameterStore

template <typename T>
Parameter<T>& ParameterStore<T>::add(const std::string& name, const Shape& shape) {
  TDET_CHECK(find(name) == nullptr, ErrorCode::kInvalidArgument,
             "duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter<T>>();
  p->name = name;
  p->value = Tensor<T>(shape);
  p->grad = Tensor<T>(shape);
  params_.push_back(std::move(p));
  return *params_.back();
}

template <typename T>
Parameter<T>* ParameterStore<T>::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

template <typename T>
const Parameter<T>* ParameterStore<T>::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) p->grad.fill(T{});
}

template <typename T>
void ParameterStore<T>::sgd_step(double lr) {
  const T step = static_cast<T>(lr);
  for (auto& p : params_) {
    T* v = p->value.data();
    const T* g = p->grad.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) v[i] -= step * g[i];
  }
}

template <typename T>
bool ParameterStore<T>::all_finite() const {
  for (const auto& p : params_) {
    for (T v : p->value.values())
      if (!std::isfinite(v)) return false;
    for (T v : p->grad.values())
      if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
std::size_t ParameterStore<T>::num_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

template <typename T>
void glorot_uniform(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

// ---------------------------------------------------------------------------
// Conv3d

template <typename T>
Conv3d<T>::Conv3d(ParameterStore<T>& store, const std::string& name, int in_channels,
                  int out_channels, int temporal_kernel, int spatial_kernel, int dilation)
    : in_(in_channels),
      out_(out_channels),
      kt_(temporal_kernel),
      ks_(spatial_kernel),
      dilation_(dilation) {
  TDET_CHECK(in_ >= 1 && out_ >= 1, ErrorCode::kInvalidArgument, "conv: channel counts must be >= 1");
  TDET_CHECK(kt_ >= 1 && kt_ % 2 == 1 && ks_ >= 1 && ks_ % 2 == 1, ErrorCode::kInvalidArgument,
             "conv: kernel sizes must be odd");
  TDET_CHECK(dilation_ >= 1, ErrorCode::kInvalidArgument, "conv: dilation must be >= 1");
  weight_ = &store.add(name + ".weight", {std::size_t(out_), std::size_t(in_), std::size_t(kt_),
                                          std::size_t(ks_), std::size_t(ks_)});
  bias_ = &store.add(name + ".bias", {std::size_t(out_)});
}

template <typename T>
void Conv3d<T>::init(Rng& rng) {
  const std::size_t k = std::size_t(kt_) * ks_ * ks_;
  glorot_uniform(weight_->value, k * in_, k * out_, rng);
  bias_->value.fill(T{});
}

// One pass over all (out, in, tap) triples. Forward accumulates into y;
// backward accumulates into grad_in and the parameter gradients.
template <typename T>
template <bool kBackward>
void Conv3d<T>::sweep(const Tensor<T>& x, const Tensor<T>* gy, Tensor<T>* y,
                      Tensor<T>* gx) const {
  const int L = static_cast<int>(x.dim(1));
  const int H = static_cast<int>(x.dim(2));
  const int W = static_cast<int>(x.dim(3));
  const std::size_t plane = std::size_t(H) * W;
  const std::size_t vol = std::size_t(L) * plane;
  const T* wv = weight_->value.data();
  T* wg = weight_->grad.data();
  const int half_t = kt_ / 2;
  const int half_s = ks_ / 2;

  for (int o = 0; o < out_; ++o) {
    for (int i = 0; i < in_; ++i) {
      const T* xi = x.data() + std::size_t(i) * vol;
      for (int dt = 0; dt < kt_; ++dt) {
        const int toff = (dt - half_t) * dilation_;
        const int t0 = std::max(0, -toff);
        const int t1 = std::min(L, L - toff);
        if (t0 >= t1) continue;
        for (int dh = 0; dh < ks_; ++dh) {
          const int hoff = dh - half_s;
          for (int dw = 0; dw < ks_; ++dw) {
            const int woff = dw - half_s;
            const std::size_t widx =
                ((((std::size_t(o) * in_ + i) * kt_ + dt) * ks_ + dh) * ks_) + dw;
            const T w = wv[widx];
            T wgrad{};
            auto run = [&](std::size_t ybase, std::size_t xbase, std::size_t n) {
              if constexpr (kBackward) {
                const T* g = gy->data() + std::size_t(o) * vol + ybase;
                const T* xs = xi + xbase;
                T* gxs = gx->data() + std::size_t(i) * vol + xbase;
                T acc{};
                for (std::size_t k = 0; k < n; ++k) {
                  gxs[k] += w * g[k];
                  acc += g[k] * xs[k];
                }
                wgrad += acc;
              } else {
                T* ys = y->data() + std::size_t(o) * vol + ybase;
                const T* xs = xi + xbase;
                for (std::size_t k = 0; k < n; ++k) ys[k] += w * xs[k];
              }
            };
            if (ks_ == 1) {
              run(std::size_t(t0) * plane, std::size_t(t0 + toff) * plane,
                  std::size_t(t1 - t0) * plane);
            } else {
              const int h0 = std::max(0, -hoff), h1 = std::min(H, H - hoff);
              const int w0 = std::max(0, -woff), w1 = std::min(W, W - woff);
              if (h0 >= h1 || w0 >= w1) continue;
              for (int t = t0; t < t1; ++t)
                for (int h = h0; h < h1; ++h)
                  run((std::size_t(t) * H + h) * W + w0,
                      (std::size_t(t + toff) * H + h + hoff) * W + w0 + woff,
                      std::size_t(w1 - w0));
            }
            if constexpr (kBackward) wg[widx] += wgrad;
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> Conv3d<T>::forward(const Tensor<T>& x, Tape* tape) const {
  TDET_CHECK(x.rank() == 4 && int(x.dim(0)) == in_, ErrorCode::kShapeMismatch,
             "conv " + weight_->name + ": expected " + std::to_string(in_) +
                 " input channels, got shape " + shape_string(x.shape()));
  Tensor<T> y({std::size_t(out_), x.dim(1), x.dim(2), x.dim(3)});
  const std::size_t vol = x.dim(1) * x.dim(2) * x.dim(3);
  for (int o = 0; o < out_; ++o)
    std::fill_n(y.data() + std::size_t(o) * vol, vol, bias_->value[o]);
  sweep<false>(x, nullptr, &y, nullptr);
  if (tape) tape->input = x;
  return y;
}

template <typename T>
Tensor<T> Conv3d<T>::backward(const Tensor<T>& grad_out, const Tape& tape) {
  const Tensor<T>& x = tape.input;
  expect_shape(grad_out.shape(), {std::size_t(out_), x.dim(1), x.dim(2), x.dim(3)},
               "conv backward");
  Tensor<T> gx(x.shape());
  const std::size_t vol = x.dim(1) * x.dim(2) * x.dim(3);
  for (int o = 0; o < out_; ++o) {
    T acc{};
    const T* g = grad_out.data() + std::size_t(o) * vol;
    for (std::size_t k = 0; k < vol; ++k) acc += g[k];
    bias_->grad[o] += acc;
  }
  sweep<true>(x, &grad_out, nullptr, &gx);
  return gx;
}

// ---------------------------------------------------------------------------
// Relu

template <typename T>
Tensor<T> Relu<T>::forward(const Tensor<T>& x, Tape* tape) const {
  Tensor<T> y(x.shape());
  if (tape) tape->active.assign(x.size(), 0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const bool on = x[k] > T{};
    y[k] = on ? x[k] : T{};
    if (tape) tape->active[k] = on;
  }
  return y;
}

template <typename T>
Tensor<T> Relu<T>::backward(const Tensor<T>& grad_out, const Tape& tape) const {
  TDET_CHECK(grad_out.size() == tape.active.size(), ErrorCode::kShapeMismatch,
             "relu backward: size mismatch");
  Tensor<T> gx(grad_out.shape());
  for (std::size_t k = 0; k < gx.size(); ++k) gx[k] = tape.active[k] ? grad_out[k] : T{};
  return gx;
}

// ---------------------------------------------------------------------------
// TemporalMaxPool

template <typename T>
Tensor<T> TemporalMaxPool<T>::forward(const Tensor<T>& x, Tape* tape) const {
  TDET_CHECK(x.rank() == 4, ErrorCode::kShapeMismatch, "temporal pool expects a 4-d volume");
  const std::size_t C = x.dim(0), L = x.dim(1), plane = x.dim(2) * x.dim(3);
  TDET_CHECK(L % factor_ == 0, ErrorCode::kShapeMismatch,
             "temporal pool: length " + std::to_string(L) + " not divisible by " +
                 std::to_string(factor_));
  const std::size_t Lo = L / factor_;
  Tensor<T> y({C, Lo, x.dim(2), x.dim(3)});
  if (tape) {
    tape->input_shape = x.shape();
    tape->argmax.assign(y.size(), 0);
  }
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t t = 0; t < Lo; ++t)
      for (std::size_t p = 0; p < plane; ++p) {
        std::size_t best = (c * L + t * factor_) * plane + p;
        for (int k = 1; k < factor_; ++k) {
          const std::size_t idx = (c * L + t * factor_ + k) * plane + p;
          if (x[idx] > x[best]) best = idx;
        }
        const std::size_t o = (c * Lo + t) * plane + p;
        y[o] = x[best];
        if (tape) tape->argmax[o] = static_cast<std::uint32_t>(best);
      }
  return y;
}

template <typename T>
Tensor<T> TemporalMaxPool<T>::backward(const Tensor<T>& grad_out, const Tape& tape) const {
  TDET_CHECK(grad_out.size() == tape.argmax.size(), ErrorCode::kShapeMismatch,
             "temporal pool backward: size mismatch");
  Tensor<T> gx(tape.input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) gx[tape.argmax[o]] += grad_out[o];
  return gx;
}

// ---------------------------------------------------------------------------
// SpatialMaxCollapse

template <typename T>
Tensor<T> SpatialMaxCollapse<T>::forward(const Tensor<T>& x, Tape* tape) const {
  TDET_CHECK(x.rank() == 4, ErrorCode::kShapeMismatch, "spatial collapse expects a 4-d volume");
  const std::size_t C = x.dim(0), L = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<T> y({C, L});
  if (tape) {
    tape->input_shape = x.shape();
    tape->argmax.assign(y.size(), 0);
  }
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t t = 0; t < L; ++t) {
      const std::size_t base = (c * L + t) * plane;
      std::size_t best = base;
      for (std::size_t p = 1; p < plane; ++p)
        if (x[base + p] > x[best]) best = base + p;
      y[c * L + t] = x[best];
      if (tape) tape->argmax[c * L + t] = static_cast<std::uint32_t>(best);
    }
  return y;
}

template <typename T>
Tensor<T> SpatialMaxCollapse<T>::backward(const Tensor<T>& grad_out, const Tape& tape) const {
  TDET_CHECK(grad_out.size() == tape.argmax.size(), ErrorCode::kShapeMismatch,
             "spatial collapse backward: size mismatch");
  Tensor<T> gx(tape.input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) gx[tape.argmax[o]] += grad_out[o];
  return gx;
}

// ---------------------------------------------------------------------------
// Pointwise

template <typename T>
Pointwise<T>::Pointwise(ParameterStore<T>& store, const std::string& name, int in, int out)
    : in_(in), out_(out) {
  weight_ = &store.add(name + ".weight", {std::size_t(out), std::size_t(in)});
  bias_ = &store.add(name + ".bias", {std::size_t(out)});
}

template <typename T>
void Pointwise<T>::init(Rng& rng) {
  glorot_uniform(weight_->value, in_, out_, rng);
  bias_->value.fill(T{});
}

template <typename T>
Tensor<T> Pointwise<T>::forward(const Tensor<T>& x, Tape* tape) const {
  TDET_CHECK(x.rank() == 2 && int(x.dim(0)) == in_, ErrorCode::kShapeMismatch,
             "pointwise " + weight_->name + ": bad input shape " + shape_string(x.shape()));
  const std::size_t L = x.dim(1);
  Tensor<T> y({std::size_t(out_), L});
  for (int o = 0; o < out_; ++o) {
    T* yo = y.data() + std::size_t(o) * L;
    std::fill_n(yo, L, bias_->value[o]);
    for (int i = 0; i < in_; ++i) {
      const T w = weight_->value[std::size_t(o) * in_ + i];
      const T* xi = x.data() + std::size_t(i) * L;
      for (std::size_t t = 0; t < L; ++t) yo[t] += w * xi[t];
    }
  }
  if (tape) tape->input = x;
  return y;
}

template <typename T>
Tensor<T> Pointwise<T>::backward(const Tensor<T>& grad_out, const Tape& tape) {
  const Tensor<T>& x = tape.input;
  const std::size_t L = x.dim(1);
  expect_shape(grad_out.shape(), {std::size_t(out_), L}, "pointwise backward");
  Tensor<T> gx(x.shape());
  for (int o = 0; o < out_; ++o) {
    const T* g = grad_out.data() + std::size_t(o) * L;
    T bacc{};
    for (std::size_t t = 0; t < L; ++t) bacc += g[t];
    bias_->grad[o] += bacc;
    for (int i = 0; i < in_; ++i) {
      const T w = weight_->value[std::size_t(o) * in_ + i];
      const T* xi = x.data() + std::size_t(i) * L;
      T* gxi = gx.data() + std::size_t(i) * L;
      T acc{};
      for (std::size_t t = 0; t < L; ++t) {
        acc += g[t] * xi[t];
        gxi[t] += w * g[t];
      }
      weight_->grad[std::size_t(o) * in_ + i] += acc;
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Linear

template <typename T>
Linear<T>::Linear(ParameterStore<T>& store, const std::string& name, int in, int out)
    : in_(in), out_(out) {
  weight_ = &store.add(name + ".weight", {std::size_t(out), std::size_t(in)});
  bias_ = &store.add(name + ".bias", {std::size_t(out)});
}

template <typename T>
void Linear<T>::init(Rng& rng) {
  glorot_uniform(weight_->value, in_, out_, rng);
  bias_->value.fill(T{});
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, Tape* tape) const {
  TDET_CHECK(x.rank() == 2 && int(x.dim(1)) == in_, ErrorCode::kShapeMismatch,
             "linear " + weight_->name + ": bad input shape " + shape_string(x.shape()));
  const std::size_t N = x.dim(0);
  Tensor<T> y({N, std::size_t(out_)});
  for (std::size_t n = 0; n < N; ++n) {
    const T* xn = x.data() + n * in_;
    for (int o = 0; o < out_; ++o) {
      const T* w = weight_->value.data() + std::size_t(o) * in_;
      T acc = bias_->value[o];
      for (int i = 0; i < in_; ++i) acc += w[i] * xn[i];
      y[n * out_ + o] = acc;
    }
  }
  if (tape) tape->input = x;
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& grad_out, const Tape& tape) {
  const Tensor<T>& x = tape.input;
  const std::size_t N = x.dim(0);
  expect_shape(grad_out.shape(), {N, std::size_t(out_)}, "linear backward");
  Tensor<T> gx(x.shape());
  for (std::size_t n = 0; n < N; ++n) {
    const T* xn = x.data() + n * in_;
    T* gxn = gx.data() + n * in_;
    for (int o = 0; o < out_; ++o) {
      const T g = grad_out[n * out_ + o];
      if (g == T{}) continue;
      bias_->grad[o] += g;
      const T* w = weight_->value.data() + std::size_t(o) * in_;
      T* wg = weight_->grad.data() + std::size_t(o) * in_;
      for (int i = 0; i < in_; ++i) {
        wg[i] += g * xn[i];
        gxn[i] += g * w[i];
      }
    }
  }
  return gx;
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template void glorot_uniform<float>(Tensor<float>&, std::size_t, std::size_t, Rng&);
template void glorot_uniform<double>(Tensor<double>&, std::size_t, std::size_t, Rng&);
template class Conv3d<float>;
template class Conv3d<double>;
template class Relu<float>;
template class Relu<double>;
template class TemporalMaxPool<float>;
template class TemporalMaxPool<double>;
template class SpatialMaxCollapse<float>;
template class SpatialMaxCollapse<double>;
template class Pointwise<float>;
template class Pointwise<double>;
template class Linear<float>;
template class Linear<double>;

}  // namespace tdet
