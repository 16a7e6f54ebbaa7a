// SPDX-License-Identifier: Apache-2.0
#pragma once

// Differentiable building blocks. Every layer is split into a const forward
// pass that optionally records what it needs into a tape, and a backward pass
// that consumes the tape, returns the input gradient and accumulates parameter
// gradients into the owning ParameterStore.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tdet/rng.hpp"
#include "tdet/tensor.hpp"

namespace tdet {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

/// Named tensors in registration order; addresses are stable.
template <typename T>
class ParameterStore {
 public:
  Parameter<T>& add(const std::string& name, const Shape& shape);

  std::size_t size() const noexcept { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }
  Parameter<T>* find(const std::string& name);
  const Parameter<T>* find(const std::string& name) const;

  void zero_grad();
  void sgd_step(double lr);
  bool all_finite() const;
  std::size_t num_values() const;

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_uniform(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Convolution over a C x L x H x W volume with "same" zero padding. The
/// temporal kernel is dilated; the spatial kernel is square.
template <typename T>
class Conv3d {
 public:
  struct Tape {
    Tensor<T> input;
  };

  Conv3d(ParameterStore<T>& store, const std::string& name, int in_channels,
         int out_channels, int temporal_kernel, int spatial_kernel, int dilation);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Tape* tape) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Tape& tape);

  int in_channels() const noexcept { return in_; }
  int out_channels() const noexcept { return out_; }

 private:
  template <bool kBackward>
  void sweep(const Tensor<T>& x, const Tensor<T>* grad_out, Tensor<T>* y,
             Tensor<T>* grad_in) const;

  Parameter<T>* weight_;  // out x in x kt x ks x ks
  Parameter<T>* bias_;    // out
  int in_, out_, kt_, ks_, dilation_;
};

template <typename T>
class Relu {
 public:
  struct Tape {
    std::vector<std::uint8_t> active;
  };
  Tensor<T> forward(const Tensor<T>& x, Tape* tape) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Tape& tape) const;
};

/// Non-overlapping max pooling along the temporal axis of C x L x H x W.
template <typename T>
class TemporalMaxPool {
 public:
  struct Tape {
    Shape input_shape;
    std::vector<std::uint32_t> argmax;
  };
  explicit TemporalMaxPool(int factor) : factor_(factor) {}
  int factor() const noexcept { return factor_; }
  Tensor<T> forward(const Tensor<T>& x, Tape* tape) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Tape& tape) const;

 private:
  int factor_;
};

/// Max over the full spatial extent: C x L x H x W -> C x L.
template <typename T>
class SpatialMaxCollapse {
 public:
  struct Tape {
    Shape input_shape;
    std::vector<std::uint32_t> argmax;
  };
  Tensor<T> forward(const Tensor<T>& x, Tape* tape) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Tape& tape) const;
};

/// Per-location linear map along time (a 1-tap convolution): I x L -> O x L.
template <typename T>
class Pointwise {
 public:
  struct Tape {
    Tensor<T> input;
  };
  Pointwise(ParameterStore<T>& store, const std::string& name, int in, int out);
  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Tape* tape) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Tape& tape);

 private:
  Parameter<T>* weight_;  // out x in
  Parameter<T>* bias_;
  int in_, out_;
};

/// Fully connected layer over a batch: N x I -> N x O.
template <typename T>
class Linear {
 public:
  struct Tape {
    Tensor<T> input;
  };
  Linear(ParameterStore<T>& store, const std::string& name, int in, int out);
  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Tape* tape) const;
  Tensor<T> backward(const Tensor<T>& grad_out, const Tape& tape);

  int in_features() const noexcept { return in_; }
  int out_features() const noexcept { return out_; }

 private:
  Parameter<T>* weight_;  // out x in
  Parameter<T>* bias_;
  int in_, out_;
};

}  // namespace tdet
