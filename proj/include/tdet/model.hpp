// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tdet/geometry.hpp"
#include "tdet/layers.hpp"
#include "tdet/roipool.hpp"

namespace tdet {

/// Temporal encoder standing in for the 3D ConvNet. Layer l is a 3-tap
/// temporal convolution (dilated by dilations[l], spatial kernel
/// spatial_kernel), a rectifier, and temporal max pooling by pool_factors[l].
/// The product of the pool factors must equal temporal_downsample.
struct BackboneConfig {
  int in_channels = 8;
  std::vector<int> hidden_channels{32, 32, 64};
  std::vector<int> pool_factors{2, 2, 2};
  std::vector<int> dilations{1, 1, 1};
  int spatial_kernel = 1;
  int height = 2;
  int width = 2;
  int temporal_downsample = 8;

  void validate() const;
  int out_channels() const { return hidden_channels.back(); }
};

struct ModelConfig {
  BackboneConfig backbone;
  std::vector<int> anchor_scales{2, 4, 5, 6, 8, 9, 10, 12, 14, 16};
  int proposal_channels = 64;
  PoolGrid pool_grid{1, 4, 4};
  std::vector<int> fc_dims{128, 128};
  int num_classes = 5;

  void validate() const;
  int stride() const { return backbone.temporal_downsample; }
  int num_scales() const { return static_cast<int>(anchor_scales.size()); }
  std::size_t pooled_size() const {
    return std::size_t(backbone.out_channels()) * pool_grid.cells();
  }
};

template <typename T>
class Backbone {
 public:
  struct Tape {
    std::vector<typename Conv3d<T>::Tape> conv;
    std::vector<typename Relu<T>::Tape> relu;
    std::vector<typename TemporalMaxPool<T>::Tape> pool;
  };

  Backbone(ParameterStore<T>& store, const BackboneConfig& config);
  void init(Rng& rng);

  /// input: in_channels x L x height x width with L divisible by the
  /// temporal downsample factor. Output length is exactly L / 8.
  FeatureVolume<T> forward(const Tensor<T>& input, Tape* tape) const;
  Tensor<T> backward(const Tensor<T>& grad_features, const Tape& tape);

 private:
  BackboneConfig config_;
  std::vector<Conv3d<T>> convs_;
  std::vector<TemporalMaxPool<T>> pools_;
};

template <typename T>
struct ProposalOutput {
  Tensor<T> logits;   // locations x K x 2 (background, activity)
  Tensor<T> offsets;  // locations x K x 2 (delta center, delta log length)
};

/// Temporal proposal head: a 3-tap convolution, spatial max collapse to 1x1,
/// then two per-location projections emitting 2K scores and 2K offsets.
template <typename T>
class ProposalHead {
 public:
  struct Tape {
    typename Conv3d<T>::Tape conv;
    typename Relu<T>::Tape relu;
    typename SpatialMaxCollapse<T>::Tape collapse;
    typename Pointwise<T>::Tape score;
    typename Pointwise<T>::Tape offset;
  };

  ProposalHead(ParameterStore<T>& store, int in_channels, int channels, int num_scales,
               int spatial_kernel);
  void init(Rng& rng);
  ProposalOutput<T> forward(const FeatureVolume<T>& features, Tape* tape) const;
  Tensor<T> backward(const Tensor<T>& grad_logits, const Tensor<T>& grad_offsets,
                     const Tape& tape);

  int num_scales() const noexcept { return k_; }

 private:
  Conv3d<T> trunk_;
  Relu<T> relu_;
  SpatialMaxCollapse<T> collapse_;
  Pointwise<T> score_;
  Pointwise<T> offset_;
  int k_;
};

template <typename T>
struct ClassificationOutput {
  Tensor<T> logits;   // N x (C+1)
  Tensor<T> offsets;  // N x (C+1) x 2, per-class
};

/// Two fully connected layers on flattened pooled features, followed by a
/// class projection and a per-class regression projection.
template <typename T>
class ClassificationHead {
 public:
  struct Tape {
    std::vector<typename Linear<T>::Tape> fc;
    std::vector<typename Relu<T>::Tape> relu;
    typename Linear<T>::Tape cls;
    typename Linear<T>::Tape reg;
  };

  ClassificationHead(ParameterStore<T>& store, std::size_t in_features,
                     const std::vector<int>& fc_dims, int num_classes);
  void init(Rng& rng);

  /// pooled: N x in_features.
  ClassificationOutput<T> forward(const Tensor<T>& pooled, Tape* tape) const;
  /// Convenience overload for a single pooled proposal.
  ClassificationOutput<T> forward(const PoolRecord<T>& pooled, Tape* tape) const;
  Tensor<T> backward(const Tensor<T>& grad_logits, const Tensor<T>& grad_offsets,
                     const Tape& tape);

  std::size_t in_features() const noexcept { return in_features_; }

 private:
  std::size_t in_features_;
  int num_classes_;
  std::vector<Linear<T>> fc_;
  Relu<T> relu_;
  Linear<T> cls_;
  Linear<T> reg_;
};

/// The full two-stage network sharing one backbone between both heads.
template <typename T>
class Network {
 public:
  struct RoiTape {
    std::vector<PoolRecord<T>> records;
    typename ClassificationHead<T>::Tape head;
  };

  Network(const ModelConfig& config, std::uint64_t seed);
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore<T>& params() noexcept { return store_; }
  const ParameterStore<T>& params() const noexcept { return store_; }
  Backbone<T>& backbone() noexcept { return backbone_; }
  const Backbone<T>& backbone() const noexcept { return backbone_; }
  ProposalHead<T>& proposal_head() noexcept { return proposal_; }
  const ProposalHead<T>& proposal_head() const noexcept { return proposal_; }
  ClassificationHead<T>& classification_head() noexcept { return classifier_; }
  const ClassificationHead<T>& classification_head() const noexcept { return classifier_; }

  AnchorGrid anchors(int num_locations) const;

  /// RoI-pools each proposal (input-frame units) from `features` and runs the
  /// classification head on the batch.
  ClassificationOutput<T> classify(const FeatureVolume<T>& features,
                                   std::span<const TemporalSegment> rois, RoiTape* tape) const;
  /// Adds the gradient w.r.t. the shared features into grad_features.
  void classify_backward(const Tensor<T>& grad_logits, const Tensor<T>& grad_offsets,
                         const RoiTape& tape, Tensor<T>& grad_features);

 private:
  ModelConfig config_;
  ParameterStore<T> store_;
  Backbone<T> backbone_;
  ProposalHead<T> proposal_;
  ClassificationHead<T> classifier_;
};

}  // namespace tdet
