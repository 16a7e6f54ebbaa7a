// SPDX-License-Identifier: Apache-2.0
#include "tdet/model.hpp"

#include <string>

namespace tdet {

void BackboneConfig::validate() const {
  TDET_CHECK(in_channels >= 1, ErrorCode::kInvalidArgument, "backbone: in_channels must be >= 1");
  TDET_CHECK(!hidden_channels.empty(), ErrorCode::kInvalidArgument,
             "backbone: at least one layer is required");
  TDET_CHECK(pool_factors.size() == hidden_channels.size() &&
                 dilations.size() == hidden_channels.size(),
             ErrorCode::kInvalidArgument,
             "backbone: hidden_channels, pool_factors and dilations must have equal length");
  int product = 1;
  for (std::size_t l = 0; l < hidden_channels.size(); ++l) {
    TDET_CHECK(hidden_channels[l] >= 1 && pool_factors[l] >= 1 && dilations[l] >= 1,
               ErrorCode::kInvalidArgument, "backbone: layer sizes must be >= 1");
    product *= pool_factors[l];
  }
  TDET_CHECK(product == temporal_downsample, ErrorCode::kInvalidArgument,
             "backbone: pool factors multiply to " + std::to_string(product) +
                 ", expected the temporal downsample " + std::to_string(temporal_downsample));
  TDET_CHECK(spatial_kernel >= 1 && spatial_kernel % 2 == 1, ErrorCode::kInvalidArgument,
             "backbone: spatial_kernel must be odd");
  TDET_CHECK(height >= 1 && width >= 1, ErrorCode::kInvalidArgument,
             "backbone: spatial dims must be >= 1");
}

void ModelConfig::validate() const {
  backbone.validate();
  TDET_CHECK(!anchor_scales.empty(), ErrorCode::kInvalidArgument, "model: empty anchor scales");
  for (int s : anchor_scales)
    TDET_CHECK(s >= 1, ErrorCode::kInvalidArgument, "model: anchor scales must be >= 1");
  TDET_CHECK(proposal_channels >= 1, ErrorCode::kInvalidArgument,
             "model: proposal_channels must be >= 1");
  TDET_CHECK(pool_grid.ls >= 1 && pool_grid.hs >= 1 && pool_grid.ws >= 1,
             ErrorCode::kInvalidArgument, "model: pool grid counts must be >= 1");
  for (int d : fc_dims)
    TDET_CHECK(d >= 1, ErrorCode::kInvalidArgument, "model: fc dims must be >= 1");
  TDET_CHECK(num_classes >= 1, ErrorCode::kInvalidArgument, "model: num_classes must be >= 1");
}

// ---------------------------------------------------------------------------

template <typename T>
Backbone<T>::Backbone(ParameterStore<T>& store, const BackboneConfig& config) : config_(config) {
  config_.validate();
  int in = config_.in_channels;
  for (std::size_t l = 0; l < config_.hidden_channels.size(); ++l) {
    convs_.emplace_back(store, "backbone.conv" + std::to_string(l), in,
                        config_.hidden_channels[l], 3, config_.spatial_kernel,
                        config_.dilations[l]);
    pools_.emplace_back(config_.pool_factors[l]);
    in = config_.hidden_channels[l];
  }
}

template <typename T>
void Backbone<T>::init(Rng& rng) {
  for (auto& c : convs_) c.init(rng);
}

template <typename T>
FeatureVolume<T> Backbone<T>::forward(const Tensor<T>& input, Tape* tape) const {
  TDET_CHECK(input.rank() == 4, ErrorCode::kShapeMismatch, "backbone expects C x L x H x W input");
  expect_shape({input.dim(0), input.dim(2), input.dim(3)},
               {std::size_t(config_.in_channels), std::size_t(config_.height),
                std::size_t(config_.width)},
               "backbone input channels/spatial dims");
  TDET_CHECK(input.dim(1) > 0 && input.dim(1) % config_.temporal_downsample == 0,
             ErrorCode::kShapeMismatch,
             "backbone: input length " + std::to_string(input.dim(1)) +
                 " is not a positive multiple of " + std::to_string(config_.temporal_downsample));
  const std::size_t n = convs_.size();
  if (tape) {
    tape->conv.assign(n, {});
    tape->relu.assign(n, {});
    tape->pool.assign(n, {});
  }
  Tensor<T> x = input;
  for (std::size_t l = 0; l < n; ++l) {
    x = convs_[l].forward(x, tape ? &tape->conv[l] : nullptr);
    x = Relu<T>{}.forward(x, tape ? &tape->relu[l] : nullptr);
    if (pools_[l].factor() > 1) x = pools_[l].forward(x, tape ? &tape->pool[l] : nullptr);
  }
  return {std::move(x), config_.temporal_downsample};
}

template <typename T>
Tensor<T> Backbone<T>::backward(const Tensor<T>& grad_features, const Tape& tape) {
  Tensor<T> g = grad_features;
  for (std::size_t l = convs_.size(); l-- > 0;) {
    if (pools_[l].factor() > 1) g = pools_[l].backward(g, tape.pool[l]);
    g = Relu<T>{}.backward(g, tape.relu[l]);
    g = convs_[l].backward(g, tape.conv[l]);
  }
  return g;
}

// ---------------------------------------------------------------------------

template <typename T>
ProposalHead<T>::ProposalHead(ParameterStore<T>& store, int in_channels, int channels,
                              int num_scales, int spatial_kernel)
    : trunk_(store, "proposal.trunk", in_channels, channels, 3, spatial_kernel, 1),
      score_(store, "proposal.score", channels, 2 * num_scales),
      offset_(store, "proposal.offset", channels, 2 * num_scales),
      k_(num_scales) {}

template <typename T>
void ProposalHead<T>::init(Rng& rng) {
  trunk_.init(rng);
  score_.init(rng);
  offset_.init(rng);
}

namespace {

// (2K x L) channel-major projection output <-> (L x K x 2) anchor-major view.
template <typename T>
Tensor<T> to_anchor_major(const Tensor<T>& proj, int k) {
  const std::size_t L = proj.dim(1);
  Tensor<T> out({L, std::size_t(k), 2});
  for (std::size_t ch = 0; ch < std::size_t(2 * k); ++ch)
    for (std::size_t t = 0; t < L; ++t) out[t * 2 * k + ch] = proj[ch * L + t];
  return out;
}

template <typename T>
Tensor<T> to_channel_major(const Tensor<T>& view, int k) {
  const std::size_t L = view.dim(0);
  Tensor<T> out({std::size_t(2 * k), L});
  for (std::size_t ch = 0; ch < std::size_t(2 * k); ++ch)
    for (std::size_t t = 0; t < L; ++t) out[ch * L + t] = view[t * 2 * k + ch];
  return out;
}

}  // namespace

template <typename T>
ProposalOutput<T> ProposalHead<T>::forward(const FeatureVolume<T>& features, Tape* tape) const {
  Tensor<T> x = trunk_.forward(features.data, tape ? &tape->conv : nullptr);
  x = relu_.forward(x, tape ? &tape->relu : nullptr);
  Tensor<T> c = collapse_.forward(x, tape ? &tape->collapse : nullptr);
  ProposalOutput<T> out;
  out.logits = to_anchor_major(score_.forward(c, tape ? &tape->score : nullptr), k_);
  out.offsets = to_anchor_major(offset_.forward(c, tape ? &tape->offset : nullptr), k_);
  return out;
}

template <typename T>
Tensor<T> ProposalHead<T>::backward(const Tensor<T>& grad_logits, const Tensor<T>& grad_offsets,
                                    const Tape& tape) {
  const std::size_t L = tape.score.input.dim(1);
  expect_shape(grad_logits.shape(), {L, std::size_t(k_), 2}, "proposal head score gradient");
  expect_shape(grad_offsets.shape(), {L, std::size_t(k_), 2}, "proposal head offset gradient");
  Tensor<T> gc = score_.backward(to_channel_major(grad_logits, k_), tape.score);
  const Tensor<T> gc2 = offset_.backward(to_channel_major(grad_offsets, k_), tape.offset);
  for (std::size_t i = 0; i < gc.size(); ++i) gc[i] += gc2[i];
  Tensor<T> g = collapse_.backward(gc, tape.collapse);
  g = relu_.backward(g, tape.relu);
  return trunk_.backward(g, tape.conv);
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
std::vector<Linear<T>> make_fc_stack(ParameterStore<T>& store, std::size_t in_features,
                                     const std::vector<int>& fc_dims) {
  std::vector<Linear<T>> fc;
  int in = static_cast<int>(in_features);
  for (std::size_t l = 0; l < fc_dims.size(); ++l) {
    fc.emplace_back(store, "classifier.fc" + std::to_string(l), in, fc_dims[l]);
    in = fc_dims[l];
  }
  return fc;
}

}  // namespace

template <typename T>
ClassificationHead<T>::ClassificationHead(ParameterStore<T>& store, std::size_t in_features,
                                          const std::vector<int>& fc_dims, int num_classes)
    : in_features_(in_features),
      num_classes_(num_classes),
      fc_(make_fc_stack(store, in_features, fc_dims)),
      cls_(store, "classifier.cls", fc_dims.empty() ? int(in_features) : fc_dims.back(),
           num_classes + 1),
      reg_(store, "classifier.reg", fc_dims.empty() ? int(in_features) : fc_dims.back(),
           2 * (num_classes + 1)) {}

template <typename T>
void ClassificationHead<T>::init(Rng& rng) {
  for (auto& f : fc_) f.init(rng);
  cls_.init(rng);
  reg_.init(rng);
}

template <typename T>
ClassificationOutput<T> ClassificationHead<T>::forward(const Tensor<T>& pooled,
                                                       Tape* tape) const {
  TDET_CHECK(pooled.rank() == 2 && pooled.dim(1) == in_features_, ErrorCode::kShapeMismatch,
             "classification head: expected N x " + std::to_string(in_features_) +
                 " input, got " + shape_string(pooled.shape()));
  if (tape) {
    tape->fc.assign(fc_.size(), {});
    tape->relu.assign(fc_.size(), {});
  }
  Tensor<T> x = pooled;
  for (std::size_t l = 0; l < fc_.size(); ++l) {
    x = fc_[l].forward(x, tape ? &tape->fc[l] : nullptr);
    x = relu_.forward(x, tape ? &tape->relu[l] : nullptr);
  }
  ClassificationOutput<T> out;
  out.logits = cls_.forward(x, tape ? &tape->cls : nullptr);
  Tensor<T> reg = reg_.forward(x, tape ? &tape->reg : nullptr);
  out.offsets = Tensor<T>({pooled.dim(0), std::size_t(num_classes_ + 1), 2},
                          std::vector<T>(reg.values().begin(), reg.values().end()));
  return out;
}

template <typename T>
ClassificationOutput<T> ClassificationHead<T>::forward(const PoolRecord<T>& pooled,
                                                       Tape* tape) const {
  TDET_CHECK(pooled.output.size() == in_features_, ErrorCode::kShapeMismatch,
             "classification head: pooled record has " + std::to_string(pooled.output.size()) +
                 " values, expected " + std::to_string(in_features_));
  Tensor<T> row({1, in_features_},
                std::vector<T>(pooled.output.values().begin(), pooled.output.values().end()));
  return forward(row, tape);
}

template <typename T>
Tensor<T> ClassificationHead<T>::backward(const Tensor<T>& grad_logits,
                                          const Tensor<T>& grad_offsets, const Tape& tape) {
  const std::size_t N = tape.cls.input.dim(0);
  expect_shape(grad_logits.shape(), {N, std::size_t(num_classes_ + 1)},
               "classification head logit gradient");
  TDET_CHECK(grad_offsets.size() == N * 2 * std::size_t(num_classes_ + 1),
             ErrorCode::kShapeMismatch, "classification head offset gradient size mismatch");
  Tensor<T> greg({N, std::size_t(2 * (num_classes_ + 1))},
                 std::vector<T>(grad_offsets.values().begin(), grad_offsets.values().end()));
  Tensor<T> g = cls_.backward(grad_logits, tape.cls);
  const Tensor<T> g2 = reg_.backward(greg, tape.reg);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += g2[i];
  for (std::size_t l = fc_.size(); l-- > 0;) {
    g = relu_.backward(g, tape.relu[l]);
    g = fc_[l].backward(g, tape.fc[l]);
  }
  return g;
}

// ---------------------------------------------------------------------------

template <typename T>
Network<T>::Network(const ModelConfig& config, std::uint64_t seed)
    : config_(config),
      store_(),
      backbone_(store_, config_.backbone),
      proposal_(store_, config_.backbone.out_channels(), config_.proposal_channels,
                config_.num_scales(), config_.backbone.spatial_kernel),
      classifier_(store_, config_.pooled_size(), config_.fc_dims, config_.num_classes) {
  config_.validate();
  Rng rng(seed);
  backbone_.init(rng);
  proposal_.init(rng);
  classifier_.init(rng);
}

template <typename T>
AnchorGrid Network<T>::anchors(int num_locations) const {
  return generate_anchors(num_locations, config_.anchor_scales, config_.stride());
}

template <typename T>
ClassificationOutput<T> Network<T>::classify(const FeatureVolume<T>& features,
                                             std::span<const TemporalSegment> rois,
                                             RoiTape* tape) const {
  const std::size_t D = config_.pooled_size();
  Tensor<T> batch({rois.size(), D});
  if (tape) tape->records.clear();
  for (std::size_t n = 0; n < rois.size(); ++n) {
    PoolRecord<T> rec = roi_pool_forward(features, rois[n], config_.pool_grid);
    std::copy(rec.output.values().begin(), rec.output.values().end(), batch.data() + n * D);
    if (tape) tape->records.push_back(std::move(rec));
  }
  return classifier_.forward(batch, tape ? &tape->head : nullptr);
}

template <typename T>
void Network<T>::classify_backward(const Tensor<T>& grad_logits, const Tensor<T>& grad_offsets,
                                   const RoiTape& tape, Tensor<T>& grad_features) {
  const Tensor<T> gpool = classifier_.backward(grad_logits, grad_offsets, tape.head);
  const std::size_t D = config_.pooled_size();
  for (std::size_t n = 0; n < tape.records.size(); ++n)
    roi_pool_backward_accumulate(std::span<const T>(gpool.data() + n * D, D), tape.records[n],
                                 grad_features);
}

template class Backbone<float>;
template class Backbone<double>;
template class ProposalHead<float>;
template class ProposalHead<double>;
template class ClassificationHead<float>;
template class ClassificationHead<double>;
template class Network<float>;
template class Network<double>;

}  // namespace tdet
