// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "tdet/geometry.hpp"
#include "tdet/tensor.hpp"

namespace tdet {

/// Output subdivision counts along time, height and width.
struct PoolGrid {
  int ls = 1;
  int hs = 4;
  int ws = 4;

  std::size_t cells() const noexcept { return std::size_t(ls) * hs * ws; }
  friend bool operator==(const PoolGrid&, const PoolGrid&) = default;
};

/// Activations of shape channels x l x h x w, one temporal cell per
/// `temporal_stride` input frames.
template <typename T>
struct FeatureVolume {
  Tensor<T> data;
  int temporal_stride = 8;
};

inline constexpr std::int64_t kNoArgmax = -1;

template <typename T>
struct PoolRecord {
  Tensor<T> output;                  // channels x ls x hs x ws
  std::vector<std::int64_t> argmax;  // linear index into the input volume
  Shape input_shape;
};

/// Half-open range of feature cells covered by a proposal: floor(start /
/// stride) to ceil(end / stride), clipped to [0, l) and widened to at least
/// one cell. Throws kEmptyRegion when the proposal lies outside the volume.
struct CellRange {
  int begin = 0;
  int end = 0;
};
CellRange proposal_cells(const TemporalSegment& proposal, int temporal_stride, int length);

/// Bin k of `bins` over `extent` cells: [floor(k*extent/bins),
/// floor((k+1)*extent/bins)), widened so that no bin is empty.
CellRange pool_bin(int k, int bins, int extent);

template <typename T>
PoolRecord<T> roi_pool_forward(const FeatureVolume<T>& features,
                               const TemporalSegment& proposal, const PoolGrid& grid);

/// Scatters grad_output into a fresh gradient of shape `input_shape`.
template <typename T>
Tensor<T> roi_pool_backward(const Tensor<T>& grad_output, const PoolRecord<T>& record,
                            const Shape& input_shape);

/// Same as roi_pool_backward but adds into an existing gradient buffer.
template <typename T>
void roi_pool_backward_accumulate(std::span<const T> grad_output, const PoolRecord<T>& record,
                                  Tensor<T>& grad_input);

}  // namespace tdet
