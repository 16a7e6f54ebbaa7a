// SPDX-License-Identifier: Apache-2.0
#include "tdet/roipool.hpp"

#include <cmath>
#include <string>

namespace tdet {

CellRange proposal_cells(const TemporalSegment& proposal, int temporal_stride, int length) {
  const double s = std::floor(proposal.start / temporal_stride);
  const double e = std::ceil(proposal.end / temporal_stride);
  TDET_CHECK(std::isfinite(s) && std::isfinite(e) && s < length && e > 0 && s <= e,
             ErrorCode::kEmptyRegion, "roi pooling: proposal lies outside the feature extent");
  CellRange r;
  r.begin = std::max(0, static_cast<int>(s));
  r.end = std::min(length, static_cast<int>(e));
  if (r.end <= r.begin) r.end = r.begin + 1;
  return r;
}

CellRange pool_bin(int k, int bins, int extent) {
  CellRange r;
  r.begin = static_cast<int>((static_cast<long long>(k) * extent) / bins);
  r.end = static_cast<int>((static_cast<long long>(k + 1) * extent) / bins);
  if (r.end <= r.begin) r.end = r.begin + 1;
  return r;
}

template <typename T>
PoolRecord<T> roi_pool_forward(const FeatureVolume<T>& features,
                               const TemporalSegment& proposal, const PoolGrid& grid) {
  const Tensor<T>& in = features.data;
  TDET_CHECK(in.rank() == 4, ErrorCode::kShapeMismatch, "roi pooling expects a 4-d volume");
  TDET_CHECK(grid.ls >= 1 && grid.hs >= 1 && grid.ws >= 1, ErrorCode::kInvalidArgument,
             "roi pooling: grid counts must be >= 1");
  const int C = static_cast<int>(in.dim(0));
  const int L = static_cast<int>(in.dim(1));
  const int H = static_cast<int>(in.dim(2));
  const int W = static_cast<int>(in.dim(3));
  const CellRange cells = proposal_cells(proposal, features.temporal_stride, L);
  const int lp = cells.end - cells.begin;

  PoolRecord<T> rec;
  rec.input_shape = in.shape();
  rec.output = Tensor<T>({std::size_t(C), std::size_t(grid.ls), std::size_t(grid.hs),
                          std::size_t(grid.ws)});
  rec.argmax.assign(rec.output.size(), kNoArgmax);

  std::size_t o = 0;
  for (int c = 0; c < C; ++c) {
    const std::size_t cbase = std::size_t(c) * L * H * W;
    for (int bt = 0; bt < grid.ls; ++bt) {
      const CellRange tr = pool_bin(bt, grid.ls, lp);
      for (int bh = 0; bh < grid.hs; ++bh) {
        const CellRange hr = pool_bin(bh, grid.hs, H);
        for (int bw = 0; bw < grid.ws; ++bw, ++o) {
          const CellRange wr = pool_bin(bw, grid.ws, W);
          std::int64_t best_idx = kNoArgmax;
          T best{};
          for (int t = cells.begin + tr.begin; t < cells.begin + tr.end; ++t)
            for (int h = hr.begin; h < hr.end; ++h)
              for (int w = wr.begin; w < wr.end; ++w) {
                const std::size_t idx = cbase + (std::size_t(t) * H + h) * W + w;
                // Strict comparison in ascending index order: ties keep the lowest index.
                if (best_idx == kNoArgmax || in[idx] > best) {
                  best = in[idx];
                  best_idx = static_cast<std::int64_t>(idx);
                }
              }
          rec.output[o] = best;
          rec.argmax[o] = best_idx;
        }
      }
    }
  }
  return rec;
}

template <typename T>
void roi_pool_backward_accumulate(std::span<const T> grad_output, const PoolRecord<T>& record,
                                  Tensor<T>& grad_input) {
  TDET_CHECK(grad_output.size() == record.argmax.size(), ErrorCode::kShapeMismatch,
             "roi pooling backward: gradient size does not match the pooled output");
  expect_shape(grad_input.shape(), record.input_shape, "roi pooling backward input gradient");
  for (std::size_t o = 0; o < grad_output.size(); ++o) {
    const std::int64_t idx = record.argmax[o];
    if (idx != kNoArgmax) grad_input[static_cast<std::size_t>(idx)] += grad_output[o];
  }
}

template <typename T>
Tensor<T> roi_pool_backward(const Tensor<T>& grad_output, const PoolRecord<T>& record,
                            const Shape& input_shape) {
  expect_shape(grad_output.shape(), record.output.shape(), "roi pooling backward");
  expect_shape(input_shape, record.input_shape, "roi pooling backward input shape");
  Tensor<T> grad(input_shape);
  roi_pool_backward_accumulate(grad_output.values(), record, grad);
  return grad;
}

#define TDET_INSTANTIATE(T)                                                                  \
  template PoolRecord<T> roi_pool_forward<T>(const FeatureVolume<T>&, const TemporalSegment&, \
                                             const PoolGrid&);                               \
  template Tensor<T> roi_pool_backward<T>(const Tensor<T>&, const PoolRecord<T>&,            \
                                          const Shape&);                                     \
  template void roi_pool_backward_accumulate<T>(std::span<const T>, const PoolRecord<T>&,    \
                                                Tensor<T>&);
TDET_INSTANTIATE(float)
TDET_INSTANTIATE(double)
#undef TDET_INSTANTIATE

}  // namespace tdet
