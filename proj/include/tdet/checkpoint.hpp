// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tdet/layers.hpp"

namespace tdet {

// Binary layout, all integers little-endian:
//   "TDCK" | u32 version | u64 count |
//   count x ( u64 name_len | name bytes | u64 rank | rank x u64 dim | f32 values )
inline constexpr char kCheckpointMagic[4] = {'T', 'D', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

void save_parameters(const std::filesystem::path& path, const ParameterStore<float>& store);

/// Copies checkpoint values into `store`. Every parameter must be present with
/// a matching shape and no extra tensors are allowed; throws kShapeMismatch or
/// kParse otherwise.
void load_parameters(const std::filesystem::path& path, ParameterStore<float>& store);

}  // namespace tdet
