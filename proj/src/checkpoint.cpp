// SPDX-License-Identifier: Apache-2.0
#include "tdet/checkpoint.hpp"

#include <fstream>
#include <map>

#include "tdet/binary_io.hpp"

namespace tdet {

namespace {
// Guards against allocating from a corrupt header.
constexpr std::uint64_t kMaxRank = 8;
constexpr std::uint64_t kMaxNameLength = 4096;
}  // namespace

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  TDET_CHECK(os.good(), ErrorCode::kIo, "cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, 4);
  io::put_le<std::uint32_t>(os, kCheckpointVersion);
  io::put_le<std::uint64_t>(os, tensors.size());
  for (const auto& t : tensors) {
    io::put_le<std::uint64_t>(os, t.name.size());
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    io::put_le<std::uint64_t>(os, t.tensor.rank());
    for (auto d : t.tensor.shape()) io::put_le<std::uint64_t>(os, d);
    for (float v : t.tensor.values()) io::put_f32(os, v);
  }
  TDET_CHECK(os.good(), ErrorCode::kIo, "failed writing checkpoint: " + path.string());
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  TDET_CHECK(is.good(), ErrorCode::kIo, "cannot open checkpoint: " + path.string());
  char magic[4] = {};
  is.read(magic, 4);
  TDET_CHECK(is.gcount() == 4 && std::memcmp(magic, kCheckpointMagic, 4) == 0, ErrorCode::kParse,
             "not a checkpoint file (bad magic): " + path.string());
  const auto version = io::get_le<std::uint32_t>(is, "checkpoint version");
  TDET_CHECK(version == kCheckpointVersion, ErrorCode::kParse,
             "unsupported checkpoint version " + std::to_string(version));
  const auto count = io::get_le<std::uint64_t>(is, "tensor count");
  std::vector<NamedTensor> out;
  for (std::uint64_t n = 0; n < count; ++n) {
    NamedTensor t;
    const auto name_len = io::get_le<std::uint64_t>(is, "name length");
    TDET_CHECK(name_len <= kMaxNameLength, ErrorCode::kParse, "checkpoint name too long");
    t.name.resize(name_len);
    is.read(t.name.data(), static_cast<std::streamsize>(name_len));
    TDET_CHECK(is.gcount() == static_cast<std::streamsize>(name_len), ErrorCode::kParse,
               "truncated checkpoint name");
    const auto rank = io::get_le<std::uint64_t>(is, "rank of " + t.name);
    TDET_CHECK(rank <= kMaxRank, ErrorCode::kParse, "checkpoint rank too large for " + t.name);
    Shape shape(rank);
    for (auto& d : shape) d = io::get_le<std::uint64_t>(is, "dims of " + t.name);
    std::vector<float> values(shape_size(shape));
    for (auto& v : values) v = io::get_f32(is, "values of " + t.name);
    t.tensor = Tensor<float>(std::move(shape), std::move(values));
    out.push_back(std::move(t));
  }
  return out;
}

void save_parameters(const std::filesystem::path& path, const ParameterStore<float>& store) {
  std::vector<NamedTensor> tensors;
  for (std::size_t i = 0; i < store.size(); ++i) tensors.push_back({store[i].name, store[i].value});
  write_checkpoint(path, tensors);
}

void load_parameters(const std::filesystem::path& path, ParameterStore<float>& store) {
  auto tensors = read_checkpoint(path);
  std::map<std::string, Tensor<float>*> by_name;
  for (auto& t : tensors) {
    TDET_CHECK(by_name.emplace(t.name, &t.tensor).second, ErrorCode::kParse,
               "duplicate tensor in checkpoint: " + t.name);
  }
  TDET_CHECK(tensors.size() == store.size(), ErrorCode::kShapeMismatch,
             "checkpoint holds " + std::to_string(tensors.size()) + " tensors, model expects " +
                 std::to_string(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto it = by_name.find(store[i].name);
    TDET_CHECK(it != by_name.end(), ErrorCode::kShapeMismatch,
               "checkpoint is missing parameter " + store[i].name);
    expect_shape(it->second->shape(), store[i].value.shape(),
                 ("checkpoint parameter " + store[i].name).c_str());
  }
  for (std::size_t i = 0; i < store.size(); ++i) store[i].value = *by_name[store[i].name];
}

}  // namespace tdet
