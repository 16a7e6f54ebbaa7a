// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "tdet/data.hpp"
#include "tdet/inference.hpp"
#include "tdet/model.hpp"
#include "tdet/train.hpp"

namespace tdet {

/// Full run configuration. JSON layout: {"model": {...}, "train": {...},
/// "detect": {...}, "synth": {...}}; missing sections and keys keep their
/// defaults, unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DetectConfig detect;
  SynthConfig synth;
};

RunConfig parse_run_config(const std::string& json_text);
std::string run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

ModelConfig parse_model_config(const std::string& json_text);
std::string model_config_to_json(const ModelConfig& config);

}  // namespace tdet
