// SPDX-License-Identifier: Apache-2.0
#include "tdet/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tdet {
namespace {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    TDET_CHECK(j_.is_object(), ErrorCode::kParse, "config: section '" + section_ + "' must be an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) unseen_.insert(it.key());
  }

  template <typename V>
  void get(const char* key, V& out) {
    if (!j_.contains(key)) return;
    unseen_.erase(key);
    try {
      out = j_.at(key).get<V>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, "config: " + section_ + "." + key + ": " + e.what());
    }
  }

  const json* sub(const char* key) {
    if (!j_.contains(key)) return nullptr;
    unseen_.erase(key);
    return &j_.at(key);
  }

  void finish() const {
    TDET_CHECK(unseen_.empty(), ErrorCode::kParse,
               "config: unknown key '" + section_ + "." +
                   (unseen_.empty() ? std::string() : *unseen_.begin()) + "'");
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> unseen_;
};

void read_backbone(const json& j, BackboneConfig& c) {
  Reader r(j, "model.backbone");
  r.get("in_channels", c.in_channels);
  r.get("hidden_channels", c.hidden_channels);
  r.get("pool_factors", c.pool_factors);
  r.get("dilations", c.dilations);
  r.get("spatial_kernel", c.spatial_kernel);
  r.get("height", c.height);
  r.get("width", c.width);
  r.get("temporal_downsample", c.temporal_downsample);
  r.finish();
}

void read_model(const json& j, ModelConfig& c) {
  Reader r(j, "model");
  if (const json* b = r.sub("backbone")) read_backbone(*b, c.backbone);
  r.get("anchor_scales", c.anchor_scales);
  r.get("proposal_channels", c.proposal_channels);
  std::vector<int> grid{c.pool_grid.ls, c.pool_grid.hs, c.pool_grid.ws};
  r.get("pool_grid", grid);
  TDET_CHECK(grid.size() == 3, ErrorCode::kParse, "config: model.pool_grid needs 3 entries");
  c.pool_grid = {grid[0], grid[1], grid[2]};
  r.get("fc_dims", c.fc_dims);
  r.get("num_classes", c.num_classes);
  r.finish();
}

json write_model(const ModelConfig& c) {
  return json{{"backbone",
               {{"in_channels", c.backbone.in_channels},
                {"hidden_channels", c.backbone.hidden_channels},
                {"pool_factors", c.backbone.pool_factors},
                {"dilations", c.backbone.dilations},
                {"spatial_kernel", c.backbone.spatial_kernel},
                {"height", c.backbone.height},
                {"width", c.backbone.width},
                {"temporal_downsample", c.backbone.temporal_downsample}}},
              {"anchor_scales", c.anchor_scales},
              {"proposal_channels", c.proposal_channels},
              {"pool_grid", {c.pool_grid.ls, c.pool_grid.hs, c.pool_grid.ws}},
              {"fc_dims", c.fc_dims},
              {"num_classes", c.num_classes}};
}

BufferMode parse_mode(const std::string& s) {
  if (s == "one-way") return BufferMode::kOneWay;
  if (s == "two-way") return BufferMode::kTwoWay;
  throw Error(ErrorCode::kParse, "config: buffer_mode must be 'one-way' or 'two-way', got '" + s + "'");
}

void read_train(const json& j, TrainConfig& c) {
  Reader r(j, "train");
  r.get("lr", c.lr);
  r.get("epochs", c.epochs);
  r.get("decay_epoch", c.decay_epoch);
  r.get("decay_factor", c.decay_factor);
  r.get("buffer_length", c.buffer_length);
  std::string mode = c.buffer_mode == BufferMode::kOneWay ? "one-way" : "two-way";
  r.get("buffer_mode", mode);
  c.buffer_mode = parse_mode(mode);
  r.get("pos_iou_hi", c.pos_iou_hi);
  r.get("pos_iou_lo", c.pos_iou_lo);
  r.get("cls_iou", c.cls_iou);
  r.get("lambda", c.lambda);
  r.get("proposal_batch", c.proposal_batch);
  r.get("proposal_positive_fraction", c.proposal_positive_fraction);
  r.get("cls_batch", c.cls_batch);
  r.get("cls_positive_fraction", c.cls_positive_fraction);
  r.get("proposal_nms", c.proposal_nms);
  r.get("train_proposals", c.train_proposals);
  r.get("add_gt_proposals", c.add_gt_proposals);
  r.get("seed", c.seed);
  r.get("max_steps", c.max_steps);
  r.finish();
}

json write_train(const TrainConfig& c) {
  return json{{"lr", c.lr},
              {"epochs", c.epochs},
              {"decay_epoch", c.decay_epoch},
              {"decay_factor", c.decay_factor},
              {"buffer_length", c.buffer_length},
              {"buffer_mode", c.buffer_mode == BufferMode::kOneWay ? "one-way" : "two-way"},
              {"pos_iou_hi", c.pos_iou_hi},
              {"pos_iou_lo", c.pos_iou_lo},
              {"cls_iou", c.cls_iou},
              {"lambda", c.lambda},
              {"proposal_batch", c.proposal_batch},
              {"proposal_positive_fraction", c.proposal_positive_fraction},
              {"cls_batch", c.cls_batch},
              {"cls_positive_fraction", c.cls_positive_fraction},
              {"proposal_nms", c.proposal_nms},
              {"train_proposals", c.train_proposals},
              {"add_gt_proposals", c.add_gt_proposals},
              {"seed", c.seed},
              {"max_steps", c.max_steps}};
}

void read_detect(const json& j, DetectConfig& c) {
  Reader r(j, "detect");
  r.get("proposal_nms", c.proposal_nms);
  r.get("eval_iou", c.eval_iou);
  r.get("score_floor", c.score_floor);
  r.get("max_proposals", c.max_proposals);
  r.get("min_proposal_length", c.min_proposal_length);
  r.get("max_log_length_delta", c.max_log_length_delta);
  r.finish();
}

json write_detect(const DetectConfig& c) {
  return json{{"proposal_nms", c.proposal_nms},
              {"eval_iou", c.eval_iou},
              {"score_floor", c.score_floor},
              {"max_proposals", c.max_proposals},
              {"min_proposal_length", c.min_proposal_length},
              {"max_log_length_delta", c.max_log_length_delta}};
}

void read_synth(const json& j, SynthConfig& c) {
  Reader r(j, "synth");
  r.get("num_classes", c.num_classes);
  r.get("num_videos", c.num_videos);
  r.get("min_frames", c.min_frames);
  r.get("max_frames", c.max_frames);
  r.get("min_activities", c.min_activities);
  r.get("max_activities", c.max_activities);
  r.get("min_duration_s", c.min_duration_s);
  r.get("max_duration_s", c.max_duration_s);
  r.get("fps", c.fps);
  r.get("snr", c.snr);
  r.get("channels", c.channels);
  r.get("height", c.height);
  r.get("width", c.width);
  r.get("allow_overlap", c.allow_overlap);
  r.get("min_gap_s", c.min_gap_s);
  r.get("seed", c.seed);
  r.get("id_prefix", c.id_prefix);
  r.finish();
}

json write_synth(const SynthConfig& c) {
  return json{{"num_classes", c.num_classes},   {"num_videos", c.num_videos},
              {"min_frames", c.min_frames},     {"max_frames", c.max_frames},
              {"min_activities", c.min_activities}, {"max_activities", c.max_activities},
              {"min_duration_s", c.min_duration_s}, {"max_duration_s", c.max_duration_s},
              {"fps", c.fps},                   {"snr", c.snr},
              {"channels", c.channels},         {"height", c.height},
              {"width", c.width},               {"allow_overlap", c.allow_overlap},
              {"min_gap_s", c.min_gap_s},
              {"seed", c.seed},                 {"id_prefix", c.id_prefix}};
}

json parse_text(const std::string& text) {
  try {
    return text.empty() ? json::object() : json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  const json j = parse_text(json_text);
  RunConfig c;
  Reader r(j, "root");
  if (const json* s = r.sub("model")) read_model(*s, c.model);
  if (const json* s = r.sub("train")) read_train(*s, c.train);
  if (const json* s = r.sub("detect")) read_detect(*s, c.detect);
  if (const json* s = r.sub("synth")) read_synth(*s, c.synth);
  r.finish();
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  return json{{"model", write_model(c.model)},
              {"train", write_train(c.train)},
              {"detect", write_detect(c.detect)},
              {"synth", write_synth(c.synth)}}
      .dump(2);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  TDET_CHECK(in.good(), ErrorCode::kIo, "config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

ModelConfig parse_model_config(const std::string& json_text) {
  ModelConfig c;
  read_model(parse_text(json_text), c);
  return c;
}

std::string model_config_to_json(const ModelConfig& c) { return write_model(c).dump(2); }

}  // namespace tdet
