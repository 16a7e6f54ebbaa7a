// SPDX-License-Identifier: Apache-2.0
#include "tdet/tdet.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "json.hpp"
#include "tdet/bench.hpp"
#include "tdet/checkpoint.hpp"
#include "tdet/config.hpp"
#include "tdet/eval.hpp"

struct tdet_model {
  explicit tdet_model(const tdet::ModelConfig& config, std::uint64_t seed) : net(config, seed) {}
  tdet::Network<float> net;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

tdet_status to_status(tdet::ErrorCode code) {
  switch (code) {
    case tdet::ErrorCode::kInvalidArgument: return TDET_E_INVALID_ARGUMENT;
    case tdet::ErrorCode::kDegenerateSegment: return TDET_E_DEGENERATE_SEGMENT;
    case tdet::ErrorCode::kEmptyRegion: return TDET_E_EMPTY_REGION;
    case tdet::ErrorCode::kShapeMismatch: return TDET_E_SHAPE_MISMATCH;
    case tdet::ErrorCode::kIo: return TDET_E_IO;
    case tdet::ErrorCode::kParse: return TDET_E_PARSE;
    case tdet::ErrorCode::kValidation: return TDET_E_VALIDATION;
    case tdet::ErrorCode::kDiverged: return TDET_E_DIVERGED;
  }
  return TDET_E_INTERNAL;
}

template <typename F>
tdet_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return TDET_OK;
  } catch (const tdet::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return TDET_E_INTERNAL;
}

void require(const void* p, const char* what) {
  TDET_CHECK(p != nullptr, tdet::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

tdet::RunConfig resolve(const char* config_json) {
  return tdet::parse_run_config(config_json ? config_json : "");
}

std::string sidecar(const char* checkpoint) { return std::string(checkpoint) + ".json"; }

std::vector<tdet::EvalGroundTruth> ground_truth(const std::vector<tdet::VideoRecord>& videos) {
  std::vector<tdet::EvalGroundTruth> out;
  for (const auto& v : videos)
    for (const auto& a : v.annotations) out.push_back({v.id, a.class_id, {a.start_s, a.end_s}});
  return out;
}

std::vector<tdet::EvalDetection> to_eval(const std::vector<tdet::DetectionRecord>& records) {
  std::vector<tdet::EvalDetection> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.video_id, r.class_id, {r.start_s, r.end_s}, r.score});
  return out;
}

}  // namespace

extern "C" {

const char* tdet_version(void) { return "0.1.0"; }

const char* tdet_last_error(void) { return g_last_error.c_str(); }

void tdet_free_string(char* s) { std::free(s); }

tdet_status tdet_config_resolve(const char* config_json, char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    const auto c = resolve(config_json);
    c.model.validate();
    c.train.validate();
    c.detect.validate();
    c.synth.validate();
    emit(out_json, tdet::run_config_to_json(c));
  });
}

tdet_status tdet_generate_data(const char* config_json, const char* out_dir, char** summary_json) {
  return guarded([&] {
    require(out_dir, "out_dir");
    const auto c = resolve(config_json);
    const auto videos = tdet::generate_synthetic(c.synth, out_dir);
    std::size_t activities = 0;
    long frames = 0;
    for (const auto& v : videos) {
      activities += v.annotations.size();
      frames += v.num_frames;
    }
    emit(summary_json, json{{"videos", videos.size()},
                            {"activities", activities},
                            {"frames", frames},
                            {"annotations", (std::filesystem::path(out_dir) / "annotations.jsonl").string()}}
                           .dump());
  });
}

tdet_status tdet_model_create(const char* config_json, uint64_t seed, tdet_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    const auto c = resolve(config_json);
    *out = new tdet_model(c.model, seed);
  });
}

tdet_status tdet_model_load(const char* checkpoint_path, tdet_model** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out, "out");
    *out = nullptr;
    std::ifstream in(sidecar(checkpoint_path));
    TDET_CHECK(in.good(), tdet::ErrorCode::kIo,
               "cannot open model description " + sidecar(checkpoint_path));
    std::stringstream ss;
    ss << in.rdbuf();
    auto model = std::make_unique<tdet_model>(tdet::parse_model_config(ss.str()), 0);
    tdet::load_parameters(checkpoint_path, model->net.params());
    *out = model.release();
  });
}

tdet_status tdet_model_save(const tdet_model* model, const char* checkpoint_path) {
  return guarded([&] {
    require(model, "model");
    require(checkpoint_path, "checkpoint_path");
    tdet::save_parameters(checkpoint_path, model->net.params());
    std::ofstream out(sidecar(checkpoint_path), std::ios::binary | std::ios::trunc);
    out << tdet::model_config_to_json(model->net.config()) << '\n';
    TDET_CHECK(out.good(), tdet::ErrorCode::kIo, "cannot write " + sidecar(checkpoint_path));
  });
}

void tdet_model_destroy(tdet_model* model) { delete model; }

tdet_status tdet_model_config(const tdet_model* model, char** out_json) {
  return guarded([&] {
    require(model, "model");
    require(out_json, "out_json");
    emit(out_json, tdet::model_config_to_json(model->net.config()));
  });
}

tdet_status tdet_train(tdet_model* model, const char* annotations_path, const char* config_json,
                       tdet_log_fn log, void* user, char** summary_json) {
  return guarded([&] {
    require(model, "model");
    require(annotations_path, "annotations_path");
    const auto c = resolve(config_json);
    const auto dataset = tdet::load_dataset(annotations_path, model->net.config().num_classes);
    const auto result = tdet::train(model->net, dataset, c.train, [&](const tdet::EpochLog& e) {
      if (!log) return;
      char line[256];
      std::snprintf(line, sizeof line,
                    "epoch %d lr %.3g steps %zu loss %.6f proposal %.6f classification %.6f (%.1f s)",
                    e.epoch + 1, e.lr, e.steps, e.mean_total, e.mean_proposal,
                    e.mean_classification, e.seconds);
      log(line, user);
    });
    json epochs = json::array();
    for (const auto& e : result.epochs)
      epochs.push_back({{"epoch", e.epoch + 1},
                        {"lr", e.lr},
                        {"steps", e.steps},
                        {"loss", e.mean_total},
                        {"proposal_loss", e.mean_proposal},
                        {"classification_loss", e.mean_classification},
                        {"seconds", e.seconds}});
    emit(summary_json, json{{"steps", result.steps}, {"epochs", epochs}}.dump());
  });
}

tdet_status tdet_detect(const tdet_model* model, const char* annotations_path,
                        const char* config_json, const char* detections_path,
                        const char* proposals_path, char** summary_json) {
  return guarded([&] {
    require(model, "model");
    require(annotations_path, "annotations_path");
    require(detections_path, "detections_path");
    const auto c = resolve(config_json);
    c.detect.validate();
    const auto dataset = tdet::load_dataset(annotations_path, model->net.config().num_classes);
    std::vector<tdet::DetectionRecord> dets, props;
    for (const auto& v : dataset) {
      std::vector<tdet::ScoredSegment> proposals;
      const auto found = tdet::detect_video(v.features, v.record.num_frames, model->net, c.detect,
                                            c.train.buffer_length,
                                            proposals_path ? &proposals : nullptr);
      const double fps = v.record.fps;
      for (const auto& d : found)
        dets.push_back({v.record.id, d.class_id, d.segment.start / fps, d.segment.end / fps, d.score});
      for (const auto& p : proposals)
        props.push_back({v.record.id, 0, p.segment.start / fps, p.segment.end / fps, p.score});
    }
    tdet::write_detections(detections_path, dets);
    if (proposals_path) tdet::write_detections(proposals_path, props);
    emit(summary_json, json{{"videos", dataset.size()},
                            {"detections", dets.size()},
                            {"proposals", props.size()},
                            {"final_nms", c.detect.final_nms()}}
                           .dump());
  });
}

tdet_status tdet_eval(const char* annotations_path, const char* detections_path,
                      const double* thresholds, size_t num_thresholds, const char* proposals_path,
                      double proposal_iou, double proposal_score, char** result_json,
                      char** table_text) {
  return guarded([&] {
    require(annotations_path, "annotations_path");
    require(detections_path, "detections_path");
    TDET_CHECK(thresholds && num_thresholds > 0, tdet::ErrorCode::kInvalidArgument,
               "eval: at least one IoU threshold is required");
    const auto records = tdet::load_annotations(annotations_path);
    const auto gts = ground_truth(records);
    const auto dets = to_eval(tdet::read_detections(detections_path));
    const std::vector<double> alphas(thresholds, thresholds + num_thresholds);
    const auto result = tdet::map_at(dets, gts, alphas);

    json j = json::parse(tdet::to_json(result));
    std::string table = tdet::format_table(result);
    if (proposals_path) {
      std::vector<tdet::EvalDetection> props;
      for (auto& p : to_eval(tdet::read_detections(proposals_path)))
        if (p.score >= proposal_score) props.push_back(p);
      const auto pr = tdet::proposal_pr(props, gts, proposal_iou);
      j["proposals"] = {{"iou", proposal_iou},
                        {"min_score", proposal_score},
                        {"count", props.size()},
                        {"precision", pr.precision},
                        {"recall", pr.recall}};
      char line[160];
      std::snprintf(line, sizeof line, "proposals@%.2f (score >= %.2f): precision %.4f recall %.4f\n",
                    proposal_iou, proposal_score, pr.precision, pr.recall);
      table += line;
    }
    emit(result_json, j.dump(2));
    emit(table_text, table);
  });
}

tdet_status tdet_bench(const tdet_model* model, const char* config_json, int buffers_per_rep,
                       int repetitions, int warmup, uint64_t seed, char** result_json) {
  return guarded([&] {
    require(model, "model");
    const auto c = resolve(config_json);
    tdet::BenchConfig bc;
    bc.buffer_length = c.train.buffer_length;
    bc.buffers_per_rep = buffers_per_rep;
    bc.repetitions = repetitions;
    bc.warmup = warmup;
    bc.seed = seed;
    bc.detect = c.detect;
    const auto r = tdet::speed_benchmark(model->net, bc);
    emit(result_json, json{{"buffer_length", bc.buffer_length},
                           {"buffers_per_rep", bc.buffers_per_rep},
                           {"fps", r.fps},
                           {"median_fps", r.median_fps},
                           {"mad_fps", r.mad_fps},
                           {"relative_mad", r.relative_mad()},
                           {"hardware", r.hardware}}
                          .dump(2));
  });
}

double tdet_segment_iou(double a_start, double a_end, double b_start, double b_end) {
  return tdet::segment_iou({a_start, a_end}, {b_start, b_end});
}

tdet_status tdet_nms(const double* starts, const double* ends, const double* scores, size_t n,
                     double threshold, size_t* keep, size_t* num_kept) {
  return guarded([&] {
    require(num_kept, "num_kept");
    *num_kept = 0;
    if (n == 0) return;
    require(starts, "starts");
    require(ends, "ends");
    require(scores, "scores");
    require(keep, "keep");
    std::vector<tdet::ScoredSegment> c(n);
    for (size_t i = 0; i < n; ++i) c[i] = {{starts[i], ends[i]}, scores[i]};
    const auto kept = tdet::nms(c, threshold);
    std::copy(kept.begin(), kept.end(), keep);
    *num_kept = kept.size();
  });
}

}  // extern "C"
