// SPDX-License-Identifier: Apache-2.0
// Command-line front end. Links only the C API.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tdet/tdet.h"

namespace {

using nlohmann::json;

struct Failure {
  tdet_status status;
};

void check(tdet_status s) {
  if (s != TDET_OK) throw Failure{s};
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { tdet_free_string(p); }
  std::string str() const { return p ? p : ""; }
};

struct Model {
  tdet_model* p = nullptr;
  ~Model() { tdet_model_destroy(p); }
};

// Config file plus flag overrides. Flags left unset keep the file value.
struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;

  std::optional<int> buffer_length;
  std::string anchor_scales;
  std::optional<int> stride;
  std::optional<double> proposal_nms;
  std::optional<double> eval_iou;
  std::optional<double> pos_iou_hi;
  std::optional<double> pos_iou_lo;
  std::optional<double> cls_iou;
  std::optional<double> lambda;
  std::optional<double> lr;
  std::optional<int> epochs;
  std::optional<int> decay_epoch;

  std::optional<int> num_videos;
  std::optional<int> num_classes;
  std::optional<double> snr;
  std::optional<std::string> id_prefix;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::vector<int> parse_int_list(const std::string& text, const char* flag) {
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size())
      throw std::runtime_error(std::string(flag) + ": '" + item + "' is not an integer");
    out.push_back(v);
  }
  if (out.empty()) throw std::runtime_error(std::string(flag) + ": empty list");
  return out;
}

template <typename V>
void set(json& j, const char* section, const char* key, const std::optional<V>& v) {
  if (v) j[section][key] = *v;
}

std::string effective_config(const Options& o) {
  json j = load_config(o.config_path);
  set(j, "train", "buffer_length", o.buffer_length);
  if (!o.anchor_scales.empty()) j["model"]["anchor_scales"] = parse_int_list(o.anchor_scales, "--anchor-scales");
  if (o.stride) j["model"]["backbone"]["temporal_downsample"] = *o.stride;
  if (o.proposal_nms) {
    j["train"]["proposal_nms"] = *o.proposal_nms;
    j["detect"]["proposal_nms"] = *o.proposal_nms;
  }
  set(j, "detect", "eval_iou", o.eval_iou);
  set(j, "train", "pos_iou_hi", o.pos_iou_hi);
  set(j, "train", "pos_iou_lo", o.pos_iou_lo);
  set(j, "train", "cls_iou", o.cls_iou);
  set(j, "train", "lambda", o.lambda);
  set(j, "train", "lr", o.lr);
  set(j, "train", "epochs", o.epochs);
  set(j, "train", "decay_epoch", o.decay_epoch);
  set(j, "synth", "num_videos", o.num_videos);
  if (o.num_classes) {
    j["synth"]["num_classes"] = *o.num_classes;
    j["model"]["num_classes"] = *o.num_classes;
  }
  set(j, "synth", "snr", o.snr);
  set(j, "synth", "id_prefix", o.id_prefix);
  if (o.seed) {
    j["train"]["seed"] = *o.seed;
    j["synth"]["seed"] = *o.seed;
  }
  OwnedString resolved;
  check(tdet_config_resolve(j.dump().c_str(), &resolved.p));
  return resolved.str();
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "JSON config file (sections model/train/detect/synth)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Random seed");
}

void add_model_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--buffer-length", o.buffer_length, "Buffer length in frames (default 768)");
  cmd->add_option("--anchor-scales", o.anchor_scales,
                  "Comma-separated anchor scales (default 2,4,5,6,8,9,10,12,14,16)");
  cmd->add_option("--stride", o.stride, "Temporal stride of the feature map (default 8)");
  cmd->add_option("--proposal-nms", o.proposal_nms, "Proposal NMS IoU (default 0.7)");
}

void print_log(const char* line, void*) {
  std::printf("%s\n", line);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage temporal activity detection toolkit"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("generate-data", "Write a synthetic feature-video dataset");
  std::string gen_out;
  add_common(gen, o);
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--num-videos", o.num_videos, "Number of videos");
  gen->add_option("--num-classes", o.num_classes, "Number of activity classes");
  gen->add_option("--snr", o.snr, "Pattern amplitude over noise standard deviation");
  gen->add_option("--id-prefix", o.id_prefix, "Video id prefix");

  auto* tr = app.add_subcommand("train", "Train a detector");
  std::string tr_data, tr_out, tr_init;
  add_common(tr, o);
  add_model_flags(tr, o);
  tr->add_option("--data", tr_data, "Annotation file (JSON Lines)")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--init", tr_init, "Start from this checkpoint")->check(CLI::ExistingFile);
  tr->add_option("--pos-iou-hi", o.pos_iou_hi, "Proposal positive IoU (default 0.7)");
  tr->add_option("--pos-iou-lo", o.pos_iou_lo, "Proposal negative IoU (default 0.3)");
  tr->add_option("--cls-iou", o.cls_iou, "Classification foreground IoU (default 0.5)");
  tr->add_option("--lambda", o.lambda, "Regression loss weight (default 1.0)");
  tr->add_option("--lr", o.lr, "Initial learning rate (default 1e-4)");
  tr->add_option("--epochs", o.epochs, "Epochs");
  tr->add_option("--decay-epoch", o.decay_epoch, "Epoch at which the learning rate drops");
  tr->add_option("--num-classes", o.num_classes, "Number of activity classes");

  auto* det = app.add_subcommand("detect", "Detect activities");
  std::string det_model, det_data, det_out, det_props;
  add_common(det, o);
  add_model_flags(det, o);
  det->add_option("--model", det_model, "Checkpoint path")->required()->check(CLI::ExistingFile);
  det->add_option("--data", det_data, "Annotation file listing the videos")->required()->check(CLI::ExistingFile);
  det->add_option("--out", det_out, "Detection file (TSV)")->required();
  det->add_option("--proposals-out", det_props, "Also write stage-1 proposals here");
  det->add_option("--eval-iou", o.eval_iou, "Evaluation IoU; final NMS uses eval-iou - 0.1 (default 0.5)");

  auto* ev = app.add_subcommand("eval", "Evaluate detections");
  std::string ev_data, ev_dets, ev_props, ev_json, ev_grid = "thumos";
  double ev_prop_iou = 0.7, ev_prop_score = 0.5;
  add_common(ev, o);
  ev->add_option("--data", ev_data, "Ground-truth annotation file")->required()->check(CLI::ExistingFile);
  ev->add_option("--detections", ev_dets, "Detection file (TSV)")->required()->check(CLI::ExistingFile);
  ev->add_option("--proposals", ev_props, "Proposal file for the precision/recall check")->check(CLI::ExistingFile);
  ev->add_option("--eval-iou", o.eval_iou, "Single IoU threshold (overrides --grid)");
  ev->add_option("--grid", ev_grid, "Threshold grid: thumos (0.1..0.5) or activitynet (0.5..0.95)")
      ->check(CLI::IsMember({"thumos", "activitynet"}));
  ev->add_option("--proposal-iou", ev_prop_iou, "Proposal correctness IoU (strict, default 0.7)");
  ev->add_option("--proposal-score", ev_prop_score, "Minimum proposal score counted (default 0.5)");
  ev->add_option("--json-out", ev_json, "Write the structured result here");

  auto* be = app.add_subcommand("bench", "Measure inference throughput");
  std::string be_model;
  int be_reps = 10, be_buffers = 4, be_warmup = 2;
  add_common(be, o);
  add_model_flags(be, o);
  be->add_option("--model", be_model, "Checkpoint path (default: randomly initialised model)")
      ->check(CLI::ExistingFile);
  be->add_option("--repetitions", be_reps, "Timed repetitions")->check(CLI::PositiveNumber);
  be->add_option("--buffers", be_buffers, "Buffers per repetition")->check(CLI::PositiveNumber);
  be->add_option("--warmup", be_warmup, "Untimed warm-up buffers")->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    const std::string config = effective_config(o);
    const std::uint64_t seed = o.seed.value_or(0);

    if (*gen) {
      OwnedString summary;
      check(tdet_generate_data(config.c_str(), gen_out.c_str(), &summary.p));
      std::printf("%s\n", summary.str().c_str());
    } else if (*tr) {
      Model model;
      if (tr_init.empty())
        check(tdet_model_create(config.c_str(), seed, &model.p));
      else
        check(tdet_model_load(tr_init.c_str(), &model.p));
      OwnedString summary;
      check(tdet_train(model.p, tr_data.c_str(), config.c_str(), print_log, nullptr, &summary.p));
      check(tdet_model_save(model.p, tr_out.c_str()));
      std::printf("saved %s\n", tr_out.c_str());
    } else if (*det) {
      Model model;
      check(tdet_model_load(det_model.c_str(), &model.p));
      OwnedString summary;
      check(tdet_detect(model.p, det_data.c_str(), config.c_str(), det_out.c_str(),
                        det_props.empty() ? nullptr : det_props.c_str(), &summary.p));
      std::printf("%s\n", summary.str().c_str());
    } else if (*ev) {
      std::vector<double> grid;
      if (o.eval_iou) {
        grid = {*o.eval_iou};
      } else if (ev_grid == "activitynet") {
        for (int i = 0; i < 10; ++i) grid.push_back(0.5 + 0.05 * i);
      } else {
        grid = {0.1, 0.2, 0.3, 0.4, 0.5};
      }
      OwnedString result, table;
      check(tdet_eval(ev_data.c_str(), ev_dets.c_str(), grid.data(), grid.size(),
                      ev_props.empty() ? nullptr : ev_props.c_str(), ev_prop_iou, ev_prop_score,
                      &result.p, &table.p));
      std::printf("%s", table.str().c_str());
      if (!ev_json.empty()) {
        std::ofstream out(ev_json);
        out << result.str() << '\n';
        if (!out) throw std::runtime_error("cannot write " + ev_json);
      }
    } else if (*be) {
      Model model;
      if (be_model.empty())
        check(tdet_model_create(config.c_str(), seed, &model.p));
      else
        check(tdet_model_load(be_model.c_str(), &model.p));
      OwnedString result;
      check(tdet_bench(model.p, config.c_str(), be_buffers, be_reps, be_warmup, seed, &result.p));
      const json r = json::parse(result.str());
      const double median = r["median_fps"].get<double>();
      const double rel = r["relative_mad"].get<double>();
      std::printf("hardware: %s\n", r["hardware"].get<std::string>().c_str());
      std::printf("buffer %d frames x %d per repetition, %d repetitions\n",
                  r["buffer_length"].get<int>(), be_buffers, be_reps);
      std::printf("median fps %.1f  MAD %.1f (%.1f%%)  %s\n", median, r["mad_fps"].get<double>(),
                  100.0 * rel, rel < 0.2 ? "stable" : "UNSTABLE");
      std::printf("reference (context only, NOT comparable: C3D backbone on GPU): "
                  "569 fps on Titan X Maxwell, 1030 fps on Titan X Pascal\n");
      std::printf("%s\n", result.str().c_str());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error (%d): %s\n", int(f.status), tdet_last_error());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
