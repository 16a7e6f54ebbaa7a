// SPDX-License-Identifier: Apache-2.0
#include "tdet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "tdet/binary_io.hpp"
#include "tdet/rng.hpp"

namespace tdet {

using nlohmann::json;

std::vector<LabeledSegment> VideoRecord::segments_in_frames() const {
  std::vector<LabeledSegment> out;
  out.reserve(annotations.size());
  for (const auto& a : annotations) out.push_back({{a.start_s * fps, a.end_s * fps}, a.class_id});
  return out;
}

namespace {

[[noreturn]] void fail(ErrorCode code, const std::filesystem::path& path, std::size_t line,
                       const std::string& msg) {
  throw Error(code, path.string() + ":" + std::to_string(line) + ": " + msg);
}

template <typename V>
V field(const json& obj, const char* key, const std::filesystem::path& path, std::size_t line) {
  if (!obj.is_object() || !obj.contains(key)) fail(ErrorCode::kParse, path, line, std::string("missing field '") + key + "'");
  try {
    return obj.at(key).get<V>();
  } catch (const json::exception&) {
    fail(ErrorCode::kParse, path, line, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

std::vector<VideoRecord> load_annotations(const std::filesystem::path& path,
                                          std::optional<int> num_classes) {
  std::ifstream is(path);
  TDET_CHECK(is.good(), ErrorCode::kIo, "cannot open annotations: " + path.string());
  std::vector<VideoRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(is, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); }))
      continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kParse, path, line, std::string("invalid JSON: ") + e.what());
    }
    VideoRecord r;
    r.id = field<std::string>(j, "id", path, line);
    r.fps = field<double>(j, "fps", path, line);
    r.num_frames = field<long>(j, "num_frames", path, line);
    r.features = field<std::string>(j, "features", path, line);
    const json anns = j.contains("annotations") ? j["annotations"] : json::array();
    if (!anns.is_array()) fail(ErrorCode::kParse, path, line, "field 'annotations' must be an array");
    for (const auto& a : anns) {
      Annotation an;
      an.class_id = field<int>(a, "class", path, line);
      an.start_s = field<double>(a, "start", path, line);
      an.end_s = field<double>(a, "end", path, line);
      r.annotations.push_back(an);
    }

    if (!(r.fps > 0.0)) fail(ErrorCode::kValidation, path, line, "fps must be positive");
    if (r.num_frames <= 0) fail(ErrorCode::kValidation, path, line, "num_frames must be positive");
    const double duration = double(r.num_frames) / r.fps;
    for (const auto& a : r.annotations) {
      if (!(a.start_s >= 0.0 && a.start_s < a.end_s && a.end_s <= duration * (1.0 + 1e-12)))
        fail(ErrorCode::kValidation, path, line,
             "annotation [" + std::to_string(a.start_s) + ", " + std::to_string(a.end_s) +
                 "] must satisfy 0 <= start < end <= " + std::to_string(duration));
      if (a.class_id < 1 || (num_classes && a.class_id > *num_classes))
        fail(ErrorCode::kValidation, path, line,
             "class id " + std::to_string(a.class_id) + " out of range");
    }
    if (std::any_of(out.begin(), out.end(), [&](const VideoRecord& o) { return o.id == r.id; }))
      fail(ErrorCode::kValidation, path, line, "duplicate video id '" + r.id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

void write_annotations(const std::filesystem::path& path, const std::vector<VideoRecord>& videos) {
  std::ofstream os(path, std::ios::trunc);
  TDET_CHECK(os.good(), ErrorCode::kIo, "cannot write annotations: " + path.string());
  for (const auto& v : videos) {
    json anns = json::array();
    for (const auto& a : v.annotations)
      anns.push_back({{"class", a.class_id}, {"start", a.start_s}, {"end", a.end_s}});
    json j = {{"id", v.id},
              {"fps", v.fps},
              {"num_frames", v.num_frames},
              {"features", v.features},
              {"annotations", anns}};
    os << j.dump() << '\n';
  }
}

void write_feature_video(const std::filesystem::path& path, const Tensor<float>& features) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  TDET_CHECK(os.good(), ErrorCode::kIo, "cannot write feature video: " + path.string());
  os.write(kFeatureMagic, 4);
  io::put_le<std::uint32_t>(os, kFeatureVersion);
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(features.rank()));
  for (auto d : features.shape()) io::put_le<std::uint64_t>(os, d);
  for (float v : features.values()) io::put_f32(os, v);
  TDET_CHECK(os.good(), ErrorCode::kIo, "failed writing feature video: " + path.string());
}

Tensor<float> read_feature_video(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  TDET_CHECK(is.good(), ErrorCode::kIo, "cannot open feature video: " + path.string());
  char magic[4] = {};
  is.read(magic, 4);
  TDET_CHECK(is.gcount() == 4 && std::memcmp(magic, kFeatureMagic, 4) == 0, ErrorCode::kParse,
             "not a feature video (bad magic): " + path.string());
  const auto version = io::get_le<std::uint32_t>(is, "feature version");
  TDET_CHECK(version == kFeatureVersion, ErrorCode::kParse,
             "unsupported feature video version " + std::to_string(version));
  const auto rank = io::get_le<std::uint32_t>(is, "feature rank");
  TDET_CHECK(rank >= 1 && rank <= 8, ErrorCode::kParse, "bad feature rank");
  Shape shape(rank);
  for (auto& d : shape) d = io::get_le<std::uint64_t>(is, "feature dims");
  std::vector<float> values(shape_size(shape));
  for (auto& v : values) v = io::get_f32(is, "feature values");
  return Tensor<float>(std::move(shape), std::move(values));
}

std::vector<Video> load_dataset(const std::filesystem::path& annotations,
                                std::optional<int> num_classes) {
  const auto records = load_annotations(annotations, num_classes);
  const auto dir = annotations.parent_path();
  std::vector<Video> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    Video v{r, read_feature_video(dir / r.features)};
    TDET_CHECK(v.features.rank() == 4 && long(v.features.dim(1)) == r.num_frames,
               ErrorCode::kValidation,
               "feature video for " + r.id + " has shape " + shape_string(v.features.shape()) +
                   ", expected C x " + std::to_string(r.num_frames) + " x H x W");
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

void SynthConfig::validate() const {
  TDET_CHECK(num_classes >= 1 && num_videos >= 1 && channels >= 1 && height >= 1 && width >= 1,
             ErrorCode::kInvalidArgument, "synth: counts must be >= 1");
  TDET_CHECK(min_frames >= 1 && min_frames <= max_frames, ErrorCode::kInvalidArgument,
             "synth: video length range is inconsistent");
  TDET_CHECK(min_activities >= 0 && min_activities <= max_activities, ErrorCode::kInvalidArgument,
             "synth: activity count range is inconsistent");
  TDET_CHECK(fps > 0.0, ErrorCode::kInvalidArgument, "synth: fps must be positive");
  TDET_CHECK(min_duration_s > 0.0 && min_duration_s <= max_duration_s, ErrorCode::kInvalidArgument,
             "synth: duration range is inconsistent");
  TDET_CHECK(std::ceil(max_duration_s * fps) <= double(min_frames), ErrorCode::kInvalidArgument,
             "synth: longest activity does not fit in the shortest video");
  TDET_CHECK(snr > 0.0, ErrorCode::kInvalidArgument, "synth: snr must be positive");
  TDET_CHECK(min_gap_s >= 0.0, ErrorCode::kInvalidArgument, "synth: min_gap_s must be >= 0");
}

double pattern_weight(int class_id, int channel, int num_channels) {
  // A strong primary channel per class plus a class-seeded sign pattern on
  // the remaining channels.
  if (channel == (class_id - 1) % num_channels) return 1.0;
  Rng rng(0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(class_id) + 17);
  double s = 0.0;
  for (int c = 0; c <= channel; ++c) s = (rng.next() >> 63) ? 0.35 : -0.35;
  return s;
}

double pattern_envelope(int class_id, double t, double duration, double fps) {
  const double freq = 0.4 + 0.3 * class_id;  // Hz
  const double ramp = (class_id % 2 ? 0.4 : -0.4);
  const double phase = std::min(1.0, t / std::max(duration, 1.0)) - 0.5;
  return (1.0 + 0.3 * std::cos(2.0 * std::numbers::pi * freq * t / fps)) * (1.0 + ramp * phase);
}

double pattern_value(int class_id, int channel, int num_channels, double t, double duration,
                     double fps) {
  return pattern_weight(class_id, channel, num_channels) *
         pattern_envelope(class_id, t, duration, fps);
}

namespace {

struct Planted {
  int class_id;
  long start;
  long end;  // exclusive
};

Video synthesize_one(const SynthConfig& cfg, int index, Rng& rng) {
  Video v;
  const long L = rng.integer(cfg.min_frames, cfg.max_frames);
  const int n_act = static_cast<int>(rng.integer(cfg.min_activities, cfg.max_activities));
  const long dmin = std::max(1L, std::lround(cfg.min_duration_s * cfg.fps));
  const long dmax = std::max(dmin, std::lround(cfg.max_duration_s * cfg.fps));
  const long gap = std::lround(cfg.min_gap_s * cfg.fps);

  std::vector<Planted> acts;
  for (int a = 0; a < n_act; ++a) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      Planted p;
      p.class_id = static_cast<int>(rng.integer(1, cfg.num_classes));
      const long d = rng.integer(dmin, dmax);
      p.start = rng.integer(0, L - d);
      p.end = p.start + d;
      const bool clash = !cfg.allow_overlap &&
                         std::any_of(acts.begin(), acts.end(), [&](const Planted& q) {
                           return p.start < q.end + gap && q.start < p.end + gap;
                         });
      if (!clash) {
        acts.push_back(p);
        break;
      }
    }
  }
  std::sort(acts.begin(), acts.end(),
            [](const Planted& a, const Planted& b) { return a.start < b.start; });

  const std::size_t C = cfg.channels, H = cfg.height, W = cfg.width, plane = H * W;
  v.features = Tensor<float>({C, std::size_t(L), H, W});
  for (auto& x : v.features.values()) x = static_cast<float>(rng.normal());
  for (const auto& p : acts) {
    const double dur = double(p.end - p.start);
    for (std::size_t c = 0; c < C; ++c) {
      const double weight = cfg.snr * pattern_weight(p.class_id, int(c), int(C));
      for (long t = p.start; t < p.end; ++t) {
        const double val =
            weight * pattern_envelope(p.class_id, double(t - p.start), dur, cfg.fps);
        float* cell = v.features.data() + (c * L + t) * plane;
        for (std::size_t k = 0; k < plane; ++k) cell[k] += static_cast<float>(val);
      }
    }
  }

  char id[64];
  std::snprintf(id, sizeof(id), "%s_%05d", cfg.id_prefix.c_str(), index);
  v.record.id = id;
  v.record.fps = cfg.fps;
  v.record.num_frames = L;
  v.record.features = "features/" + v.record.id + ".tdfv";
  for (const auto& p : acts)
    v.record.annotations.push_back({p.class_id, double(p.start) / cfg.fps, double(p.end) / cfg.fps});
  return v;
}

}  // namespace

std::vector<Video> synthesize_videos(const SynthConfig& config) {
  config.validate();
  Rng master(config.seed);
  std::vector<Video> out;
  out.reserve(config.num_videos);
  for (int i = 0; i < config.num_videos; ++i) {
    Rng rng(master.next());
    out.push_back(synthesize_one(config, i, rng));
  }
  return out;
}

std::vector<VideoRecord> generate_synthetic(const SynthConfig& config,
                                            const std::filesystem::path& out_dir) {
  const auto videos = synthesize_videos(config);
  std::filesystem::create_directories(out_dir / "features");
  std::vector<VideoRecord> records;
  for (const auto& v : videos) {
    write_feature_video(out_dir / v.record.features, v.features);
    records.push_back(v.record);
  }
  write_annotations(out_dir / "annotations.jsonl", records);
  return records;
}

}  // namespace tdet
