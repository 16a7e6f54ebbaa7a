// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "tdet/inference.hpp"

using namespace tdet;

namespace {
std::vector<ScoredSegment> random_candidates(Rng& rng, std::size_t n) {
  std::vector<ScoredSegment> c;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = rng.uniform(0, 100);
    // Coarse scores force ties.
    c.push_back({{s, s + rng.uniform(1, 30)}, double(rng.integer(0, 20)) / 20.0});
  }
  return c;
}
}  // namespace

TEST_CASE("nms: basic cases") {
  const std::vector<ScoredSegment> one{{{0, 10}, 0.3}};
  CHECK(nms(one, 0.7) == std::vector<std::size_t>{0});
  const std::vector<ScoredSegment> dup{{{0, 10}, 0.8}, {{0, 10}, 0.9}};
  CHECK(nms(dup, 0.7) == std::vector<std::size_t>{1});
  const std::vector<ScoredSegment> tie{{{0, 10}, 0.5}, {{0, 10}, 0.5}};
  CHECK(nms(tie, 0.7) == std::vector<std::size_t>{0});
  CHECK(nms(std::vector<ScoredSegment>{}, 0.7).empty());
  // Threshold is strict: IoU exactly 0.5 survives at 0.5.
  const std::vector<ScoredSegment> half{{{0, 10}, 0.9}, {{0, 5}, 0.8}};
  CHECK(nms(half, 0.5).size() == 2);
  CHECK(nms(half, 0.49).size() == 1);
}

TEST_CASE("nms agrees with the greedy oracle, is idempotent and an antichain") {
  Rng rng(31);
  for (int f = 0; f < 100; ++f) {
    const auto c = random_candidates(rng, std::size_t(rng.integer(1, 50)));
    const double thr = rng.uniform(0.1, 0.9);
    const auto kept = nms(c, thr);
    CHECK(kept == oracle::nms(c, thr));
    std::vector<ScoredSegment> sub;
    for (auto k : kept) sub.push_back(c[k]);
    const auto again = nms(sub, thr);
    CHECK(again.size() == sub.size());
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = i + 1; j < kept.size(); ++j)
        CHECK(segment_iou(c[kept[i]].segment, c[kept[j]].segment) <= thr);
  }
}

TEST_CASE("buffer plans") {
  auto p = build_buffers(768, 768, BufferMode::kOneWay);
  CHECK(p.windows.size() == 1);
  CHECK(p.padding == 0);
  p = build_buffers(800, 768, BufferMode::kOneWay);
  REQUIRE(p.windows.size() == 2);
  CHECK(p.windows[1].offset == 768);
  CHECK(p.windows[1].padding == 736);
  CHECK(p.padding == 736);
  p = build_buffers(768, 768, BufferMode::kTwoWay);
  REQUIRE(p.windows.size() == 2);
  CHECK(p.windows[1].direction == Direction::kReverse);
  p = build_buffers(800, 768, BufferMode::kTwoWay);
  REQUIRE(p.windows.size() == 4);
  CHECK(p.windows[2].offset == 32);
  CHECK(p.windows[2].padding == 0);
  CHECK(p.windows[3].offset == 0);
  p = build_buffers(100, 768, BufferMode::kOneWay);
  CHECK(p.windows[0].padding == 668);
  CHECK_THROWS_AS(build_buffers(0, 768, BufferMode::kOneWay), Error);
  CHECK_THROWS_AS(build_buffers(100, 770, BufferMode::kOneWay), Error);
}

TEST_CASE("extract_buffer replicates the last frame into padding") {
  Tensor<float> video({1, 5, 1, 1}, {1, 2, 3, 4, 5});
  const auto b = extract_buffer(video, {0, Direction::kForward, 3}, 8);
  CHECK(b.shape() == Shape{1, 8, 1, 1});
  CHECK(b[4] == 5.0f);
  CHECK(b[7] == 5.0f);
  CHECK(b[0] == 1.0f);
  CHECK_THROWS_AS(extract_buffer(video, {5, Direction::kForward, 0}, 8), Error);
}

TEST_CASE("detect config validation and derived final NMS") {
  DetectConfig c;
  CHECK(c.final_nms() == doctest::Approx(0.4));
  c.eval_iou = 0.3;
  CHECK(c.final_nms() == doctest::Approx(0.2));
  c.eval_iou = 0.05;
  CHECK_THROWS_AS(c.validate(), Error);
  DetectConfig d;
  d.proposal_nms = 1.5;
  CHECK_THROWS_AS(d.validate(), Error);
}

TEST_CASE("zero model: uniform posteriors, nothing above a high floor") {
  ModelConfig cfg;
  Network<float> net(cfg, 0);
  for (std::size_t i = 0; i < net.params().size(); ++i) net.params()[i].value.fill(0.0f);
  Tensor<float> buffer({8, 768, 2, 2});
  DetectConfig dc;
  dc.score_floor = 0.2;  // > 1/6
  const auto r = detect(buffer, net, dc);
  CHECK(r.detections.empty());
  CHECK(r.stats.anchors == 960);
  dc.score_floor = 0.1;
  const auto r2 = detect(buffer, net, dc);
  CHECK_FALSE(r2.detections.empty());
  for (const auto& d : r2.detections) CHECK(d.score == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("detect: stage counts are monotone and detections are valid") {
  ModelConfig cfg;
  Network<float> net(cfg, 9);
  Rng rng(3);
  Tensor<float> buffer({8, 768, 2, 2});
  for (auto& v : buffer.values()) v = float(rng.normal());
  DetectConfig dc;
  dc.score_floor = 0.0;
  const auto r = detect(buffer, net, dc);
  CHECK(r.stats.anchors == 960);
  CHECK(r.stats.proposals <= r.stats.anchors);
  CHECK(r.stats.after_nms <= std::min<std::size_t>(r.stats.proposals, 300));
  for (const auto& d : r.detections) {
    CHECK(d.class_id >= 1);
    CHECK(d.class_id <= 5);
    CHECK(d.segment.start >= 0.0);
    CHECK(d.segment.end <= 768.0);
    CHECK(d.segment.length() > 0.0);
  }
  for (std::size_t i = 0; i < r.proposals.size(); ++i)
    for (std::size_t j = i + 1; j < r.proposals.size(); ++j)
      CHECK(segment_iou(r.proposals[i].segment, r.proposals[j].segment) <= 0.7);
}

TEST_CASE("detect_video: global coordinates inside the video") {
  ModelConfig cfg;
  Network<float> net(cfg, 9);
  Rng rng(4);
  Tensor<float> video({8, 1000, 2, 2});
  for (auto& v : video.values()) v = float(rng.normal());
  DetectConfig dc;
  dc.score_floor = 0.0;
  std::vector<ScoredSegment> props;
  const auto dets = detect_video(video, 1000, net, dc, 768, &props);
  CHECK_FALSE(dets.empty());
  bool second_window = false;
  for (const auto& d : dets) {
    CHECK(d.segment.start >= 0.0);
    CHECK(d.segment.end <= 1000.0);
    second_window |= d.segment.start >= 768.0;
  }
  CHECK(second_window);
  for (const auto& p : props) CHECK(p.segment.end <= 1000.0);
}

TEST_CASE("detection file round trip and error reporting") {
  const auto dir = std::filesystem::temp_directory_path() / "tdet_test_dets";
  std::filesystem::create_directories(dir);
  const std::vector<DetectionRecord> recs{{"v1", 3, 0.25, 1.5, 0.875}, {"v 2", 1, 10.0, 12.0, 1.0 / 3.0}};
  write_detections(dir / "d.tsv", recs);
  const auto back = read_detections(dir / "d.tsv");
  REQUIRE(back.size() == 2);
  CHECK(back[1].video_id == "v 2");
  CHECK(back[1].score == 1.0 / 3.0);
  CHECK(back[0].class_id == 3);
  {
    std::ofstream bad(dir / "bad.tsv");
    bad << "v1\t1\t0.0\t1.0\t0.5\nv2\tx\t0\t1\t0.5\n";
  }
  try {
    read_detections(dir / "bad.tsv");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParse);
    CHECK(std::string(e.what()).find("bad.tsv:2:") != std::string::npos);
  }
  CHECK_THROWS_AS(read_detections(dir / "missing.tsv"), Error);
}
