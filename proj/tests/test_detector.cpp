#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/oracles.hpp"
#include "trajevent/common.hpp"
#include "trajevent/model.hpp"
#include "trajevent/nms.hpp"
#include "trajevent/timeline.hpp"

using namespace trajevent;

namespace {

ProbabilityTimeline random_timeline(long frames, uint64_t seed,
                                    long start = 0) {
  Rng rng(seed);
  ProbabilityTimeline tl;
  tl.match_id = "t";
  tl.start = start;
  tl.end = start + frames;
  tl.rows.resize(frames);
  for (auto& row : tl.rows) {
    double sum = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      row[c] = rng.uniform(0.0, 1.0);
      sum += row[c];
    }
    for (int c = 0; c < kNumClasses; ++c) row[c] /= sum;
  }
  return tl;
}

DetectionConfig config_with(double tau, long w_nms) {
  DetectionConfig cfg;
  for (auto& p : cfg.per_class) {
    p.tau = tau;
    p.w_nms = w_nms;
  }
  return cfg;
}

MatchTrajectories constant_match(long frames) {
  MatchTrajectories m;
  m.match_id = "const";
  m.frame_count = frames;
  ObjectTrack ball;
  ball.object_id = "ball";
  ball.kind = TrackKind::ball;
  ball.x.assign(frames, 40.0);
  ball.y.assign(frames, 30.0);
  ball.present.assign(frames, 1);
  ObjectTrack p = ball;
  p.object_id = "p0";
  p.kind = TrackKind::player;
  for (long f = 0; f < frames; ++f) p.x[f] = 45.0;
  m.tracks.push_back(std::move(ball));
  m.tracks.push_back(std::move(p));
  return m;
}

ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.variant = ModelVariant::tcn;
  cfg.T = 9;
  cfg.K = 1;
  cfg.feature_dim = 8;
  cfg.dilations = {1, 2, 4};
  return cfg;
}

}  // namespace

TEST_CASE("two close peaks collapse to the stronger one") {
  ProbabilityTimeline tl;
  tl.start = 0;
  tl.end = 20;
  tl.rows.assign(20, {1.0, 0.0, 0.0, 0.0});
  tl.rows[10] = {0.08, 0.92, 0.0, 0.0};
  tl.rows[14] = {0.15, 0.85, 0.0, 0.0};
  DetectionConfig cfg = config_with(0.8, 9);
  cfg.for_class(EventClass::pass).w_nms = 9;  // |14-10| = 4 < 9 suppresses
  const auto dets = detect(tl, cfg);
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].frame == 10);
  CHECK(dets[0].cls == EventClass::pass);
  CHECK(dets[0].confidence == 0.92);
}

TEST_CASE("all probabilities below threshold give no detections") {
  const ProbabilityTimeline tl = random_timeline(100, 3);
  const auto dets = detect(tl, config_with(0.99, 5));
  CHECK(dets.empty());
}

TEST_CASE("greedy NMS matches an independent rescan oracle on random timelines") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const long frames = 20 + rng.uniform_int(0, 180);
    const long start = rng.uniform_int(0, 100);
    const ProbabilityTimeline tl = random_timeline(frames, 1000 + trial, start);
    const double tau = rng.uniform(0.25, 0.6);
    const long w_nms = 3 + 2 * rng.uniform_int(0, 10);
    const DetectionConfig cfg = config_with(tau, w_nms);
    const auto dets = detect(tl, cfg);

    std::vector<std::vector<double>> rows;
    for (const auto& r : tl.rows)
      rows.emplace_back(r.begin(), r.end());

    for (int ci = 1; ci < kNumClasses; ++ci) {
      const auto expect =
          testsupport::reference_nms(rows, tl.start, ci, tau, w_nms);
      std::vector<Detection> got;
      for (const auto& d : dets)
        if (static_cast<int>(d.cls) == ci) got.push_back(d);
      REQUIRE(got.size() == expect.size());
      for (size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].frame == expect[i].frame);
        CHECK(got[i].confidence == expect[i].p);
      }
    }
  }
}

TEST_CASE("NMS output invariants hold on random timelines") {
  Rng rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const ProbabilityTimeline tl = random_timeline(150, 2000 + trial);
    const double tau = rng.uniform(0.25, 0.5);
    const long w_nms = 3 + 2 * rng.uniform_int(0, 8);
    const auto dets = detect(tl, config_with(tau, w_nms));
    for (size_t i = 0; i < dets.size(); ++i) {
      const auto& d = dets[i];
      const int ci = static_cast<int>(d.cls);
      CHECK(d.confidence >= tau);
      CHECK(d.confidence == tl.rows[d.frame - tl.start][ci]);
      // A detection dominates every candidate in its neighborhood unless a
      // different accepted detection already claimed that candidate.
      for (long t = 0; t < tl.frames(); ++t) {
        const long frame = tl.start + t;
        const double p = tl.rows[t][ci];
        if (p < tau || std::labs(frame - d.frame) >= w_nms) continue;
        bool claimed_elsewhere = false;
        for (const auto& other : dets)
          if (other.cls == d.cls && other.frame != d.frame &&
              std::labs(frame - other.frame) < w_nms)
            claimed_elsewhere = true;
        if (!claimed_elsewhere) CHECK(p <= d.confidence);
      }
      for (size_t j = i + 1; j < dets.size(); ++j)
        if (dets[j].cls == d.cls)
          CHECK(std::labs(dets[j].frame - d.frame) >= w_nms);
    }
    // Sorted by frame.
    for (size_t i = 1; i < dets.size(); ++i)
      CHECK(dets[i - 1].frame <= dets[i].frame);
  }
}

TEST_CASE("raising the threshold never increases the detection count") {
  for (uint64_t seed = 50; seed < 60; ++seed) {
    const ProbabilityTimeline tl = random_timeline(200, seed);
    size_t prev = detect(tl, config_with(0.3, 7)).size();
    for (double tau : {0.4, 0.5, 0.6, 0.7, 0.8}) {
      const size_t n = detect(tl, config_with(tau, 7)).size();
      CHECK(n <= prev);
      prev = n;
    }
  }
}

TEST_CASE("detect is a pure function") {
  const ProbabilityTimeline tl = random_timeline(120, 7);
  const DetectionConfig cfg = config_with(0.35, 11);
  const auto a = detect(tl, cfg);
  const auto b = detect(tl, cfg);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].frame == b[i].frame);
    CHECK(a[i].confidence == b[i].confidence);
  }
}

TEST_CASE("detection config validation") {
  CHECK_THROWS_AS(detect(random_timeline(10, 1), config_with(0.0, 5)),
                  ConfigError);
  CHECK_THROWS_AS(detect(random_timeline(10, 1), config_with(0.5, 4)),
                  ConfigError);
  CHECK_THROWS_AS(detect(random_timeline(10, 1), config_with(0.5, 1)),
                  ConfigError);
}

TEST_CASE("infer_timeline produces one row per frame") {
  const Model model(tiny_model_config(), 3);
  const MatchTrajectories match = normalize(constant_match(500));
  const WindowSpec spec{9, 1, 0};
  const ProbabilityTimeline tl = infer_timeline(model, match, 0, 500, spec);
  CHECK(tl.rows.size() == 500);
  CHECK(tl.start == 0);
  CHECK(tl.end == 500);
  for (const auto& row : tl.rows) {
    double sum = 0.0;
    for (double p : row) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("constant input gives identical interior rows") {
  const Model model(tiny_model_config(), 9);
  const MatchTrajectories match = normalize(constant_match(60));
  const WindowSpec spec{9, 1, 0};
  const ProbabilityTimeline tl = infer_timeline(model, match, 0, 60, spec);
  // Away from the zero-padded edges every window is the same.
  for (long t = 5; t < 55; ++t)
    for (int c = 0; c < kNumClasses; ++c)
      CHECK(tl.rows[t][c] == tl.rows[5][c]);
}

TEST_CASE("15000-frame segment is supported") {
  const Model model(tiny_model_config(), 4);
  const MatchTrajectories match = normalize(constant_match(15000));
  const WindowSpec spec{9, 1, 0};
  const ProbabilityTimeline tl = infer_timeline(model, match, 0, 15000, spec);
  CHECK(tl.rows.size() == 15000);
}

TEST_CASE("windows without a ball become certain-background rows") {
  const Model model(tiny_model_config(), 5);
  MatchTrajectories match = constant_match(100);
  for (long f = 40; f < 60; ++f) {
    match.tracks[0].present[f] = 0;
    match.tracks[0].x[f] = 0.0;
    match.tracks[0].y[f] = 0.0;
  }
  const MatchTrajectories norm = normalize(match);
  const WindowSpec spec{9, 1, 0};
  size_t no_ball = 0;
  const ProbabilityTimeline tl =
      infer_timeline(model, norm, 0, 100, spec, 1, &no_ball);
  // Ball absent for all of [40, 60): windows centered in [44, 56) see none.
  CHECK(no_ball == 12);
  for (long t = 44; t < 56; ++t) {
    CHECK(tl.rows[t][0] == 1.0);
    CHECK(tl.rows[t][1] == 0.0);
  }
}

TEST_CASE("timeline csv round-trips") {
  const ProbabilityTimeline tl = random_timeline(50, 77, 30);
  const auto dir = std::filesystem::temp_directory_path() / "trajevent_tl";
  std::filesystem::create_directories(dir);
  const auto file = dir / "tl.csv";
  save_timeline_csv(tl, file);
  const ProbabilityTimeline back = load_timeline_csv(file);
  CHECK(back.start == tl.start);
  CHECK(back.end == tl.end);
  REQUIRE(back.rows.size() == tl.rows.size());
  for (size_t t = 0; t < tl.rows.size(); ++t)
    for (int c = 0; c < kNumClasses; ++c)
      CHECK(back.rows[t][c] == tl.rows[t][c]);
}
