#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support/gradcheck.hpp"
#include "trajevent/common.hpp"
#include "trajevent/model.hpp"
#include "trajevent/sampler.hpp"
#include "trajevent/trainer.hpp"

using namespace trajevent;
using autodiff::Node;
using autodiff::Tape;

namespace {

WindowTensor random_window(long T, long K, uint64_t seed) {
  Rng rng(seed);
  WindowTensor w;
  w.T = T;
  w.N = 1 + K;
  w.values.resize(static_cast<size_t>(2) * T * w.N);
  w.mask.assign(static_cast<size_t>(T) * w.N, 1);
  for (auto& v : w.values) v = rng.uniform();
  return w;
}

ModelConfig small_config(ModelVariant variant) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.T = 9;
  cfg.K = 1;
  cfg.feature_dim = 8;
  cfg.kernel = 3;
  cfg.dilations = {1, 2, 4};  // receptive field 15 >= 9
  cfg.heads = 2;
  cfg.encoder_layers = 2;
  return cfg;
}

// A dataset in which passes are marked by a sharp ball-speed jump; the two
// classes (pass vs background) are separable from the trajectory alone.
Dataset speed_toy_dataset(uint64_t seed, long frames = 2400) {
  Rng rng(seed);
  MatchTrajectories m;
  m.match_id = "toy";
  m.frame_count = frames;
  ObjectTrack ball;
  ball.object_id = "ball";
  ball.kind = TrackKind::ball;
  ball.x.resize(frames);
  ball.y.resize(frames);
  ball.present.assign(frames, 1);
  ObjectTrack player = ball;
  player.object_id = "p0";
  player.kind = TrackKind::player;

  std::vector<EventLabel> labels;
  double x = 20.0, y = 30.0;
  double vx = 2.0 / 30.0;
  long next_kick = 60;
  for (long f = 0; f < frames; ++f) {
    if (f == next_kick && f < frames - 120) {
      vx = (rng.uniform() < 0.5 ? 1.0 : -1.0) * 14.0 / 30.0;  // kick
      labels.push_back({f, EventClass::pass});
      next_kick = f + 90 + rng.uniform_int(0, 60);
    } else if (std::abs(vx) > 3.0 / 30.0) {
      vx *= 0.97;  // drag back to dribble speed
    }
    x += vx;
    if (x < 5.0 || x > 100.0) vx = -vx;
    x = std::clamp(x, 5.0, 100.0);
    ball.x[f] = x;
    ball.y[f] = y;
    player.x[f] = x + 1.0;
    player.y[f] = y + rng.uniform(-0.2, 0.2);
  }
  m.tracks.push_back(std::move(ball));
  m.tracks.push_back(std::move(player));
  Dataset data;
  data.push_back({normalize(m), std::move(labels)});
  return data;
}

}  // namespace

TEST_CASE("zero-initialized head gives exactly uniform probabilities") {
  for (auto variant : {ModelVariant::tcn, ModelVariant::transformer,
                       ModelVariant::tcn_transformer}) {
    Model model(small_config(variant), 42);
    const auto probs = model.forward(random_window(9, 1, 7));
    for (int c = 0; c < kNumClasses; ++c) CHECK(probs[c] == 0.25);
  }
}

TEST_CASE("default-shaped config accepts a 2x51x6 window") {
  ModelConfig cfg;  // T = 51, K = 5, D = 64, blocks [1,2,4,8,16]
  cfg.feature_dim = 16;  // slimmer for test speed; shape contract unchanged
  Model model(cfg, 3);
  const auto probs = model.forward(random_window(51, 5, 8));
  double sum = 0.0;
  for (double p : probs) {
    CHECK(p >= 0.0);
    sum += p;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("probabilities sum to one for random weights and inputs") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Model model(small_config(ModelVariant::tcn_transformer), seed);
    // Perturb the head so outputs are not uniform.
    for (auto& p : model.params())
      if (p.name == "head.w")
        for (size_t i = 0; i < p.value.numel(); ++i)
          p.value[i] = 0.1 * static_cast<double>(i % 5) - 0.2;
    const auto probs = model.forward(random_window(9, 1, seed + 100));
    double sum = 0.0;
    for (double p : probs) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("window shape mismatch raises a contract error") {
  Model model(small_config(ModelVariant::tcn), 1);
  CHECK_THROWS_AS(model.forward(random_window(9, 3, 2)), ContractError);
  CHECK_THROWS_AS(model.forward(random_window(11, 1, 2)), ContractError);
}

TEST_CASE("attention rows sum to one per head and query frame") {
  ModelConfig cfg = small_config(ModelVariant::tcn_transformer);
  Model model(cfg, 9);
  AttentionCapture capture;
  model.forward(random_window(9, 1, 3), &capture);
  REQUIRE(capture.maps.size() == cfg.encoder_layers * cfg.heads);
  for (const Tensor& attn : capture.maps) {
    REQUIRE(attn.rank() == 2);
    CHECK(attn.dim(0) == 9);
    CHECK(attn.dim(1) == 9);
    for (size_t q = 0; q < attn.dim(0); ++q) {
      double sum = 0.0;
      for (size_t k = 0; k < attn.dim(1); ++k) sum += attn.at(q, k);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("tcn_transformer with zero encoder layers equals the plain tcn") {
  ModelConfig a = small_config(ModelVariant::tcn);
  ModelConfig b = small_config(ModelVariant::tcn_transformer);
  b.encoder_layers = 0;
  Model ma(a, 77);
  Model mb(b, 77);
  REQUIRE(ma.params().size() == mb.params().size());
  for (uint64_t s = 0; s < 5; ++s) {
    const WindowTensor w = random_window(9, 1, 500 + s);
    const auto pa = ma.forward(w);
    const auto pb = mb.forward(w);
    for (int c = 0; c < kNumClasses; ++c) CHECK(pa[c] == pb[c]);
  }
}

TEST_CASE("full tcn_transformer gradient check at T=9 K=1 D=8") {
  ModelConfig cfg = small_config(ModelVariant::tcn_transformer);
  Model model(cfg, 1234);
  // Non-degenerate head so the loss actually depends on the features.
  {
    Rng rng(55);
    for (auto& p : model.params())
      if (p.name.rfind("head.", 0) == 0)
        for (size_t i = 0; i < p.value.numel(); ++i)
          p.value[i] = rng.uniform(-0.4, 0.4);
  }
  const WindowTensor w = random_window(9, 1, 21);
  const size_t target = 2;

  // Central differences are only valid away from relu kinks; require every
  // preactivation to clear the step size by a wide margin at this point.
  {
    Tape probe;
    std::vector<Node*> bound;
    for (const auto& p : model.params()) bound.push_back(probe.input(p.value));
    model.build_graph(probe, bound, w);
    double margin = 1e18;
    for (const auto& n : probe.nodes())
      if (std::string(n->op_name()) == "relu")
        for (size_t i = 0; i < n->inputs()[0]->value.numel(); ++i)
          margin = std::min(margin, std::abs(n->inputs()[0]->value[i]));
    REQUIRE(margin > 1e-3);
  }

  auto loss_and_grads = [&](std::vector<std::vector<double>>* grads) {
    Tape tape;
    const std::vector<Node*> bound = tape.bind(model.params());
    Node* probs = model.build_graph(tape, bound, w);
    Node* loss = tape.cross_entropy(probs, target);
    if (grads != nullptr) {
      tape.backward(loss);
      grads->clear();
      for (Node* b : bound) {
        if (b->grad.numel() == 0)
          grads->emplace_back(b->value.numel(), 0.0);
        else
          grads->emplace_back(b->grad.data(),
                              b->grad.data() + b->grad.numel());
      }
    }
    return loss->value[0];
  };

  std::vector<std::vector<double>> analytic;
  loss_and_grads(&analytic);

  double worst = 0.0;
  std::string worst_at;
  size_t checked = 0;
  for (size_t pi = 0; pi < model.params().size(); ++pi) {
    Tensor& value = model.params()[pi].value;
    std::vector<double> flat(value.data(), value.data() + value.numel());
    auto loss_fn = [&]() {
      for (size_t i = 0; i < flat.size(); ++i) value[i] = flat[i];
      return loss_and_grads(nullptr);
    };
    const auto res = testsupport::finite_diff_check(flat, analytic[pi], loss_fn);
    checked += res.checked;
    if (res.max_rel_err > worst) {
      worst = res.max_rel_err;
      worst_at = model.params()[pi].name + " " + res.worst;
    }
  }
  CAPTURE(worst_at);
  CAPTURE(checked);
  CHECK(worst <= 1e-3);
}

TEST_CASE("sample_batch honors ratio, jitter and determinism") {
  const Dataset data = speed_toy_dataset(5);
  WindowSampler sampler(data, 51, 1);
  TrainConfig cfg;
  cfg.background_ratio = 0.5;
  cfg.jitter = 2;

  SUBCASE("roughly half the samples are background") {
    Rng rng(1);
    size_t background = 0, total = 0;
    for (int rep = 0; rep < 10; ++rep) {
      const auto batch = sampler.sample_batch(32, cfg, rng);
      for (const auto& s : batch) {
        background += s.target == kBackground ? 1 : 0;
        ++total;
      }
    }
    CHECK(background > total / 2 - 40);
    CHECK(background < total / 2 + 40);
  }
  SUBCASE("jitter zero centers exactly on the label frame") {
    TrainConfig exact = cfg;
    exact.jitter = 0;
    exact.background_ratio = 0.0;
    Rng rng(2);
    const auto batch = sampler.sample_batch(16, exact, rng);
    // Rebuild the window at each label frame; one must match bit-for-bit.
    for (const auto& s : batch) {
      bool found = false;
      for (const auto& l : data[0].labels) {
        WindowSpec spec{51, 1, l.frame};
        if (build_window(data[0].traj, spec).values == s.window.values) {
          found = true;
          break;
        }
      }
      CHECK(found);
    }
  }
  SUBCASE("same seed reproduces the batch") {
    Rng r1(9), r2(9);
    const auto b1 = sampler.sample_batch(8, cfg, r1);
    const auto b2 = sampler.sample_batch(8, cfg, r2);
    for (size_t i = 0; i < b1.size(); ++i) {
      CHECK(b1[i].target == b2[i].target);
      CHECK(b1[i].window.values == b2[i].window.values);
    }
  }
  SUBCASE("dataset without background frames errors") {
    Dataset dense = speed_toy_dataset(6, 300);
    auto& labels = dense[0].labels;
    labels.clear();
    for (long f = 0; f < 300; f += 20) labels.push_back({f, EventClass::pass});
    WindowSampler crowded(dense, 51, 1);
    CHECK(crowded.background_count() == 0);
    Rng rng(3);
    TrainConfig bg = cfg;
    bg.background_ratio = 1.0;
    CHECK_THROWS_AS(crowded.sample_batch(4, bg, rng), DataError);
  }
}

TEST_CASE("one gradient step decreases the sample loss for some small lr") {
  ModelConfig cfg = small_config(ModelVariant::tcn_transformer);
  Model base(cfg, 31);
  {
    Rng rng(66);
    for (auto& p : base.params())
      for (size_t i = 0; i < p.value.numel(); ++i)
        p.value[i] += rng.uniform(-0.05, 0.05);
  }
  const WindowTensor w = random_window(9, 1, 77);
  const size_t target = 1;

  auto loss_of = [&](const Model& m) {
    Tape tape;
    std::vector<Node*> bound;
    for (const auto& p : m.params()) bound.push_back(tape.input(p.value));
    Node* probs = m.build_graph(tape, bound, w);
    return tape.cross_entropy(probs, target)->value[0];
  };

  Tape tape;
  const std::vector<Node*> bound = tape.bind(base.params());
  Node* probs = base.build_graph(tape, bound, w);
  Node* loss = tape.cross_entropy(probs, target);
  tape.backward(loss);
  const double before = loss->value[0];

  bool decreased = false;
  for (double lr : {1e-2, 1e-3, 1e-4}) {
    Model stepped(cfg, 31);
    stepped.load_values(base.params());
    auto& params = stepped.params();
    for (size_t pi = 0; pi < params.size(); ++pi) {
      if (bound[pi]->grad.numel() == 0) continue;
      for (size_t i = 0; i < params[pi].value.numel(); ++i)
        params[pi].value[i] -= lr * bound[pi]->grad[i];
    }
    if (loss_of(stepped) < before) decreased = true;
  }
  CHECK(decreased);
}

TEST_CASE("training on a speed-separable toy task") {
  ModelConfig cfg = small_config(ModelVariant::tcn_transformer);
  cfg.T = 51;
  cfg.dilations = {1, 2, 4, 8, 16};
  const Dataset data = speed_toy_dataset(12);

  SUBCASE("loss decreases over the first five epochs") {
    Model model(cfg, 7);
    TrainConfig tc;
    tc.batch_size = 16;
    tc.max_epochs = 5;
    tc.steps_per_epoch = 12;
    tc.jitter = 2;
    tc.seed = 99;
    tc.val_windows = 0;
    const TrainResult result = train(model, data, {}, tc);
    REQUIRE(result.log.size() == 5);
    for (size_t e = 1; e < result.log.size(); ++e)
      CHECK(result.log[e].train_loss <=
            result.log[e - 1].train_loss + 0.05);  // monotone within tolerance
    CHECK(result.log.back().train_loss < result.log.front().train_loss);
  }
  SUBCASE("zero learning rate leaves parameters unchanged") {
    Model model(cfg, 7);
    const autodiff::ParameterSet before = model.params();
    TrainConfig tc;
    tc.batch_size = 8;
    tc.max_epochs = 1;
    tc.steps_per_epoch = 4;
    tc.learning_rate = 0.0;
    tc.seed = 5;
    tc.val_windows = 0;
    train(model, data, {}, tc);
    for (size_t i = 0; i < before.size(); ++i)
      for (size_t j = 0; j < before[i].value.numel(); ++j)
        CHECK(model.params()[i].value[j] == before[i].value[j]);
  }
  SUBCASE("same seed gives identical loss trajectories") {
    TrainConfig tc;
    tc.batch_size = 8;
    tc.max_epochs = 2;
    tc.steps_per_epoch = 6;
    tc.seed = 17;
    tc.val_windows = 0;
    Model m1(cfg, 7);
    Model m2(cfg, 7);
    const TrainResult r1 = train(m1, data, {}, tc);
    const TrainResult r2 = train(m2, data, {}, tc);
    REQUIRE(r1.log.size() == r2.log.size());
    for (size_t e = 0; e < r1.log.size(); ++e)
      CHECK(r1.log[e].train_loss == r2.log[e].train_loss);
  }
  SUBCASE("worker-parallel gradients match the sequential path bitwise") {
    TrainConfig tc;
    tc.batch_size = 8;
    tc.max_epochs = 1;
    tc.steps_per_epoch = 4;
    tc.seed = 23;
    tc.val_windows = 0;
    Model m1(cfg, 7);
    Model m2(cfg, 7);
    train(m1, data, {}, tc, 1);
    train(m2, data, {}, tc, 4);
    for (size_t i = 0; i < m1.params().size(); ++i)
      for (size_t j = 0; j < m1.params()[i].value.numel(); ++j)
        CHECK(m1.params()[i].value[j] == m2.params()[i].value[j]);
  }
}
