#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "durflow/corpus.hpp"
#include "durflow/duration.hpp"
#include "durflow/eval.hpp"
#include "durflow/ops.hpp"
#include "durflow/training.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace durflow;

namespace {

ModelConfig tiny_config(ModelKind kind, std::uint64_t seed = 0) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.encoder_dim = 6;
  cfg.channels = 5;
  cfg.noise_dim = 3;
  cfg.time_dim = 4;
  cfg.time_hidden = 6;
  cfg.seed = seed;
  return cfg;
}

ModelConfig small_config(ModelKind kind, std::uint64_t seed = 0) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.encoder_dim = 32;
  cfg.channels = 32;
  cfg.noise_dim = 8;
  cfg.time_dim = 16;
  cfg.time_hidden = 32;
  cfg.seed = seed;
  return cfg;
}

LogDurations log_durations(std::vector<double> v, std::vector<std::uint8_t> mask) {
  return LogDurations{Tensor::vector(std::move(v)), std::move(mask)};
}

PhoneSequence phones(std::vector<int> ids) { return interleave(PhoneSequence{std::move(ids), false}); }

// Corpus whose every phone class follows `law`'s modes and whose blanks are
// always `blank_frames` (0 when blank_frames == 0).
CorpusSpec single_law_spec(std::vector<LogNormalMode> modes, int blank_frames, int sentences, std::uint64_t seed) {
  CorpusSpec spec;
  spec.seed = seed;
  spec.num_sentences = sentences;
  spec.min_phones = 5;
  spec.max_phones = 12;
  spec.classes = {ClassLaw{kFirstPhone, 1.0, 1, modes}, ClassLaw{kFirstPhone + 1, 1.0, 1, modes}};
  if (blank_frames == 0) {
    spec.blank = BlankLaw{1.0, 1, 1};
  } else {
    spec.blank = BlankLaw{0.0, blank_frames, blank_frames};
  }
  return spec;
}

double model_gradient_error(DurationModel& model, const std::function<Tensor()>& loss_fn) {
  return oracle::parameter_gradient_error(model.predictor_parameters(), loss_fn);
}

}  // namespace

TEST(LogTarget, ZeroUsesFloor) {
  EXPECT_EQ(log_target(0), std::log(kZeroDurationFloor));
  EXPECT_EQ(log_target(1), 0.0);
  EXPECT_EQ(log_target(7), std::log(7.0));
  EXPECT_THROW(log_target(-1), std::invalid_argument);
  auto ref = reference_log_durations(std::vector<int>{0, 3});
  EXPECT_EQ(ref.values.at(1), std::log(3.0));
  EXPECT_EQ(ref.mask, (std::vector<std::uint8_t>{1, 1}));
}

TEST(DetLoss, Examples) {
  auto ref = log_durations({1, 2, 3, 4}, {1, 1, 1, 1});
  EXPECT_EQ(det_loss(log_durations({1, 2, 3, 4}, {1, 1, 1, 1}), ref).item(), 0.0);
  EXPECT_EQ(det_loss(log_durations({3, 2, 3, 4}, {1, 1, 1, 1}), ref).item(), 1.0);
  EXPECT_THROW(det_loss(log_durations({1, 2}, {0, 0}), log_durations({1, 2}, {0, 0})), std::invalid_argument);
}

TEST(DetLoss, MaskedTargetIgnored) {
  auto pred = log_durations({0.5, 1.0, 1.5}, {1, 0, 1});
  auto a = det_loss(pred, log_durations({0.0, 1.0, 1.0}, {1, 0, 1})).item();
  auto b = det_loss(pred, log_durations({0.0, 99.0, 1.0}, {1, 0, 1})).item();
  EXPECT_EQ(a, b);
}

TEST(DetLoss, BimodalMinimiserIsMidpointOfLogs) {
  const double lo = std::log(2.0), hi = std::log(12.0);
  const double c = 0.5 * (lo + hi);
  auto ref = log_durations({lo, hi, lo, hi}, {1, 1, 1, 1});
  Tensor pred = Tensor::parameter({4}, std::vector<double>(4, c));
  Tape tape;
  Tensor loss;
  {
    Tape::Recording rec(tape);
    loss = det_loss(LogDurations{pred, {1, 1, 1, 1}}, ref);
  }
  tape.backward(loss);
  double g = 0.0;
  for (double v : pred.grad()) g += v;
  EXPECT_NEAR(g, 0.0, 1e-12);
  for (double d : {-0.1, 0.1}) {
    EXPECT_GT(det_loss(log_durations(std::vector<double>(4, c + d), {1, 1, 1, 1}), ref).item(), loss.item());
  }
}

TEST(DetForward, DeterministicOnePerPosition) {
  DurationModel model(small_config(ModelKind::det, 3));
  auto cond = model.encode(phones({3, 4, 5}));
  auto a = det_forward(model, cond);
  auto b = det_forward(model, cond);
  ASSERT_EQ(a.length(), 6u);
  EXPECT_TRUE(std::equal(a.values.data().begin(), a.values.data().end(), b.values.data().begin()));
}

TEST(DetForward, PackingDoesNotLeakBetweenSequences) {
  DurationModel model(small_config(ModelKind::det, 8));
  auto c1 = model.encode(phones({3, 4, 5}));
  auto c2 = model.encode(phones({9, 10}));
  const ConditioningSequence* both[] = {&c1, &c2};
  PackedBatch batch = pack(both, model.gap());
  Tape::NoGrad ng;
  Tensor packed = model.det_head(batch);
  auto alone1 = det_forward(model, c1);
  auto alone2 = det_forward(model, c2);
  auto p1 = batch.unpack(packed, 0), p2 = batch.unpack(packed, 1);
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_NEAR(p1[i], alone1.values.at(i), 1e-12);
  for (std::size_t i = 0; i < p2.size(); ++i) EXPECT_NEAR(p2[i], alone2.values.at(i), 1e-12);
}

TEST(DetForward, ConstantCorpusLearnsLogFive) {
  auto spec = single_law_spec({LogNormalMode{1.0, std::log(5.0), 1e-6}}, 5, 64, 2);
  auto corpus = generate(spec);
  DurationModel model(small_config(ModelKind::det, 2));
  TrainOptions opts;
  opts.steps = 400;
  opts.lr = 1e-2;
  auto result = train(model, corpus, opts);
  EXPECT_LT(result.losses.back(), result.losses.front());
  auto val = generate(spec, Split::validation);
  for (std::size_t i = 0; i < 10; ++i) {
    auto pred = det_forward(model, model.encode(val.sentences[i].phones));
    for (double v : pred.values.data()) EXPECT_NEAR(v, std::log(5.0), 0.05);
  }
}

TEST(Train, RepeatedRunsInOneProcessAreBitIdentical) {
  auto corpus = generate(CorpusSpec::spontaneous_default(3));
  for (auto kind : {ModelKind::det, ModelKind::fm}) {
    TrainOptions opts;
    opts.steps = 40;
    opts.seed = 3;
    std::vector<std::vector<double>> losses;
    std::vector<std::vector<double>> weights;
    for (int run = 0; run < 2; ++run) {
      // Shift the heap so the second run sees different buffer addresses.
      std::vector<std::vector<double>> clutter(run * 7 + 1, std::vector<double>(13 * (run + 1)));
      DurationModel model(small_config(kind, 3));
      losses.push_back(train(model, corpus, opts).losses);
      std::vector<double> w;
      for (const auto& p : model.predictor_parameters()) w.insert(w.end(), p.value.data().begin(), p.value.data().end());
      weights.push_back(std::move(w));
    }
    EXPECT_EQ(losses[0], losses[1]) << to_string(kind);
    EXPECT_EQ(weights[0], weights[1]) << to_string(kind);
  }
}

TEST(DetLoss, GradientMatchesFiniteDifferences) {
  DurationModel model(tiny_config(ModelKind::det, 4));
  auto c1 = model.encode(phones({3, 5, 4}));
  auto c2 = model.encode(phones({6, 7}));
  const ConditioningSequence* both[] = {&c1, &c2};
  PackedBatch batch = pack(both, model.gap());
  std::mt19937_64 rng(4);
  std::vector<std::vector<double>> targets = {oracle::uniform(6, rng, -1, 2), oracle::uniform(4, rng, -1, 2)};
  LogDurations ref{batch.pack_values(targets), batch.loss_mask};
  EXPECT_LT(model_gradient_error(model, [&] { return det_loss(LogDurations{model.det_head(batch), batch.loss_mask}, ref); }),
            1e-4);
}

TEST(CfmPair, Endpoints) {
  std::mt19937_64 rng(5);
  Tensor x1 = Tensor::vector(oracle::uniform(6, rng)), x0 = Tensor::vector(oracle::uniform(6, rng));
  const double sigma = 1e-4;
  auto start = cfm_pair(x1, x0, 0.0, sigma);
  auto end = cfm_pair(x1, x0, 1.0, sigma);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(start.x_t.at(i), x0.at(i));
    EXPECT_NEAR(end.x_t.at(i), sigma * x0.at(i) + x1.at(i), 1e-15);
    EXPECT_NEAR(end.u_t.at(i), x1.at(i) - (1 - sigma) * x0.at(i), 1e-15);
  }
}

TEST(CfmPair, StraightLineExample) {
  auto p = cfm_pair(Tensor::vector({3.0}), Tensor::vector({1.0}), 0.5, 0.0);
  EXPECT_EQ(p.x_t.at(0), 2.0);
  EXPECT_EQ(p.u_t.at(0), 2.0);
}

TEST(FmLoss, ExactFieldGivesZero) {
  DurationModel model(tiny_config(ModelKind::fm));
  auto c = model.encode(phones({3, 4, 5}));
  const ConditioningSequence* one[] = {&c};
  PackedBatch batch = pack(one, model.gap());
  std::mt19937_64 rng(6);
  Tensor x1 = batch.pack_values(std::vector<std::vector<double>>{oracle::uniform(6, rng)});
  Rng draw_rng(6);
  FlowDraws draws = draw_flow_noise(batch, draw_rng);
  const double sigma = 1e-4;
  VectorField exact = [&](const PackedBatch&, const Tensor&, std::span<const double>) {
    return cfm_pair(x1, draws.x0, 0.0, sigma).u_t;
  };
  EXPECT_NEAR(fm_loss(exact, batch, x1, draws, sigma).item(), 0.0, 1e-24);
}

TEST(FmLoss, UntrainedHeadNearTargetEnergy) {
  DurationModel model(small_config(ModelKind::fm, 7));
  std::vector<ConditioningSequence> conds;
  std::vector<std::vector<double>> targets;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> standard(0.0, 1.0);
  for (int s = 0; s < 16; ++s) {
    conds.push_back(model.encode(phones({3 + s % 5, 4, 5 + s % 3, 6})));
    std::vector<double> t(8);
    for (auto& v : t) v = model.from_state(standard(rng));  // standardized in flow state
    targets.push_back(t);
  }
  std::vector<const ConditioningSequence*> ptrs;
  for (auto& c : conds) ptrs.push_back(&c);
  PackedBatch batch = pack(ptrs, model.gap());
  LogDurations ref{batch.pack_values(targets), batch.loss_mask};
  Rng loss_rng(7);
  double loss = 0.0;
  for (int r = 0; r < 20; ++r) loss += fm_loss(model, batch, ref, loss_rng).item() / 20.0;
  // Monte-Carlo estimate of E|x1 - x0|^2 for standard normal x1 and x0.
  double energy = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = standard(rng) - (1 - 1e-4) * standard(rng);
    energy += u * u / n;
  }
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_GT(loss, 0.0);
  EXPECT_GT(loss, 0.5 * energy);
  EXPECT_LT(loss, 2.0 * energy);
}

TEST(FmLoss, GradientMatchesFiniteDifferences) {
  DurationModel model(tiny_config(ModelKind::fm, 9));
  auto c1 = model.encode(phones({3, 5, 4}));
  auto c2 = model.encode(phones({6, 7}));
  const ConditioningSequence* both[] = {&c1, &c2};
  PackedBatch batch = pack(both, model.gap());
  std::mt19937_64 rng(9);
  std::vector<std::vector<double>> targets = {oracle::uniform(6, rng, -1, 2), oracle::uniform(4, rng, -1, 2)};
  LogDurations ref{batch.pack_values(targets), batch.loss_mask};
  EXPECT_LT(model_gradient_error(model,
                                 [&] {
                                   Rng r(9);  // identical draws on every evaluation
                                   return fm_loss(model, batch, ref, r);
                                 }),
            1e-4);
}

TEST(Euler, TimeGridIncreasesToOne) {
  DurationModel model(tiny_config(ModelKind::fm));
  auto c = model.encode(phones({3, 4}));
  const ConditioningSequence* one[] = {&c};
  PackedBatch batch = pack(one, model.gap());
  for (int nfe : {1, 3, 10}) {
    std::vector<double> times;
    VectorField zero = [&](const PackedBatch& b, const Tensor&, std::span<const double> t) {
      times.push_back(t[0]);
      return Tensor({b.columns()}, 0.0);
    };
    SampleOptions opts;
    opts.nfe = nfe;
    euler_sample(zero, batch, opts);
    ASSERT_EQ(times.size(), static_cast<std::size_t>(nfe));
    for (std::size_t i = 1; i < times.size(); ++i) EXPECT_GT(times[i], times[i - 1]);
    EXPECT_NEAR(times.back() + 1.0 / nfe, 1.0, 1e-15);
  }
  SampleOptions bad;
  bad.nfe = 0;
  EXPECT_THROW(fm_sample(model, c, bad), std::invalid_argument);
}

TEST(Euler, StraightPathIsIntegratedExactly) {
  // For a single target point the conditional field is constant along each
  // straight path, so every Euler step count lands on it.
  DurationModel model(tiny_config(ModelKind::fm));
  auto c = model.encode(phones({3, 4, 5}));
  const ConditioningSequence* one[] = {&c};
  PackedBatch batch = pack(one, model.gap());
  std::mt19937_64 rng(10);
  auto target = oracle::uniform(batch.columns(), rng);
  VectorField field = [&](const PackedBatch& b, const Tensor& x, std::span<const double> t) {
    std::vector<double> v(b.columns());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (target[i] - x.at(i)) / (1.0 - t[0]);
    return Tensor::vector(std::move(v));
  };
  for (int nfe : {1, 2, 7}) {
    SampleOptions opts;
    opts.nfe = nfe;
    opts.temperature = 1.0;
    opts.seed = static_cast<std::uint64_t>(nfe);
    auto x = euler_sample(field, batch, opts);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], target[i], 1e-12);
  }
}

TEST(FmSample, TemperatureZeroIgnoresSeed) {
  DurationModel model(small_config(ModelKind::fm, 11));
  auto c = model.encode(phones({3, 4, 5, 6}));
  SampleOptions a;
  a.temperature = 0.0;
  a.seed = 1;
  SampleOptions b = a;
  b.seed = 999;
  auto x = fm_sample(model, c, a), y = fm_sample(model, c, b);
  EXPECT_TRUE(std::equal(x.values.data().begin(), x.values.data().end(), y.values.data().begin()));
}

TEST(FmSample, FixedSeedBitIdentical) {
  DurationModel model(small_config(ModelKind::fm, 12));
  auto c = model.encode(phones({3, 4, 5, 6}));
  SampleOptions opts;
  opts.seed = 42;
  auto x = fm_sample(model, c, opts), y = fm_sample(model, c, opts);
  EXPECT_TRUE(std::equal(x.values.data().begin(), x.values.data().end(), y.values.data().begin()));
  opts.seed = 43;
  auto z = fm_sample(model, c, opts);
  EXPECT_FALSE(std::equal(x.values.data().begin(), x.values.data().end(), z.values.data().begin()));
}

TEST(FmSample, BimodalClassRecoversBothModes) {
  auto spec = single_law_spec({LogNormalMode{0.5, std::log(2.0), 0.1}, LogNormalMode{0.5, std::log(12.0), 0.1}}, 0,
                              200, 13);
  auto corpus = generate(spec);
  ModelConfig cfg = small_config(ModelKind::fm, 13);
  cfg.channels = 64;
  DurationModel model(cfg);
  TrainOptions opts;
  opts.steps = 1500;
  opts.lr = 3e-3;
  opts.seed = 13;
  train(model, corpus, opts);
  auto val = generate(spec, Split::validation);
  SampleOptions so;
  so.temperature = 1.0;
  so.seed = 13;
  auto stats = dist_stats(collect_durations(model, val, so, 5), spec);
  const auto& cls = stats.at(kFirstPhone);
  ASSERT_GE(cls.count, 1000u);
  ASSERT_EQ(cls.mode_freqs.size(), 2u);
  EXPECT_NEAR(cls.mode_freqs[0], 0.5, 0.1);
  EXPECT_NEAR(cls.mode_freqs[1], 0.5, 0.1);
}

TEST(ToFrames, Examples) {
  auto lf = log_durations({std::log(5.0), std::log(2.5), -30.0}, {1, 1, 1});
  EXPECT_EQ(to_frames(lf), (std::vector<int>{5, 3, 0}));
  EXPECT_EQ(to_frames(lf, 1), (std::vector<int>{5, 3, 1}));
}

TEST(ToFrames, NonFiniteNamesPosition) {
  auto lf = log_durations({0.0, std::numeric_limits<double>::quiet_NaN()}, {1, 1});
  try {
    to_frames(lf);
    FAIL() << "expected an error";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("position 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(to_frames(log_durations({std::numeric_limits<double>::infinity()}, {1})), std::domain_error);
}

TEST(QuantisationResidual, Examples) {
  EXPECT_NEAR(quantisation_residual(log_durations({std::log(3.0), std::log(7.0), 0.0}, {1, 1, 1})), 0.0, 1e-12);
  EXPECT_NEAR(quantisation_residual(log_durations({std::log(2.5)}, {1})), 0.5, 1e-12);
  EXPECT_NEAR(quantisation_residual(log_durations({std::log(2.5), std::log(2.25)}, {1, 0})), 0.5, 1e-12);
}

TEST(QuantisationResidual, DetIgnoresNfe) {
  DurationModel model(small_config(ModelKind::det, 14));
  auto c = model.encode(phones({3, 8, 5, 9}));
  SampleOptions a, b;
  a.nfe = 1;
  b.nfe = 32;
  b.seed = 77;
  EXPECT_EQ(quantisation_residual(predict_log_durations(model, c, a)),
            quantisation_residual(predict_log_durations(model, c, b)));
}

TEST(LengthRegulate, Examples) {
  ConditioningSequence cond{Tensor({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}), {1, 1, 1}};
  Tensor same = length_regulate(cond, std::vector<int>{1, 1, 1});
  EXPECT_TRUE(std::equal(same.data().begin(), same.data().end(), cond.vectors.data().begin()));
  Tensor out = length_regulate(cond, std::vector<int>{2, 0, 1});
  EXPECT_EQ(out.shape(), (Shape{2, 3}));
  EXPECT_EQ(std::vector<double>(out.data().begin(), out.data().end()), (std::vector<double>{1, 1, 3, 4, 4, 6}));
  EXPECT_THROW(length_regulate(cond, std::vector<int>{1, -1, 1}), std::invalid_argument);
  EXPECT_THROW(length_regulate(cond, std::vector<int>{1, 1}), std::invalid_argument);
}

TEST(LengthRegulate, ConservesFramesAndOrder) {
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<int> len(1, 12), dur(0, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = static_cast<std::size_t>(len(rng));
    std::vector<double> cols(n);
    for (std::size_t i = 0; i < n; ++i) cols[i] = static_cast<double>(i);
    ConditioningSequence cond{Tensor({1, n}, cols), std::vector<std::uint8_t>(n, 1)};
    std::vector<int> frames(n);
    int total = 0;
    for (auto& f : frames) total += (f = dur(rng));
    Tensor out = length_regulate(cond, frames);
    ASSERT_EQ(out.dim(1), static_cast<std::size_t>(total));
    for (std::size_t j = 1; j < out.dim(1); ++j) EXPECT_LE(out.at(0, j - 1), out.at(0, j));
  }
}
