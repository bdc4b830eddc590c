// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cnt/config.hpp"
#include "cnt/numeric.hpp"
#include "cnt/trainer.hpp"
#include "support/gradient_check.hpp"

using namespace cnt;

namespace {

const std::pair<Dataset, Dataset>& digits() {
  static const auto split = split_train_eval(load_bundled_digits());
  return split;
}

TrainConfig small_config() {
  TrainConfig c;
  c.layer_sizes = {64, 32, 32, 10};
  c.learning_rate = 0.05;
  c.init_scale = 0.05;
  c.seed = 7;
  c.max_epochs = 3;
  return c;
}

std::vector<double> all_weights(const NetworkSnapshot& s) {
  std::vector<double> w;
  for (const auto& l : s.layers) {
    const auto& v = std::get<Dense>(l).weights.values();
    w.insert(w.end(), v.begin(), v.end());
  }
  return w;
}

}  // namespace

TEST(Rng, UniformStaysInsideOpenInterval) {
  Rng r(3);
  for (int i = 0; i < 100000; ++i) {
    const double x = r.uniform_symmetric(0.05);
    ASSERT_GT(x, -0.05);
    ASSERT_LT(x, 0.05);
  }
}

TEST(Rng, PinnedStream) {
  // mt19937_64 is fixed by the standard: the 10000th output for the default seed.
  std::mt19937_64 ref;
  ref.discard(9999);
  EXPECT_EQ(ref(), 9981545732273789042ULL);
  Rng a(5489);
  for (int i = 0; i < 9999; ++i) a.next_u64();
  EXPECT_EQ(a.next_u64(), 9981545732273789042ULL);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng r(1);
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  r.shuffle(std::span<int>(v));
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST(Init, SameSeedIsBitIdentical) {
  auto c = small_config();
  EXPECT_EQ(init_network(c), init_network(c));
  c.seed = 8;
  EXPECT_NE(all_weights(init_network(c)), all_weights(init_network(small_config())));
}

TEST(Init, UniformSupport) {
  auto c = small_config();
  c.init_family = InitFamily::uniform;
  const auto s = init_network(c);
  for (double w : all_weights(s)) {
    EXPECT_GT(w, -0.05);
    EXPECT_LT(w, 0.05);
  }
  for (const auto& l : s.layers) {
    for (double b : std::get<Dense>(l).bias) EXPECT_EQ(b, 0.0);
  }
}

TEST(Init, NormalStandardDeviation) {
  TrainConfig c;
  c.layer_sizes = {100, 100};
  c.init_scale = 0.5;
  c.seed = 11;
  const auto w = all_weights(init_network(c));
  ASSERT_EQ(w.size(), 10000u);
  // The std of a sample std over 10^4 draws is about 0.5 / sqrt(2 * 10^4) = 0.0035.
  EXPECT_NEAR(std::sqrt(population_variance(w)), 0.5, 0.02);
  EXPECT_NEAR(mean(w), 0.0, 0.02);
}

TEST(Init, AccuracyTaggedByEvaluation) {
  const auto& [train, eval] = digits();
  const auto s = init_network(small_config(), eval);
  EXPECT_EQ(s.meta.accuracy, accuracy(s, eval));
  EXPECT_EQ(s.meta.epoch, 0u);
}

TEST(Forward, ZeroNetworkIsUniform) {
  TrainConfig c;
  c.layer_sizes = {4, 3, 5};
  auto s = init_network(c);
  for (auto& l : s.layers) std::fill(std::get<Dense>(l).weights.values().begin(),
                                     std::get<Dense>(l).weights.values().end(), 0.0);
  const auto r = forward(s, std::vector<double>{0.1, 0.2, 0.3, 0.4});
  for (double p : r.probabilities) EXPECT_DOUBLE_EQ(p, 0.2);
}

TEST(Forward, IdentityNetworkPicksHotIndex) {
  NetworkSnapshot s;
  Matrix eye(4, 4);
  for (std::size_t i = 0; i < 4; ++i) eye(i, i) = 1.0;
  s.layers.emplace_back(Dense{eye, std::vector<double>(4, 0.0)});
  for (std::size_t hot = 0; hot < 4; ++hot) {
    std::vector<double> x(4, 0.0);
    x[hot] = 1.0;
    EXPECT_EQ(forward(s, x).prediction, hot);
  }
}

TEST(Forward, DimensionMismatch) {
  const auto s = init_network(small_config());
  EXPECT_THROW(forward(s, std::vector<double>(63, 0.0)), std::invalid_argument);
}

TEST(Softmax, SumsToOneAndStaysFinite) {
  for (double big : {1.0, 100.0, 1e4}) {
    const std::vector<double> logits{big, -big, 0.5 * big, 0.0};
    const auto p = softmax(logits);
    double sum = 0.0;
    for (double x : p) {
      EXPECT_TRUE(std::isfinite(x));
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  const auto p = softmax(std::vector<double>{1e4, 1e4});
  EXPECT_EQ(p[0], 0.5);
}

TEST(Gradients, MatchCentralFiniteDifferences) {
  const auto& [train, eval] = digits();
  const std::vector<std::size_t> batch{0, 1, 2, 3, 4, 5, 6, 7};
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    const auto s = cnt::testing::gradient_check_net(seed, 64, 10);
    const auto r = cnt::testing::check_gradients(s, train, batch);
    // No probe moved any hidden unit across its ReLU kink.
    EXPECT_EQ(r.kink_crossings, 0u) << "seed " << seed;
    EXPECT_LT(r.max_relative_error, 1e-6) << "seed " << seed;
  }
}

TEST(Train, DeterministicGivenConfig) {
  const auto& [train_set, eval] = digits();
  auto c = small_config();
  c.max_epochs = 2;
  EXPECT_EQ(train(c, train_set, eval), train(c, train_set, eval));
}

TEST(Train, EveryEpochScheduleEmitsOnePerEpoch) {
  const auto& [train_set, eval] = digits();
  auto c = small_config();
  const auto r = train_detailed(c, train_set, eval);
  ASSERT_EQ(r.snapshots.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.snapshots[i].meta.epoch, i + 1);
  EXPECT_EQ(r.snapshots.back(), r.final_state);
}

TEST(Train, LossDecreasesOverFirstEpochs) {
  const auto& [train_set, eval] = digits();
  for (double lr : {0.02, 0.05, 0.1}) {
    auto c = small_config();
    c.learning_rate = lr;
    const auto before = mean_loss(init_network(c), train_set);
    const auto r = train_detailed(c, train_set, eval);
    EXPECT_LT(mean_loss(r.snapshots.front(), train_set), before) << "lr " << lr;
    EXPECT_LT(r.epoch_losses.back(), r.epoch_losses.front()) << "lr " << lr;
  }
}

TEST(Train, EarlyStopCrossesTarget) {
  const auto& [train_set, eval] = digits();
  auto c = small_config();
  c.max_epochs = 30;
  c.eval_every_batches = 1;
  c.early_stop_at_accuracy = 0.3;
  const auto r = train_detailed(c, train_set, eval);
  EXPECT_TRUE(r.reached_target);
  EXPECT_GE(r.snapshots.back().meta.accuracy, 0.3);
  EXPECT_LT(r.snapshots.back().meta.accuracy, 0.4);
}

TEST(Train, AccuracyCrossingsFireOncePerThreshold) {
  const auto& [train_set, eval] = digits();
  auto c = small_config();
  c.max_epochs = 30;
  c.eval_every_batches = 1;
  c.snapshot_schedule = {ScheduleKind::on_accuracy_crossings, {0.2, 0.5, 0.8}};
  c.early_stop_at_accuracy = 0.8;
  const auto snaps = train(c, train_set, eval);
  ASSERT_EQ(snaps.size(), 3u);
  EXPECT_GE(snaps[0].meta.accuracy, 0.2);
  EXPECT_GE(snaps[1].meta.accuracy, 0.5);
  EXPECT_GE(snaps[2].meta.accuracy, 0.8);
}

TEST(Train, DeskScaleReachesHighAccuracy) {
  // Measured on the reference run: 324 of 359 eval samples correct.
  const auto& [train_set, eval] = digits();
  auto c = small_config();
  c.seed = 1;
  c.max_epochs = 30;
  const auto r = train_detailed(c, train_set, eval);
  EXPECT_GT(r.final_state.meta.accuracy, 0.8);
  EXPECT_EQ(r.final_state.meta.accuracy, 324.0 / 359.0);
}

TEST(Train, DivergenceCarriesEpoch) {
  const auto& [train_set, eval] = digits();
  auto c = small_config();
  c.layer_sizes = {64, 10};  // no ReLU to die off, so the blow-up reaches the loss
  c.learning_rate = 1e308;
  try {
    train(c, train_set, eval);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 1u);
  }
}

TEST(Train, RejectsIncompatibleData) {
  const auto& [train_set, eval] = digits();
  auto c = small_config();
  c.layer_sizes = {60, 10};
  EXPECT_THROW(train(c, train_set, eval), ValidationError);
  c.layer_sizes = {64, 5};
  EXPECT_THROW(train(c, train_set, eval), ValidationError);
}

TEST(Population, RoundRobinTargetsAndDistinctSeeds) {
  const auto& [train_set, eval] = digits();
  auto c = small_config();
  c.max_epochs = 30;
  c.eval_every_batches = 1;
  const std::vector<double> targets{0.3, 0.9};
  const auto pop = generate_population(c, 4, targets, train_set, eval);
  ASSERT_EQ(pop.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(pop[i].seed, c.seed + i);
    EXPECT_EQ(pop[i].target, targets[i % 2]);
    if (pop[i].reached_target) {
      EXPECT_GE(pop[i].snapshots.back().meta.accuracy, pop[i].target);
    }
  }
  EXPECT_NE(all_weights(init_network([&] { auto x = c; x.seed = c.seed + 1; return x; }())),
            all_weights(init_network(c)));
}

TEST(Population, MissedTargetIsFlaggedWithBestState) {
  const auto& [train_set, eval] = digits();
  auto c = small_config();
  c.max_epochs = 1;
  const std::vector<double> targets{0.999};
  const auto pop = generate_population(c, 1, targets, train_set, eval);
  EXPECT_FALSE(pop[0].reached_target);
  double best = 0.0;
  for (const auto& s : pop[0].snapshots) best = std::max(best, s.meta.accuracy);
  EXPECT_EQ(pop[0].snapshots.back().meta.accuracy, best);
}

TEST(Config, ParsesFullManifest) {
  const auto rc = parse_run_config(R"({
    "layer_sizes": [64, 32, 10], "init_family": "uniform", "init_scale": 0.5,
    "learning_rate": 0.1, "batch_size": 16, "max_epochs": 5, "seed": 18446744073709551615,
    "early_stop_at_accuracy": 0.85, "eval_every_batches": 2, "task_tag": "digits",
    "snapshot_schedule": {"kind": "on_accuracy_crossings", "thresholds": [0.3, 0.6]},
    "population": {"count": 4, "accuracy_targets": [0.3, 0.9]},
    "dataset": {"kind": "csv", "path": "d.csv"}})",
                                    "/base");
  EXPECT_EQ(rc.train.layer_sizes, (std::vector<std::size_t>{64, 32, 10}));
  EXPECT_EQ(rc.train.init_family, InitFamily::uniform);
  EXPECT_EQ(rc.train.seed, 18446744073709551615ULL);
  EXPECT_EQ(rc.train.snapshot_schedule.thresholds.size(), 2u);
  EXPECT_EQ(rc.population->count, 4u);
  EXPECT_EQ(rc.dataset.path, std::filesystem::path("/base/d.csv"));
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_run_config(R"({"layer_sizes": [64]})"), ValidationError);
  EXPECT_THROW(parse_run_config(R"({"layer_sizes": [64, 10], "learning_rat": 0.1})"), ValidationError);
  EXPECT_THROW(parse_run_config(R"({"layer_sizes": [64, 10], "learning_rate": -1})"), ValidationError);
  EXPECT_THROW(parse_run_config(R"({"layer_sizes": [64, 10],)"), FormatError);
  EXPECT_THROW(parse_run_config(R"({"layer_sizes": [64, 10], "snapshot_schedule": {"kind": "on_accuracy_crossings"}})"),
               ValidationError);
}
