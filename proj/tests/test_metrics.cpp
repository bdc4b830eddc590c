// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cnt/metrics.hpp"
#include "cnt/oracle.hpp"
#include "support/random_nets.hpp"

using namespace cnt;
using cnt::testing::Gen;

namespace {

// Double-loop reference for one dense block.
std::pair<double, double> naive_dense_stats(const Matrix& w) {
  double sum = 0.0;
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) sum += w(i, j);
  const double mu = sum / static_cast<double>(w.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) sq += (w(i, j) - mu) * (w(i, j) - mu);
  return {mu, sq / static_cast<double>(w.size())};
}

}  // namespace

TEST(LinkStats, DenseHandExample) {
  const LayerWeights d = Dense{Matrix(2, 2, {1, -2, 3, 4}), {0, 0}};
  const auto [mu_ref, delta_ref] = naive_dense_stats(std::get<Dense>(d).weights);
  EXPECT_DOUBLE_EQ(mu_ref, 1.5);
  EXPECT_DOUBLE_EQ(delta_ref, 5.25);
  const auto st = link_weight_stats(d);
  EXPECT_DOUBLE_EQ(st.mu, 1.5);
  EXPECT_DOUBLE_EQ(st.delta, 5.25);
}

TEST(LinkStats, ZeroDense) {
  const LayerWeights d = Dense{Matrix(10, 10), std::vector<double>(10)};
  const auto st = link_weight_stats(d);
  EXPECT_EQ(st.mu, 0.0);
  EXPECT_EQ(st.delta, 0.0);
}

TEST(LinkStats, ConstantConvKernel) {
  const LayerWeights c = cnt::testing::ones_conv({5, 5, 1}, 3, 1, 1, Padding::valid);
  const auto st = link_weight_stats(c);
  EXPECT_DOUBLE_EQ(st.mu, 1.0);
  EXPECT_DOUBLE_EQ(st.delta, 0.0);
}

TEST(LinkStats, ConvRealizedVersusUniqueWeights) {
  // 3x1 input, 2x1 kernel, same padding (extra cell at the bottom): offset 0
  // is realized by 3 output rows, offset 1 by 2.
  Gen g(21);
  const LayerWeights c = g.conv({3, 1, 1}, 2, 1, 1, {1, 1}, Padding::same);
  const auto oracle = oracle::oracle_metrics(oracle::unroll_layer(c));
  const auto realized = link_weight_stats(c, 0, ConvLinkMode::realized_edges);
  EXPECT_NEAR(realized.mu, oracle.mu, 1e-15);
  EXPECT_NEAR(realized.delta, oracle.delta, 1e-15);
  const auto& k = std::get<Conv2D>(c).kernel.values();
  const auto unique = link_weight_stats(c, 0, ConvLinkMode::unique_weights);
  EXPECT_DOUBLE_EQ(unique.mu, (k[0] + k[1]) / 2);
  EXPECT_NE(unique.mu, realized.mu);
}

TEST(NodeStrengthDense, HandSummation) {
  // prev column k = (1,2,3), next row k = (-1,-2)
  const Dense prev{Matrix(3, 2, {1, 9, 2, 9, 3, 9}), {0, 0}};
  const Dense next{Matrix(2, 2, {-1, -2, 5, 5}), {0, 0}};
  const auto s = node_strength_dense(&prev, &next, 0);
  EXPECT_DOUBLE_EQ(s.s_in, 6.0);
  EXPECT_DOUBLE_EQ(s.s_out, -3.0);
  EXPECT_DOUBLE_EQ(s.s, 3.0);
}

TEST(NodeStrengthDense, ZeroLayersAndBoundaries) {
  const Dense zero{Matrix(3, 3), {0, 0, 0}};
  const auto s = node_strength_dense(&zero, &zero, 2);
  EXPECT_EQ(s.s_in, 0.0);
  EXPECT_EQ(s.s_out, 0.0);
  EXPECT_EQ(s.s, 0.0);

  const Dense first{Matrix(2, 2, {1, 2, 3, 4}), {0, 0}};
  const auto input = node_strength_dense(nullptr, &first, 1);
  EXPECT_EQ(input.s_in, 0.0);
  EXPECT_EQ(input.s, input.s_out);
  EXPECT_DOUBLE_EQ(input.s_out, 7.0);

  const auto output = node_strength_dense(&first, nullptr, 1);
  EXPECT_EQ(output.s_out, 0.0);
  EXPECT_DOUBLE_EQ(output.s_in, 6.0);
}

TEST(NodeStrengthDense, IndexOutOfRange) {
  const Dense d{Matrix(2, 3), {0, 0, 0}};
  EXPECT_THROW(node_strength_dense(&d, nullptr, 3), std::out_of_range);
}

TEST(StrengthsForSnapshot, OnePerNeuronLayer) {
  Gen g(4);
  const auto s = g.dense_net({5, 4, 3});
  const auto sv = strengths_for_snapshot(s);
  ASSERT_EQ(sv.size(), 3u);
  for (std::size_t k = 0; k < sv.size(); ++k) {
    EXPECT_EQ(sv[k].layer_index, k);
    EXPECT_EQ(sv[k].s.size(), s.layer_size(k));
    for (std::size_t i = 0; i < sv[k].s.size(); ++i) EXPECT_EQ(sv[k].s[i], sv[k].s_in[i] + sv[k].s_out[i]);
  }
  for (double x : sv.front().s_in) EXPECT_EQ(x, 0.0);
  for (double x : sv.back().s_out) EXPECT_EQ(x, 0.0);
}

TEST(StrengthsForSnapshot, MatchesExplicitEdgeListOracle) {
  Gen g(99);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = g.dense_net({g.index(1, 16), g.index(1, 16), g.index(1, 16), g.index(1, 16)});
    const auto fast = strengths_for_snapshot(s);
    const auto ref = oracle::oracle_analyze(s);
    for (std::size_t k = 0; k < fast.size(); ++k) {
      for (std::size_t i = 0; i < fast[k].s.size(); ++i) {
        EXPECT_NEAR(fast[k].s_in[i], ref.s_in[k][i], 1e-12);
        EXPECT_NEAR(fast[k].s_out[i], ref.s_out[k][i], 1e-12);
        EXPECT_NEAR(fast[k].s[i], ref.s[k][i], 1e-12);
      }
    }
  }
}

TEST(StrengthsForSnapshot, ConvToDenseBoundaryUsesFlattening) {
  Gen g(8);
  NetworkSnapshot s;
  s.layers.emplace_back(g.conv({4, 4, 2}, 3, 3, 2, {1, 1}, Padding::same));
  s.layers.emplace_back(g.dense(32, 3));
  const auto fast = strengths_for_snapshot(s);
  const auto ref = oracle::oracle_analyze(s);
  ASSERT_EQ(fast[1].s.size(), 32u);
  for (std::size_t i = 0; i < 32; ++i) {
    EXPECT_NEAR(fast[1].s_in[i], ref.s_in[1][i], 1e-12);
    EXPECT_NEAR(fast[1].s_out[i], ref.s_out[1][i], 1e-12);
  }
  // Neuron (channel 1, row 2, col 3) feeds dense row 1*16 + 2*4 + 3.
  const auto& d = std::get<Dense>(s.layers[1]);
  const std::size_t flat = flat_index({4, 4, 2}, 1, 2, 3);
  EXPECT_EQ(flat, 27u);
  EXPECT_NEAR(fast[1].s_out[flat], d.weights(27, 0) + d.weights(27, 1) + d.weights(27, 2), 1e-15);
}

TEST(Fluctuation, HandCases) {
  EXPECT_EQ(layer_fluctuation(std::vector<double>{1, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(layer_fluctuation(std::vector<double>{0, 2}), 1.0);
  EXPECT_DOUBLE_EQ(layer_fluctuation(std::vector<double>{-3, 3}), 3.0);
  EXPECT_THROW(layer_fluctuation(std::vector<double>{}), std::invalid_argument);
}

TEST(Fluctuation, ZeroExactlyForConstantLayers) {
  Gen g(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(g.index(1, 40), g.real(-100, 100));
    EXPECT_EQ(layer_fluctuation(v), 0.0);
    v[g.index(0, v.size() - 1)] += 1e-3;
    if (v.size() > 1) {
      EXPECT_GT(layer_fluctuation(v), 0.0);
    }
  }
}

TEST(Disparity, ReferenceCases) {
  EXPECT_EQ(node_disparity(std::vector<double>{5, 0, 0, 0}), 1.0);
  EXPECT_EQ(node_disparity(std::vector<double>{1, 1, 1, 1}), 0.25);
  EXPECT_FALSE(node_disparity(std::vector<double>{1, -1}).has_value());
  EXPECT_THROW(node_disparity(std::vector<double>{}), std::invalid_argument);
}

TEST(Disparity, BoundsForNonNegativeWeights) {
  Gen g(17);
  for (int t = 0; t < 200; ++t) {
    const auto w = g.reals(g.index(1, 30), 0.0, 1.0);
    const auto y = node_disparity(w);
    ASSERT_TRUE(y.has_value());
    const double n = static_cast<double>(w.size());
    EXPECT_GE(*y, 1.0 / n - 1e-12);
    EXPECT_LE(*y, 1.0 + 1e-12);
  }
  for (std::size_t n = 1; n <= 20; ++n) {
    EXPECT_NEAR(*node_disparity(std::vector<double>(n, 0.3)), 1.0 / static_cast<double>(n), 1e-15);
  }
}

TEST(Disparity, EpsilonIsConfigurable) {
  const std::vector<double> w{1e-6, 1e-6};
  EXPECT_TRUE(node_disparity(w).has_value());
  EXPECT_FALSE(node_disparity(w, 1e-3).has_value());
}

TEST(Analyze, ZeroNetwork) {
  NetworkSnapshot s;
  s.layers.emplace_back(Dense{Matrix(4, 3), {0, 0, 0}});
  s.layers.emplace_back(Dense{Matrix(3, 2), {0, 0}});
  const auto r = analyze_snapshot(s);
  for (const auto& l : r.link_stats) {
    EXPECT_EQ(l.mu, 0.0);
    EXPECT_EQ(l.delta, 0.0);
  }
  for (const auto& sv : r.strengths)
    for (double x : sv.s) EXPECT_EQ(x, 0.0);
  for (const auto& f : r.fluctuations) EXPECT_EQ(f.value, 0.0);
  EXPECT_FALSE(r.disparities.has_value());
}

TEST(Analyze, ConsistencyAndOracleEquivalence) {
  Gen g(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = g.dense_net({6, 9, 4, 3});
    const auto r = analyze_snapshot(s, {.disparity = true});
    const auto ref = oracle::oracle_analyze(s);
    ASSERT_EQ(r.link_stats.size(), 3u);
    ASSERT_EQ(r.fluctuations.size(), 4u);
    for (std::size_t b = 0; b < 3; ++b) {
      EXPECT_NEAR(r.link_stats[b].mu, ref.mu[b], 1e-12);
      EXPECT_NEAR(r.link_stats[b].delta, ref.delta[b], 1e-12);
    }
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_EQ(r.fluctuations[k].value, layer_fluctuation(r.strengths[k]));
      EXPECT_NEAR(r.fluctuations[k].value, ref.fluctuation[k], 1e-12);
    }
    ASSERT_TRUE(r.disparities.has_value());
    EXPECT_EQ(r.disparities->size(), 4u);
    for (const auto& v : r.disparities->front().values) EXPECT_FALSE(v.has_value());
  }
}

TEST(Analyze, DeterministicAndBiasFree) {
  Gen g(5);
  auto s = g.dense_net({5, 5, 2});
  const auto a = analyze_snapshot(s);
  for (auto& l : s.layers) std::get<Dense>(l).bias.assign(std::get<Dense>(l).bias.size(), 123.0);
  const auto b = analyze_snapshot(s);
  for (std::size_t k = 0; k < a.strengths.size(); ++k) EXPECT_EQ(a.strengths[k].s, b.strengths[k].s);
  for (std::size_t k = 0; k < a.fluctuations.size(); ++k) EXPECT_EQ(a.fluctuations[k].value, b.fluctuations[k].value);
}

TEST(Properties, HomogeneityAndShiftCovariance) {
  Gen g(1234);
  for (int t = 0; t < 50; ++t) {
    const auto s = g.dense_net({g.index(1, 12), g.index(1, 12), g.index(1, 12)});
    const double c = g.real(-3, 3);
    auto scaled = s;
    for (auto& l : scaled.layers)
      for (auto& w : std::get<Dense>(l).weights.values()) w *= c;
    const auto a = analyze_snapshot(s);
    const auto b = analyze_snapshot(scaled);
    for (std::size_t k = 0; k < a.strengths.size(); ++k) {
      for (std::size_t i = 0; i < a.strengths[k].s.size(); ++i) {
        EXPECT_NEAR(b.strengths[k].s[i], c * a.strengths[k].s[i], 1e-12);
        EXPECT_NEAR(b.strengths[k].s_in[i], c * a.strengths[k].s_in[i], 1e-12);
        EXPECT_NEAR(b.strengths[k].s_out[i], c * a.strengths[k].s_out[i], 1e-12);
      }
      EXPECT_NEAR(b.fluctuations[k].value, std::abs(c) * a.fluctuations[k].value, 1e-12);
    }
    for (std::size_t l = 0; l < a.link_stats.size(); ++l) {
      EXPECT_NEAR(b.link_stats[l].delta, c * c * a.link_stats[l].delta, 1e-12);
    }

    const double shift = g.real(-2, 2);
    for (const auto& layer : s.layers) {
      auto d = std::get<Dense>(layer);
      const auto before = link_weight_stats(d);
      for (auto& w : d.weights.values()) w += shift;
      const auto after = link_weight_stats(d);
      EXPECT_NEAR(after.mu, before.mu + shift, 1e-12);
      EXPECT_NEAR(after.delta, before.delta, 1e-12);
    }
  }
}

TEST(Properties, NeuronPermutationPermutesStrengths) {
  Gen g(77);
  auto s = g.dense_net({4, 6, 3});
  std::vector<std::size_t> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), g.engine());
  auto p = s;
  auto& first = std::get<Dense>(p.layers[0]).weights;
  auto& second = std::get<Dense>(p.layers[1]).weights;
  const auto& of = std::get<Dense>(s.layers[0]).weights;
  const auto& os = std::get<Dense>(s.layers[1]).weights;
  for (std::size_t j = 0; j < 6; ++j) {
    for (std::size_t i = 0; i < 4; ++i) first(i, j) = of(i, perm[j]);
    for (std::size_t c = 0; c < 3; ++c) second(j, c) = os(perm[j], c);
  }
  const auto a = analyze_snapshot(s);
  const auto b = analyze_snapshot(p);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(b.strengths[1].s[j], a.strengths[1].s[perm[j]], 1e-15);
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_NEAR(a.link_stats[l].mu, b.link_stats[l].mu, 1e-15);
    EXPECT_NEAR(a.link_stats[l].delta, b.link_stats[l].delta, 1e-15);
  }
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(a.fluctuations[k].value, b.fluctuations[k].value, 1e-14);
}
