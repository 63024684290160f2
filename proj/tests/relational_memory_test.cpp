// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "memdrive/error.hpp"
#include "memdrive/grad_check.hpp"
#include "memdrive/relational_memory.hpp"
#include "test_support.hpp"

using namespace memdrive;
using memdrive::testing::random_tensor;

namespace {

Tensor eye(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor::from({n, n}, v);
}

Linear plain(Tensor w) { return Linear{std::move(w), Tensor{}}; }

/// Hand-built parameters with every map set to `fill` (no biases).
MemoryParams filled_params(std::size_t slots, std::size_t d, std::size_t heads, double fill) {
  auto m = [&] { return Tensor::full({d, d}, fill); };
  MemoryParams p;
  p.initial = Tensor::zeros({slots, d});
  p.query = plain(m());
  p.key = plain(m());
  p.value = plain(m());
  p.mlp_inner = plain(m());
  p.mlp_outer = plain(m());
  p.forget_input = m();
  p.forget_memory = m();
  p.input_input = m();
  p.input_memory = m();
  p.slots = slots;
  p.dim = d;
  p.heads = heads;
  return p;
}

RelationalMemory random_memory(std::uint64_t seed, std::size_t slots, std::size_t d,
                               std::size_t heads, ParamStore& store) {
  store = ParamStore(seed);
  return RelationalMemory(store, "memory", slots, d, heads);
}

}  // namespace

TEST(MemoryAttend, ZeroStateAndInputGiveZero) {
  ParamStore store;
  const RelationalMemory rm = random_memory(1, 3, 8, 2, store);
  const Tensor z = rm.attend(Tensor::zeros({3, 8}), Tensor::zeros({1, 8}));
  EXPECT_EQ(z.shape(), Shape({3, 8}));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(MemoryAttend, IdenticalKeysReturnTheSharedRow) {
  MemoryParams p = filled_params(1, 2, 1, 0.0);
  p.query = plain(eye(2));
  p.key = plain(eye(2));
  p.value = plain(eye(2));
  const RelationalMemory rm(p);
  const Tensor row = Tensor::matrix({{0.7, -1.3}});
  const Tensor z = rm.attend(row, row);
  EXPECT_NEAR(z.data()[0], 0.7, 1e-15);
  EXPECT_NEAR(z.data()[1], -1.3, 1e-15);
}

TEST(MemoryAttend, ShapeConstantAndWrongWidthRejected) {
  ParamStore store;
  const RelationalMemory rm = random_memory(2, 4, 8, 4, store);
  std::mt19937_64 rng(2);
  EXPECT_EQ(rm.attend(random_tensor(rng, {4, 8}), random_tensor(rng, {1, 8})).shape(), Shape({4, 8}));
  EXPECT_THROW(rm.attend(random_tensor(rng, {4, 8}), random_tensor(rng, {1, 6})), ShapeError);
  EXPECT_THROW(rm.attend(random_tensor(rng, {3, 8}), random_tensor(rng, {1, 8})), ShapeError);
}

TEST(MemoryResidual, ZeroMlpPassesSumThrough) {
  const RelationalMemory rm(filled_params(2, 3, 1, 0.0));
  std::mt19937_64 rng(3);
  const Tensor z = random_tensor(rng, {2, 3}), m = random_tensor(rng, {2, 3});
  const Tensor out = rm.residual(z, m);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(out.data()[i], z.data()[i] + m.data()[i]);
  const Tensor zero = rm.residual(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
}

TEST(MemoryResidual, ScalarHandComputation) {
  MemoryParams p = filled_params(1, 1, 1, 0.0);
  p.mlp_inner = plain(Tensor::matrix({{1.0}}));
  p.mlp_outer = plain(Tensor::matrix({{1.0}}));
  const RelationalMemory rm(p);
  // relu(2) + 2
  EXPECT_DOUBLE_EQ(rm.residual(Tensor::matrix({{1.5}}), Tensor::matrix({{0.5}})).item(), 4.0);
}

TEST(MemoryGate, NeutralGatesAverage) {
  const RelationalMemory rm(filled_params(2, 3, 1, 0.0));
  std::mt19937_64 rng(4);
  const Tensor mt = random_tensor(rng, {2, 3}), m = random_tensor(rng, {2, 3});
  const Tensor out = rm.gate(mt, m, random_tensor(rng, {1, 3}));
  for (std::size_t i = 0; i < 6; ++i)
    EXPECT_NEAR(out.data()[i], 0.5 * m.data()[i] + 0.5 * std::tanh(mt.data()[i]), 1e-15);
}

TEST(MemoryGate, SaturatedGatesRetainMemory) {
  MemoryParams p = filled_params(1, 1, 1, 0.0);
  p.forget_input = Tensor::matrix({{40.0}});
  p.input_input = Tensor::matrix({{-40.0}});
  const RelationalMemory rm(p);
  const Tensor out = rm.gate(Tensor::matrix({{2.0}}), Tensor::matrix({{0.3}}), Tensor::matrix({{1.0}}));
  EXPECT_NEAR(out.item(), 0.3, 1e-15);
}

TEST(MemoryGate, ScalarHandComputation) {
  const RelationalMemory rm(filled_params(1, 1, 1, 0.0));
  const Tensor out = rm.gate(Tensor::matrix({{0.5}}), Tensor::matrix({{1.0}}), Tensor::matrix({{0.0}}));
  EXPECT_NEAR(out.item(), 0.5 + 0.5 * std::tanh(0.5), 1e-15);
  EXPECT_NEAR(out.item(), 0.7311, 5e-5);
}

TEST(MemoryRollout, EmptyPrefixGivesOneState) {
  ParamStore store;
  const RelationalMemory rm = random_memory(5, 3, 8, 2, store);
  std::mt19937_64 rng(5);
  const Tensor emb = random_tensor(rng, {6, 8}, 1.0, false);
  const auto states = rm.rollout({}, 1, emb);
  ASSERT_EQ(states.size(), 1u);
  const std::size_t bos[] = {1};
  const Tensor want = rm.step(rm.initial(1), gather_rows(emb, bos));
  for (std::size_t i = 0; i < want.numel(); ++i) EXPECT_EQ(states[0].matrix.data()[i], want.data()[i]);
}

TEST(MemoryRollout, PrefixPropertyIsBitExact) {
  ParamStore store;
  const RelationalMemory rm = random_memory(6, 3, 8, 2, store);
  std::mt19937_64 rng(6);
  const Tensor emb = random_tensor(rng, {9, 8}, 1.0, false);
  std::uniform_int_distribution<std::size_t> tok(0, 8), len(0, 12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> p(len(rng));
    for (auto& t : p) t = tok(rng);
    std::vector<std::size_t> ext = p;
    ext.push_back(tok(rng));
    const auto a = rm.rollout(p, 1, emb);
    const auto b = rm.rollout(ext, 1, emb);
    ASSERT_EQ(a.size(), p.size() + 1);
    ASSERT_EQ(b.size(), ext.size() + 1);
    for (std::size_t t = 0; t < a.size(); ++t) {
      EXPECT_EQ(a[t].step, t + 1);
      const auto x = a[t].matrix.data(), y = b[t].matrix.data();
      ASSERT_TRUE(std::equal(x.begin(), x.end(), y.begin())) << "trial " << trial << " t " << t;
    }
  }
}

TEST(MemoryRollout, ShapesConstantAndGatesBounded) {
  ParamStore store;
  const RelationalMemory rm = random_memory(7, 2, 8, 2, store);
  std::mt19937_64 rng(7);
  const Tensor emb = random_tensor(rng, {9, 8}, 3.0, false);
  std::uniform_int_distribution<std::size_t> tok(0, 8);
  Tensor m = rm.initial(1);
  for (int t = 0; t < 40; ++t) {
    const std::size_t id[] = {tok(rng)};
    const Tensor y = gather_rows(emb, id);
    const auto [f, i] = rm.gate_activations(m, y);
    const Tensor next = rm.step(m, y);
    ASSERT_EQ(next.shape(), Shape({2, 8}));
    ASSERT_TRUE(all_finite(next));
    for (std::size_t k = 0; k < next.numel(); ++k) {
      EXPECT_GT(f.data()[k], 0.0);
      EXPECT_LT(f.data()[k], 1.0);
      EXPECT_GT(i.data()[k], 0.0);
      EXPECT_LT(i.data()[k], 1.0);
      const double bound = f.data()[k] * std::abs(m.data()[k]) + i.data()[k];
      EXPECT_LE(std::abs(next.data()[k]), bound + 1e-15);
    }
    m = next;
  }
}

TEST(MemoryRollout, DeterministicAndRejectsBadTokens) {
  ParamStore store;
  const RelationalMemory rm = random_memory(8, 3, 8, 2, store);
  std::mt19937_64 rng(8);
  const Tensor emb = random_tensor(rng, {5, 8}, 1.0, false);
  const std::vector<std::size_t> p = {3, 4, 2};
  const auto a = rm.rollout(p, 1, emb), b = rm.rollout(p, 1, emb);
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t k = 0; k < a[t].matrix.numel(); ++k)
      EXPECT_EQ(a[t].matrix.data()[k], b[t].matrix.data()[k]);
  const std::vector<std::size_t> bad = {3, 5};
  EXPECT_THROW(rm.rollout(bad, 1, emb), ContractError);
  EXPECT_THROW(rm.rollout(p, 1, Tensor::zeros({0, 8})), Error);
}

TEST(MemoryStep, BatchedStepMatchesPerSampleSteps) {
  ParamStore store;
  const RelationalMemory rm = random_memory(9, 3, 8, 4, store);
  std::mt19937_64 rng(9);
  const Tensor m = random_tensor(rng, {9, 8}, 1.0, false);
  const Tensor y = random_tensor(rng, {3, 8}, 1.0, false);
  const Tensor batched = rm.step(m, y);
  for (std::size_t b = 0; b < 3; ++b) {
    const Tensor one = rm.step(slice_rows(m, b * 3, 3), slice_rows(y, b, 1));
    for (std::size_t k = 0; k < one.numel(); ++k)
      EXPECT_NEAR(batched.data()[b * 24 + k], one.data()[k], 1e-14);
  }
}

TEST(MemoryGradient, FlowsThroughThreeSteps) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ParamStore store;
    const RelationalMemory rm = random_memory(20 + seed, 2, 4, 2, store);
    std::mt19937_64 rng(seed);
    const Tensor emb = random_tensor(rng, {5, 4});
    const Tensor w = random_tensor(rng, {2, 4}, 1.0, false);
    const std::vector<std::size_t> prefix = {3, 2};
    std::vector<Tensor> params = {emb};
    for (const auto& p : store.params()) params.push_back(p.tensor);
    const GradCheckResult r = grad_check(
        [&] { return sum(mul(rm.rollout(prefix, 1, emb).back().matrix, w)); }, params);
    EXPECT_LE(r.max_rel_error, 1e-4) << "seed " << seed;
  }
}

TEST(FlattenMemory, RowMajorAndInvertible) {
  const Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor f = flatten_memory(m, 2);
  EXPECT_EQ(f.shape(), Shape({1, 4}));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(f.data()[i], static_cast<double>(i + 1));
  const Tensor back = reshape(f, {2, 2});
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(back.data()[i], m.data()[i]);
  for (std::size_t s = 1; s <= 4; ++s)
    EXPECT_EQ(flatten_memory(Tensor::zeros({3 * s, 8}), s).shape(), Shape({3, s * 8}));
}
