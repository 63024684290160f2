// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "memdrive/error.hpp"
#include "memdrive/tensor.hpp"
#include "test_support.hpp"

using namespace memdrive;
using memdrive::testing::random_tensor;

namespace {

void expect_values(const Tensor& t, const std::vector<double>& want, double tol = 0.0) {
  ASSERT_EQ(t.numel(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t.data()[i], want[i], tol) << "at " << i;
}

}  // namespace

TEST(Matmul, IdentityLeavesOperandUnchanged) {
  const Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  expect_values(matmul(eye, a), {1, 2, 3, 4});
}

TEST(Matmul, ZeroMatrixGivesZero) {
  std::mt19937_64 rng(3);
  const Tensor z = Tensor::zeros({3, 4});
  const Tensor out = matmul(z, random_tensor(rng, {4, 5}, 1.0, false));
  EXPECT_EQ(out.shape(), Shape({3, 5}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, HandComputedProduct) {
  expect_values(matmul(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{5, 6}, {7, 8}})),
                {19, 22, 43, 50});
}

TEST(Matmul, ShapeMismatchReportsBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2, 3) x (2, 3)"), std::string::npos) << msg;
  }
}

TEST(Softmax, UniformRow) {
  const double third = 1.0 / 3.0;
  expect_values(softmax_rows(Tensor::matrix({{0, 0, 0}})), {third, third, third}, 1e-15);
}

TEST(Softmax, ClosedFormTwoEntries) {
  expect_values(softmax_rows(Tensor::matrix({{0, std::log(3.0)}})), {0.25, 0.75}, 1e-15);
}

TEST(Softmax, LargeLogitsStayFinite) {
  const Tensor s = softmax_rows(Tensor::matrix({{1000, 0}}));
  EXPECT_TRUE(all_finite(s));
  EXPECT_NEAR(s.data()[0], 1.0, 1e-15);
  EXPECT_NEAR(s.data()[1], 0.0, 1e-15);
}

TEST(Softmax, RowsSumToOneOnRandomInputs) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 12);
  std::uniform_real_distribution<double> scale(0.01, 200.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = dim(rng), n = dim(rng);
    const Tensor s = softmax_rows(random_tensor(rng, {m, n}, scale(rng), false));
    for (std::size_t r = 0; r < m; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        EXPECT_GE(s.at(r, c), 0.0);
        sum += s.at(r, c);
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(RowStats, ConstantRowHasZeroDeviation) {
  const RowStats s = row_stats(Tensor::matrix({{5, 5, 5}}));
  EXPECT_EQ(s.mean.item(), 5.0);
  EXPECT_EQ(s.stddev.item(), 0.0);
}

TEST(RowStats, PopulationDeviation) {
  const RowStats s = row_stats(Tensor::matrix({{1, 3}}));
  EXPECT_DOUBLE_EQ(s.mean.item(), 2.0);
  EXPECT_DOUBLE_EQ(s.stddev.item(), 1.0);
}

TEST(RowStats, StandardizedRowsAreCentered) {
  std::mt19937_64 rng(5);
  const Tensor z = standardize_rows(random_tensor(rng, {6, 9}, 3.0, false), 1e-6);
  for (std::size_t r = 0; r < 6; ++r) {
    double m = 0.0;
    for (std::size_t c = 0; c < 9; ++c) m += z.at(r, c);
    EXPECT_NEAR(m / 9.0, 0.0, 1e-12);
  }
}

TEST(NllLoss, UniformLogitsGiveLogV) {
  const Tensor logits = Tensor::zeros({3, 4});
  const std::vector<std::size_t> targets = {0, 3, 2};
  EXPECT_NEAR(nll_loss(logits, targets, 99).item(), std::log(4.0), 1e-15);
}

TEST(NllLoss, HandSetLogits) {
  const Tensor logits = Tensor::matrix({{0, std::log(3.0)}, {0, std::log(3.0)}});
  const std::vector<std::size_t> targets = {1, 0};
  const double want = 0.5 * (-std::log(0.75) - std::log(0.25));
  EXPECT_NEAR(nll_loss(logits, targets, 99).item(), want, 1e-12);
  EXPECT_NEAR(nll_loss(logits, targets, 99).item(), 0.8370, 5e-5);
}

TEST(NllLoss, ConfidentCorrectLogitsNearZero) {
  const Tensor logits = Tensor::matrix({{50, 0, 0}, {0, 0, 50}});
  const std::vector<std::size_t> targets = {0, 2};
  EXPECT_LT(nll_loss(logits, targets, 99).item(), 1e-20);
}

TEST(NllLoss, IgnoredPositionsContributeNothing) {
  const Tensor logits = Tensor::matrix({{0, std::log(3.0)}, {7, -2}});
  const std::vector<std::size_t> with_pad = {1, 0};
  const std::vector<std::size_t> without = {1};
  EXPECT_DOUBLE_EQ(nll_loss(logits, with_pad, 0).item(),
                   nll_loss(slice_rows(logits, 0, 1), without, 0).item());
}

TEST(NllLoss, TargetOutsideVocabularyRejected) {
  const std::vector<std::size_t> targets = {4};
  EXPECT_THROW(nll_loss(Tensor::zeros({1, 4}), targets, 0), Error);
}

TEST(Backward, SquareAtThree) {
  const Tensor x = Tensor::scalar(3.0, true);
  backward(mul(x, x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Backward, SumGivesOnes) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor(rng, {3, 4});
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, GradientsAreOverwrittenNotAccumulated) {
  const Tensor x = Tensor::scalar(2.0, true);
  backward(scale(x, 5.0));
  backward(scale(x, 5.0));
  EXPECT_DOUBLE_EQ(x.grad()[0], 5.0);
}

TEST(Backward, NonScalarLossRejected) {
  const Tensor x = Tensor::zeros({2, 2}, true);
  EXPECT_THROW(backward(scale(x, 2.0)), ContractError);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  const Tensor x = Tensor::scalar(2.0, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = mul(x, x);
  }
  EXPECT_FALSE(y.requires_grad());
}

TEST(Ops, ConcatSliceGatherReshapeRoundTrip) {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor b = Tensor::matrix({{5, 6}});
  const Tensor rows[] = {a, b};
  const Tensor c = concat_rows(rows);
  expect_values(c, {1, 2, 3, 4, 5, 6});
  expect_values(slice_rows(c, 1, 2), {3, 4, 5, 6});
  expect_values(slice_cols(c, 1, 1), {2, 4, 6});
  const std::vector<std::size_t> idx = {2, 0, 2};
  expect_values(gather_rows(c, idx), {5, 6, 1, 2, 5, 6});
  const Tensor cols[] = {a, a};
  expect_values(concat_cols(cols), {1, 2, 1, 2, 3, 4, 3, 4});
  const Tensor flat = reshape(a, {1, 4});
  expect_values(flat, {1, 2, 3, 4});
  EXPECT_EQ(reshape(flat, {2, 2}).shape(), a.shape());
  expect_values(transpose(a), {1, 3, 2, 4});
}

TEST(Ops, ElementwiseValues) {
  const Tensor x = Tensor::matrix({{-1, 0, 2}});
  expect_values(relu(x), {0, 0, 2});
  expect_values(sigmoid(Tensor::matrix({{0}})), {0.5});
  expect_values(tanh(Tensor::matrix({{0.5}})), {std::tanh(0.5)});
  expect_values(add_scalar(x, 1.0), {0, 1, 3});
  expect_values(mul(x, x), {1, 0, 4});
  expect_values(add_rowvec(x, Tensor::from({3}, {1, 1, 1})), {0, 1, 3});
  expect_values(mul_rowvec(x, Tensor::from({3}, {2, 2, 2})), {-2, 0, 4});
}

TEST(Attention, CausalMaskHidesFuture) {
  std::mt19937_64 rng(2);
  const Tensor q = random_tensor(rng, {4, 4}, 1.0, false);
  Tensor k = random_tensor(rng, {4, 4}, 1.0, false);
  Tensor v = random_tensor(rng, {4, 4}, 1.0, false);
  const AttentionSegment seg{0, 4, 0, 4};
  const Tensor base = multi_head_attention(q, k, v, {&seg, 1}, 2, true);
  k.mutable_data()[3 * 4 + 1] += 10.0;
  v.mutable_data()[3 * 4 + 2] += 10.0;
  const Tensor moved = multi_head_attention(q, k, v, {&seg, 1}, 2, true);
  for (std::size_t i = 0; i < 3 * 4; ++i) EXPECT_EQ(base.data()[i], moved.data()[i]);
  EXPECT_NE(base.data()[3 * 4 + 2], moved.data()[3 * 4 + 2]);
}

TEST(Attention, MapsAreRowStochastic) {
  std::mt19937_64 rng(4);
  const Tensor q = random_tensor(rng, {5, 6}, 1.0, false);
  const Tensor k = random_tensor(rng, {7, 6}, 1.0, false);
  const AttentionSegment segs[] = {{0, 2, 0, 3}, {2, 3, 3, 4}};
  AttentionMaps maps;
  multi_head_attention(q, k, k, segs, 3, false, &maps);
  ASSERT_EQ(maps.blocks.size(), 6u);
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t h = 0; h < 3; ++h) {
      const auto& blk = maps.blocks[s * 3 + h];
      ASSERT_EQ(blk.size(), segs[s].q_len * segs[s].k_len);
      for (std::size_t i = 0; i < segs[s].q_len; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < segs[s].k_len; ++j) sum += blk[i * segs[s].k_len + j];
        EXPECT_NEAR(sum, 1.0, 1e-12);
      }
    }
}

TEST(Determinism, IdenticalInputsGiveBitIdenticalOutputs) {
  auto run = [] {
    std::mt19937_64 rng(21);
    const Tensor a = random_tensor(rng, {5, 8}, 1.0, false);
    const Tensor b = random_tensor(rng, {8, 8}, 1.0, false);
    const AttentionSegment seg{0, 5, 0, 5};
    const Tensor x = matmul(a, b);
    return log_softmax_rows(multi_head_attention(x, x, x, {&seg, 1}, 4, true));
  };
  const Tensor r1 = run(), r2 = run();
  for (std::size_t i = 0; i < r1.numel(); ++i) EXPECT_EQ(r1.data()[i], r2.data()[i]);
}

TEST(Tensor, RejectsInconsistentConstruction) {
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), ShapeError);
  EXPECT_THROW(Shape({1, 2, 3, 4}), ShapeError);
}
