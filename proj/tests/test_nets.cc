// Copyright 2026 The DLGPD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "dlgpd/env.h"
#include "dlgpd/nets.h"

namespace dlgpd::nets {
namespace {

TEST(Arch, StandardShapeChains) {
  const NetArch a = NetArch::standard();
  EXPECT_EQ(a.encoder_sizes(), (std::vector<int>{64, 31, 14, 6, 2}));
  EXPECT_EQ(a.decoder_sizes(), (std::vector<int>{1, 5, 13, 30, 64}));
  EXPECT_EQ(a.encoder_features(), 1024);
}

TEST(Arch, TinyShapeChains) {
  const NetArch a = NetArch::tiny();
  EXPECT_EQ(a.encoder_sizes().front(), 8);
  EXPECT_EQ(a.decoder_sizes().back(), 8);
  a.validate();
}

TEST(Arch, InconsistentDecoderRejected) {
  NetArch a = NetArch::standard();
  a.decoder.back().kernel = 4;
  EXPECT_THROW(a.validate(), Error);
}

TEST(Encoder, OutputShapesAndPositiveStddev) {
  const Encoder<float> enc;
  std::vector<float> w(enc.num_params());
  Rng rng(1);
  enc.initialize(w, rng);
  const env::Observation o = env::make_observation(env::render({0.1, 0}), env::render({0.2, 0}));
  const LatentGaussian g = encode(o, enc, w);
  EXPECT_TRUE(g.mean.allFinite());
  EXPECT_GT(g.stddev.minCoeff(), NetArch{}.sigma_floor - 1e-9);
}

TEST(Encoder, BatchMatchesSingle) {
  const Encoder<float> enc;
  std::vector<float> w(enc.num_params());
  Rng rng(2);
  enc.initialize(w, rng);
  const env::Observation a = env::make_observation(env::render({0.1, 0}), env::render({0.2, 0}));
  const env::Observation b = env::make_observation(env::render({2.1, 0}), env::render({2.0, 0}));
  const env::Observation* batch[] = {&a, &b};
  const auto both = encode_batch(batch, enc, w);
  const LatentGaussian single = encode(b, enc, w);
  EXPECT_LT((both[1].mean - single.mean).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Decoder, OutputInUnitInterval) {
  const Decoder<float> dec;
  std::vector<float> w(dec.num_params());
  Rng rng(3);
  dec.initialize(w, rng);
  const std::vector<float> img = decode(Latent(0.5, -1.0, 2.0), dec, w);
  ASSERT_EQ(img.size(), std::size_t{6 * 64 * 64});
  for (float p : img) {
    ASSERT_GT(p, 0.0f);
    ASSERT_LT(p, 1.0f);
  }
}

TEST(Gaussian, EntropyClosedForm) {
  LatentGaussian g;
  EXPECT_NEAR(diag_gaussian_entropy(g), 1.5 * (1 + std::log(2 * std::numbers::pi)), 1e-14);
  g.stddev = Latent(2.0, 1.0, 0.5);
  EXPECT_NEAR(diag_gaussian_entropy(g), 1.5 * (1 + std::log(2 * std::numbers::pi)), 1e-14);
}

TEST(Gaussian, ReparamSample) {
  LatentGaussian g;
  g.mean = Latent(1, 2, 3);
  g.stddev = Latent(0.5, 1, 2);
  EXPECT_TRUE(reparam_sample(g, Latent(1, -1, 0.5)).isApprox(Latent(1.5, 1, 4)));
}

TEST(Bernoulli, LogLikelihoodAndClamp) {
  const std::vector<double> t{1.0, 0.0, 0.5};
  const std::vector<double> p{0.8, 0.1, 0.5};
  const double expected = std::log(0.8) + std::log(0.9) + std::log(0.5);
  EXPECT_NEAR(bernoulli_loglik(t, p), expected, 1e-12);
  const std::vector<double> t1{1.0};
  const std::vector<double> tiny{1e-12};
  EXPECT_NEAR(bernoulli_loglik(t1, tiny), std::log(kPixelClamp), 1e-9);
  const std::vector<double> zero{0.0};
  EXPECT_THROW(bernoulli_loglik(t1, zero), Error);
}

TEST(Layout, BlocksAreContiguous) {
  const Encoder<double> enc(NetArch::tiny());
  std::size_t offset = 0;
  for (const auto& b : enc.layout().blocks()) {
    EXPECT_EQ(b.offset, offset);
    offset += b.size();
  }
  EXPECT_EQ(offset, enc.num_params());
}

}  // namespace
}  // namespace dlgpd::nets
