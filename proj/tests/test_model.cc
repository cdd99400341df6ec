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
#include <fstream>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "dlgpd/model.h"
#include "test_util.h"

namespace dlgpd::model {
namespace {

std::vector<env::Rollout> tiny_rollouts(std::uint64_t seed, int count, int length) {
  Rng rng(seed);
  env::RenderOptions ro;
  ro.image_size = nets::NetArch::tiny().image_size;
  std::vector<env::Rollout> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(env::collect_rollout({}, env::UniformInit::training(),
                                       env::uniform_random_policy(), length, rng, ro));
  }
  return out;
}

TrainBatch tiny_batch(std::uint64_t seed, int size) {
  const data::TransitionSet ts(tiny_rollouts(seed, 1, size));
  std::vector<int> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  return make_batch(ts, idx);
}

TEST(Normalize, JointStatisticsOverBothSets) {
  Eigen::MatrixXd s(3, 2), sn(3, 2);
  s << 1, 2, 0, 0, 5, 5;
  sn << 3, 4, 0, 0, 5, 5;
  const Normalized n = normalize_latents(s, sn);
  EXPECT_NEAR(n.stats.mean(0), 2.5, 1e-15);
  EXPECT_NEAR(n.stats.stddev(0), std::sqrt(1.25), 1e-15);
  EXPECT_EQ(n.stats.stddev(1), kNormFloor);
  EXPECT_EQ(n.states.row(1).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(n.next_states.row(2).cwiseAbs().maxCoeff(), 0.0);
  const double m = (n.states.row(0).sum() + n.next_states.row(0).sum()) / 4;
  EXPECT_NEAR(m, 0.0, 1e-15);
}

TEST(Normalize, RejectsSingleItem) {
  EXPECT_THROW(normalize_latents(Eigen::MatrixXd::Zero(3, 1), Eigen::MatrixXd::Zero(3, 1)), Error);
}

TEST(Normalize, BackwardMatchesFiniteDifferences) {
  Rng rng(4);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd s(3, 4), sn(3, 4), ws(3, 4), wn(3, 4);
  for (auto* m : {&s, &sn, &ws, &wn}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = nd(rng);
  }
  auto f = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Normalized n = normalize_latents(a, b);
    return (n.states.cwiseProduct(ws)).sum() + (n.next_states.cwiseProduct(wn)).sum();
  };
  const Normalized n = normalize_latents(s, sn);
  Eigen::MatrixXd ds, dn;
  normalize_latents_backward(n, ws, wn, &ds, &dn);
  const double h = 1e-6;
  for (int i = 0; i < 12; ++i) {
    Eigen::MatrixXd p = s, m = s;
    p.data()[i] += h;
    m.data()[i] -= h;
    EXPECT_NEAR(ds.data()[i], (f(p, sn) - f(m, sn)) / (2 * h), 1e-6);
    p = sn;
    m = sn;
    p.data()[i] += h;
    m.data()[i] -= h;
    EXPECT_NEAR(dn.data()[i], (f(s, p) - f(s, m)) / (2 * h), 1e-6);
  }
}

TEST(Loss, FiniteOnRandomModel) {
  Rng rng(5);
  const TrainBatch b = tiny_batch(5, 6);
  const auto params = DlgpdParams<double>::initialize(nets::NetArch::tiny(), 1.0, -10.0, rng);
  const LossParts parts = training_loss(b, params, rng);
  EXPECT_TRUE(std::isfinite(parts.loss));
  EXPECT_TRUE(std::isfinite(parts.terms.recon));
  EXPECT_LT(parts.terms.recon, 0.0);
}

TEST(Loss, NoSnrPenaltyWhenScalesAreEqual) {
  Rng rng(6);
  const TrainBatch b = tiny_batch(6, 5);
  auto params = DlgpdParams<double>::initialize(nets::NetArch::tiny(), 1.0, -10.0, rng);
  gp::RbfHyperparams h;
  h.lengthscales = Eigen::VectorXd::Ones(kGpInputDim);
  h.outputscale_sq = 0.5;
  h.noise_var = 0.5;
  for (auto& k : params.transition) k = gp::unconstrain(h);
  params.reward = gp::unconstrain(h);
  Rng noise(1);
  const LossParts parts = training_loss(b, params, noise);
  EXPECT_NEAR(parts.snr, 0.0, 1e-20);
  EXPECT_NEAR(parts.loss, -parts.terms.total() - parts.log_prior, 1e-9);
}

TEST(Loss, SameNoiseSameValue) {
  Rng rng(7);
  const TrainBatch b = tiny_batch(7, 4);
  const auto params = DlgpdParams<double>::initialize(nets::NetArch::tiny(), 1.0, -10.0, rng);
  Rng a(11), c(11);
  EXPECT_EQ(training_loss(b, params, a).loss, training_loss(b, params, c).loss);
}

TEST(Loss, GradientMasksSeparateTerms) {
  Rng rng(8);
  const TrainBatch b = tiny_batch(8, 4);
  const auto params = DlgpdParams<double>::initialize(nets::NetArch::tiny(), 1.0, -10.0, rng);
  ElboOptions only_recon;
  only_recon.grad_entropy = only_recon.grad_transition = only_recon.grad_reward = false;
  auto g = params.zeros_like();
  Rng noise(1);
  elbo(b, params, noise, &g, only_recon);
  // Reconstruction does not touch any GP hyperparameter.
  EXPECT_EQ(g.reward.raw_outputscale, 0.0);
  EXPECT_EQ(g.transition[0].raw_noise, 0.0);
  double dec = 0.0;
  for (double v : g.decoder) dec += std::abs(v);
  EXPECT_GT(dec, 0.0);
}

TEST(Params, ScalarViewOrderAndHash) {
  Rng rng(9);
  auto p = DlgpdParams<float>::initialize(nets::NetArch::tiny(), 1.0, -3.0, rng);
  const std::size_t n = p.num_scalars();
  EXPECT_EQ(n, p.encoder.size() + p.decoder.size() + 4 * 6);
  EXPECT_EQ(p.scalar_name(0).rfind("enc.", 0), 0u);
  EXPECT_EQ(p.scalar_name(n - 1).rfind("gp.reward", 0), 0u);
  const std::uint64_t h = p.hash();
  p.set_scalar(n - 1, p.get_scalar(n - 1) + 1.0);
  EXPECT_NE(p.hash(), h);
  const auto k = p.kernels();
  EXPECT_EQ(k.size(), 4u);
}

TEST(Params, RewardKernelInitialization) {
  Rng rng(10);
  const auto p = DlgpdParams<float>::initialize(nets::NetArch::tiny(), 4.0, -3.0, rng);
  const auto k = p.kernels();
  EXPECT_NEAR(k[3].outputscale_sq, 4.0, 1e-9);
  EXPECT_NEAR(k[3].noise_var, 0.8, 1e-9);
  EXPECT_NEAR(k[0].outputscale_sq, 1.0, 1e-9);
  EXPECT_EQ(p.r_min, -3.0);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  Rng rng(11);
  auto p = DlgpdParams<float>::initialize(nets::NetArch::tiny(), 1.0, -3.0, rng);
  auto g = p.zeros_like();
  g.set_scalar(0, 5.0);
  g.set_scalar(1, -0.01);
  const double a = p.get_scalar(0), b = p.get_scalar(1), c = p.get_scalar(2);
  Adam<float> opt(p, {});
  opt.step(p, g);
  EXPECT_NEAR(p.get_scalar(0), a - 1e-3, 1e-6);
  EXPECT_NEAR(p.get_scalar(1), b + 1e-3, 1e-6);
  EXPECT_EQ(p.get_scalar(2), c);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Training, LossDecreasesOverFiftySteps) {
  const data::TransitionSet ts(tiny_rollouts(12, 4, 8));
  TrainConfig cfg;
  cfg.arch = nets::NetArch::tiny();
  cfg.batch_size = 16;
  cfg.epochs = 25;  // 2 steps per epoch
  cfg.adam.lr = 3e-3;
  cfg.seed = 3;
  const TrainResult r = train(ts, cfg);
  ASSERT_EQ(r.log.size(), 25u);
  double first = 0, last = 0;
  for (int i = 0; i < 5; ++i) {
    first += r.log[i].loss;
    last += r.log[20 + i].loss;
  }
  EXPECT_LT(last, first);
}

TEST(Training, Deterministic) {
  const data::TransitionSet ts(tiny_rollouts(13, 2, 6));
  TrainConfig cfg;
  cfg.arch = nets::NetArch::tiny();
  cfg.batch_size = 5;
  cfg.epochs = 3;
  const TrainResult a = train(ts, cfg);
  const TrainResult b = train(ts, cfg);
  EXPECT_EQ(a.params.hash(), b.params.hash());
  EXPECT_EQ(a.log.back().loss, b.log.back().loss);
}

TEST(Training, RejectsBadConfig) {
  const data::TransitionSet ts(tiny_rollouts(14, 1, 4));
  TrainConfig cfg;
  cfg.arch = nets::NetArch::tiny();
  cfg.batch_size = 1;
  EXPECT_THROW(train(ts, cfg), Error);
}

TEST(CheckpointTest, RoundTrip) {
  testing::TempDir dir;
  Rng rng(15);
  Checkpoint c;
  c.params = DlgpdParams<float>::initialize(nets::NetArch::tiny(), 2.0, -7.5, rng);
  c.norm.mean = Latent(0.1, 0.2, 0.3);
  c.norm.stddev = Latent(1.5, 2.5, 3.5);
  c.epoch = 42;
  c.config_json = R"({"seed":3})";
  save_checkpoint(dir.path() / "m.ckpt", c);
  const Checkpoint back = load_checkpoint(dir.path() / "m.ckpt");
  EXPECT_EQ(back.params.hash(), c.params.hash());
  EXPECT_EQ(back.norm.mean, c.norm.mean);
  EXPECT_EQ(back.norm.stddev, c.norm.stddev);
  EXPECT_EQ(back.epoch, 42);
  EXPECT_EQ(back.params.r_min, -7.5);
  EXPECT_TRUE(back.params.arch == nets::NetArch::tiny());
  // Serialization is deterministic.
  save_checkpoint(dir.path() / "n.ckpt", back);
  EXPECT_EQ(std::filesystem::file_size(dir.path() / "n.ckpt"),
            std::filesystem::file_size(dir.path() / "m.ckpt"));
}

TEST(CheckpointTest, CorruptFileRejected) {
  testing::TempDir dir;
  {
    std::ofstream os(dir.path() / "bad.ckpt", std::ios::binary);
    os << "DLGPDCKP garbage";
  }
  EXPECT_THROW(load_checkpoint(dir.path() / "bad.ckpt"), Error);
}

TEST(Conditioning, EvidenceDeterministicAndAligned) {
  Rng rng(16);
  const auto rs = tiny_rollouts(16, 2, 5);
  const auto params = DlgpdParams<float>::initialize(nets::NetArch::tiny(), 1.0, -10.0, rng);
  const NormStats norm = compute_norm_stats(params, rs);
  const EncodedEvidence a = encode_evidence(params, norm, rs, 77);
  const EncodedEvidence b = encode_evidence(params, norm, rs, 77);
  const EncodedEvidence c = encode_evidence(params, norm, rs, 78);
  ASSERT_EQ(a.size(), 10);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_NE(a.inputs, c.inputs);
  // Consecutive transitions share the sample of their common observation.
  EXPECT_EQ(a.next_states.row(0), a.inputs.row(1).head(3));
  EXPECT_EQ(a.inputs(1, 3), rs[0].transition_action(1));
  EXPECT_EQ(a.rewards(4), rs[0].transition_reward(4));
}

TEST(Conditioning, PredictionsFinite) {
  Rng rng(17);
  const auto rs = tiny_rollouts(17, 2, 5);
  const auto params = DlgpdParams<float>::initialize(nets::NetArch::tiny(), 1.0, -10.0, rng);
  const NormStats norm = compute_norm_stats(params, rs);
  const ConditionedModel m = condition(params, norm, rs, 1);
  const auto p = m.predict_next(Latent(0.1, 0.2, 0.3), 0.5);
  EXPECT_TRUE(p.mean.allFinite());
  EXPECT_GT(p.variance.minCoeff(), 0.0);
  EXPECT_TRUE(std::isfinite(m.predict_reward_mean(Latent::Zero(), 0.0)));
  EXPECT_EQ(m.decode(Latent::Zero()).size(), std::size_t{6 * 8 * 8});
}

}  // namespace
}  // namespace dlgpd::model
