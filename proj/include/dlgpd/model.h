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

#ifndef DLGPD_MODEL_H_
#define DLGPD_MODEL_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "dlgpd/common.h"
#include "dlgpd/dataset.h"
#include "dlgpd/env.h"
#include "dlgpd/gp.h"
#include "dlgpd/nets.h"
#include "dlgpd/planner.h"

namespace dlgpd::model {

// GP inputs are the normalized state followed by the action.
inline constexpr int kGpInputDim = nets::kLatentDim + 1;
inline constexpr double kNormFloor = 1e-6;

// Everything that is trained. Network weights use T; GP hyperparameters are
// always double and unconstrained.
template <typename T>
struct DlgpdParams {
  nets::NetArch arch;
  std::vector<T> encoder;
  std::vector<T> decoder;
  std::array<gp::RawHyperparams, nets::kLatentDim> transition;
  gp::RawHyperparams reward;
  double r_min = 0.0;

  // Transition kernels start at outputscale 1, noise 0.2, unit-ish
  // lengthscales; the reward kernel at outputscale `reward_variance` with
  // noise 0.2 of that.
  static DlgpdParams initialize(const nets::NetArch& arch, double reward_variance,
                                double r_min, Rng& rng);
  // Same shapes, every value zero. Used as a gradient accumulator.
  DlgpdParams zeros_like() const;

  // Constrained kernels: three transition dims, then reward.
  std::vector<gp::RbfHyperparams> kernels() const;

  template <typename U>
  DlgpdParams<U> cast() const {
    DlgpdParams<U> out;
    out.arch = arch;
    out.encoder.assign(encoder.begin(), encoder.end());
    out.decoder.assign(decoder.begin(), decoder.end());
    out.transition = transition;
    out.reward = reward;
    out.r_min = r_min;
    return out;
  }

  // Scalar views used by optimizers and gradient checks. Order: encoder,
  // decoder, transition kernels, reward kernel.
  std::size_t num_scalars() const;
  double get_scalar(std::size_t i) const;
  void set_scalar(std::size_t i, double v);
  std::string scalar_name(std::size_t i) const;

  // FNV-1a over all values; changes whenever any parameter changes.
  std::uint64_t hash() const;
};

// Aligned batch of transitions.
struct TrainBatch {
  std::vector<env::Observation> obs;
  Eigen::VectorXd actions;
  std::vector<env::Observation> next_obs;
  Eigen::VectorXd rewards;

  int size() const { return static_cast<int>(obs.size()); }
  void validate() const;
};

TrainBatch make_batch(const data::TransitionSet& data, std::span<const int> indices);

struct NormStats {
  Latent mean = Latent::Zero();
  Latent stddev = Latent::Ones();

  Latent apply(const Latent& s) const {
    return (s - mean).cwiseQuotient(stddev);
  }
  Latent invert(const Latent& s) const { return s.cwiseProduct(stddev) + mean; }
  void validate() const;
};

struct Normalized {
  Eigen::MatrixXd states;       // 3 x B
  Eigen::MatrixXd next_states;  // 3 x B
  NormStats stats;
  Latent raw_stddev;            // before flooring
};

// Joint per-dimension statistics over the concatenation of S and S'
// (3 x B each), population stddev floored at 1e-6.
Normalized normalize_latents(const Eigen::MatrixXd& states,
                             const Eigen::MatrixXd& next_states);

// Pulls gradients with respect to the normalized outputs back onto the raw
// samples, through the batch statistics.
void normalize_latents_backward(const Normalized& n, const Eigen::MatrixXd& d_states,
                                const Eigen::MatrixXd& d_next_states,
                                Eigen::MatrixXd* d_raw_states,
                                Eigen::MatrixXd* d_raw_next_states);

struct ElboTerms {
  double recon = 0.0;
  double entropy = 0.0;
  double transition = 0.0;
  double reward = 0.0;

  double total() const { return recon + entropy + transition + reward; }
};

struct ElboOptions {
  // Which terms contribute to the gradient. Values are always computed.
  bool grad_recon = true;
  bool grad_entropy = true;
  bool grad_transition = true;
  bool grad_reward = true;
  // When set, the reward GP is evaluated on these B x 4 inputs instead of the
  // batch's own normalized samples.
  const Eigen::MatrixXd* reward_inputs = nullptr;
  // Receives the B x 4 reward-GP inputs that were used.
  Eigen::MatrixXd* reward_inputs_out = nullptr;
};

// Lower bound on one batch with one reparameterized sample per observation.
// If grad is non-null, d(elbo)/d(params) is added to it. The reward term never
// sends gradient into the encoder.
template <typename T>
ElboTerms elbo(const TrainBatch& batch, const DlgpdParams<T>& params, Rng& rng,
               std::type_identity_t<DlgpdParams<T>>* grad = nullptr, const ElboOptions& options = {});

struct LossParts {
  ElboTerms terms;
  double snr = 0.0;
  double log_prior = 0.0;
  double loss = 0.0;  // -elbo + snr - log_prior
};

// If grad is non-null, d(loss)/d(params) is added to it.
template <typename T>
LossParts training_loss(const TrainBatch& batch, const DlgpdParams<T>& params, Rng& rng,
                        std::type_identity_t<DlgpdParams<T>>* grad = nullptr,
                        const ElboOptions& options = {});

// Mean encodings of every observation of the rollouts, in rollout order.
std::vector<nets::LatentGaussian> encode_rollouts(const DlgpdParams<float>& params,
                                                  const std::vector<env::Rollout>& rollouts);

// Test-time statistics from the mean encodings of all training observations.
NormStats compute_norm_stats(const DlgpdParams<float>& params,
                             const std::vector<env::Rollout>& rollouts);

template <typename T>
class Adam {
 public:
  struct Config {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(const DlgpdParams<T>& like, Config config);
  // params -= lr * mhat / (sqrt(vhat) + eps) for every scalar.
  void step(DlgpdParams<T>& params, const DlgpdParams<T>& grad);
  long steps() const { return t_; }

 private:
  Config config_;
  long t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct TrainConfig {
  int epochs = 2000;
  int batch_size = 1024;
  Adam<float>::Config adam;
  // Write a checkpoint every this many epochs; 0 writes only the final one.
  int checkpoint_every = 0;
  std::uint64_t seed = 0;
  nets::NetArch arch;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  // Per-transition means over the epoch.
  double loss = 0.0;
  double elbo = 0.0;
  ElboTerms terms;
  double snr = 0.0;
  double log_prior = 0.0;
  double seconds = 0.0;
};

struct TrainCallbacks {
  std::function<void(const EpochLog&)> on_epoch;
  std::function<void(int epoch, const DlgpdParams<float>&)> on_checkpoint;
};

struct TrainResult {
  DlgpdParams<float> params;
  std::vector<EpochLog> log;
};

// Epochs are ceil(N / B) shuffled batches over all transitions; a trailing
// batch of one transition is merged into the previous batch. Aborts with
// ErrorKind::kNumerical on a non-finite loss.
TrainResult train(const data::TransitionSet& data, const TrainConfig& config,
                  const TrainCallbacks& callbacks = {});

// Checkpoint container: "DLGPDCKP", u32 version, u64 header length, JSON
// header (architecture, GP hyperparameters, norm stats, r_min, block sizes,
// config echo), then the float32 encoder and decoder weights.
struct Checkpoint {
  DlgpdParams<float> params;
  NormStats norm;
  std::string config_json = "{}";
  int epoch = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Normalized reparameterized samples of every observation of the rollouts,
// assembled into GP evidence. Observation k of rollout r uses the stream
// make_stream(seed, r, k), and consecutive transitions share the sample of
// their common observation.
struct EncodedEvidence {
  Eigen::MatrixXd inputs;       // N x 4, (s, a)
  Eigen::MatrixXd next_states;  // N x 3
  Eigen::VectorXd rewards;      // N

  int size() const { return static_cast<int>(inputs.rows()); }
};

EncodedEvidence encode_evidence(const DlgpdParams<float>& params, const NormStats& norm,
                                const std::vector<env::Rollout>& rollouts,
                                std::uint64_t seed);

// Encoder, fixed statistics and the transition/reward posteriors. All
// predictions are in normalized latent space. Immutable and safe for
// concurrent queries.
class ConditionedModel : public planner::LatentModel {
 public:
  ConditionedModel(const DlgpdParams<float>& params, const NormStats& norm,
                   const EncodedEvidence& transition_evidence,
                   const EncodedEvidence& reward_evidence);

  Latent encode_mean(const env::Observation& obs) const override;
  planner::StatePrediction predict_next(const Latent& s, double a) const override;
  planner::ScalarPrediction predict_reward(const Latent& s, double a) const override;
  double predict_reward_mean(const Latent& s, double a) const override;

  // Expected observation for a normalized latent, 6 x H x W planar.
  std::vector<float> decode(const Latent& s) const;

  const NormStats& norm() const { return norm_; }
  const DlgpdParams<float>& params() const { return params_; }
  const gp::Posterior& transition_posterior(int d) const { return *transition_[d]; }
  const gp::Posterior& reward_posterior() const { return *reward_; }

 private:
  DlgpdParams<float> params_;
  NormStats norm_;
  nets::Encoder<float> encoder_;
  nets::Decoder<float> decoder_;
  std::array<std::unique_ptr<gp::Posterior>, nets::kLatentDim> transition_;
  std::unique_ptr<gp::Posterior> reward_;
};

ConditionedModel condition(const DlgpdParams<float>& params, const NormStats& norm,
                           const std::vector<env::Rollout>& rollouts, std::uint64_t seed);
// Separate evidence for the transition and reward GPs.
ConditionedModel condition(const DlgpdParams<float>& params, const NormStats& norm,
                           const std::vector<env::Rollout>& transition_rollouts,
                           const std::vector<env::Rollout>& reward_rollouts,
                           std::uint64_t seed);

}  // namespace dlgpd::model

#endif  // DLGPD_MODEL_H_
