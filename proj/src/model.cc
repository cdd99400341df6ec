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

#include "dlgpd/model.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

namespace dlgpd::model {
namespace {

constexpr int kHyperScalars = kGpInputDim + 2;
constexpr int kNumKernels = nets::kLatentDim + 1;

void add_raw(gp::RawHyperparams& acc, const Eigen::VectorXd& v) {
  const int d = static_cast<int>(acc.raw_lengthscales.size());
  acc.raw_lengthscales += v.head(d);
  acc.raw_outputscale += v(d);
  acc.raw_noise += v(d + 1);
}

double* hyper_slot(gp::RawHyperparams& h, int j) {
  const int d = static_cast<int>(h.raw_lengthscales.size());
  if (j < d) return &h.raw_lengthscales(j);
  return j == d ? &h.raw_outputscale : &h.raw_noise;
}

gp::RawHyperparams initial_kernel(double outputscale_sq, double noise_var) {
  gp::RbfHyperparams hp;
  hp.lengthscales = Eigen::VectorXd::Constant(kGpInputDim, gp::softplus(0.0));
  hp.outputscale_sq = outputscale_sq;
  hp.noise_var = noise_var;
  return gp::unconstrain(hp);
}

template <typename T>
gp::RawHyperparams& kernel_ref(DlgpdParams<T>& p, int k) {
  return k < nets::kLatentDim ? p.transition[k] : p.reward;
}
template <typename T>
const gp::RawHyperparams& kernel_ref(const DlgpdParams<T>& p, int k) {
  return k < nets::kLatentDim ? p.transition[k] : p.reward;
}

gp::HyperGradient regularizer_gradient(const gp::RbfHyperparams& hp) {
  gp::HyperGradient g = gp::snr_penalty_gradient(hp);
  const gp::HyperGradient prior = gp::hyperprior_gradient(hp);
  g.lengthscales -= prior.lengthscales;
  g.outputscale_sq -= prior.outputscale_sq;
  g.noise_var -= prior.noise_var;
  return g;
}

template <typename T>
ElboTerms elbo_impl(const TrainBatch& batch, const DlgpdParams<T>& params, Rng& rng,
                    DlgpdParams<T>* grad, const ElboOptions& opts, double scale) {
  batch.validate();
  const int B = batch.size();
  const nets::Encoder<T> encoder(params.arch);
  const nets::Decoder<T> decoder(params.arch);
  require(params.encoder.size() == encoder.num_params() &&
              params.decoder.size() == decoder.num_params(),
          "parameter sizes do not match the architecture");
  require(batch.obs.front().size() == params.arch.image_size,
          "observation size does not match the architecture");

  std::vector<const env::Observation*> ptrs;
  ptrs.reserve(2 * B);
  for (const auto& o : batch.obs) ptrs.push_back(&o);
  for (const auto& o : batch.next_obs) ptrs.push_back(&o);
  const RowMatrixX<T> X = nets::pack_observations<T>(ptrs);

  const bool want_encoder =
      grad && (opts.grad_recon || opts.grad_entropy || opts.grad_transition);
  typename nets::Encoder<T>::Cache ecache;
  const auto enc = encoder.forward(params.encoder, X, 2 * B,
                                   want_encoder ? &ecache : nullptr);

  std::normal_distribution<double> normal;
  Eigen::MatrixXd eps(nets::kLatentDim, 2 * B);
  Eigen::MatrixXd Z(nets::kLatentDim, 2 * B);
  for (int b = 0; b < 2 * B; ++b) {
    for (int d = 0; d < nets::kLatentDim; ++d) {
      eps(d, b) = normal(rng);
      Z(d, b) = static_cast<double>(enc.mean(d, b)) +
                static_cast<double>(enc.stddev(d, b)) * eps(d, b);
    }
  }

  const Normalized n = normalize_latents(Z.leftCols(B), Z.rightCols(B));
  Eigen::MatrixXd gp_inputs(B, kGpInputDim);
  gp_inputs.leftCols(nets::kLatentDim) = n.states.transpose();
  gp_inputs.col(nets::kLatentDim) = batch.actions;

  ElboTerms terms;
  const std::vector<gp::RbfHyperparams> kernels = params.kernels();
  Eigen::MatrixXd d_states = Eigen::MatrixXd::Zero(nets::kLatentDim, B);
  Eigen::MatrixXd d_next = Eigen::MatrixXd::Zero(nets::kLatentDim, B);

  for (int d = 0; d < nets::kLatentDim; ++d) {
    gp::GpEvidence ev{gp_inputs, n.next_states.row(d).transpose()};
    const auto mean = gp::MeanFunction::identity_on_state(d);
    if (grad && opts.grad_transition) {
      const gp::MllGradient g = gp::mll_with_gradient(ev, kernels[d], mean);
      terms.transition += g.value;
      d_states += scale * g.inputs.leftCols(nets::kLatentDim).transpose();
      d_next.row(d) += scale * g.targets.transpose();
      gp::HyperGradient hg = g.hyper;
      hg.lengthscales *= scale;
      hg.outputscale_sq *= scale;
      hg.noise_var *= scale;
      add_raw(grad->transition[d], gp::raw_gradient(params.transition[d], hg));
    } else {
      terms.transition += gp::mll(ev, kernels[d], mean);
    }
  }

  {
    const Eigen::MatrixXd& r_inputs = opts.reward_inputs ? *opts.reward_inputs : gp_inputs;
    require(r_inputs.rows() == B && r_inputs.cols() == kGpInputDim,
            "reward input override has the wrong shape");
    if (opts.reward_inputs_out) *opts.reward_inputs_out = r_inputs;
    // Detached inputs: only the hyperparameters see this term.
    gp::GpEvidence ev{r_inputs, batch.rewards};
    const auto mean = gp::MeanFunction::constant(params.r_min);
    const auto& hp = kernels[nets::kLatentDim];
    if (grad && opts.grad_reward) {
      const gp::MllGradient g = gp::mll_with_gradient(ev, hp, mean);
      terms.reward = g.value;
      gp::HyperGradient hg = g.hyper;
      hg.lengthscales *= scale;
      hg.outputscale_sq *= scale;
      hg.noise_var *= scale;
      add_raw(grad->reward, gp::raw_gradient(params.reward, hg));
    } else {
      terms.reward = gp::mll(ev, hp, mean);
    }
  }

  const bool want_recon = grad && opts.grad_recon;
  typename nets::Decoder<T>::Cache dcache;
  const RowMatrixX<T> z_next = Z.rightCols(B).cast<T>();
  const RowMatrixX<T> P = decoder.forward(params.decoder, z_next,
                                          want_recon ? &dcache : nullptr);
  const Eigen::Index area = params.arch.pixels_per_image();
  const Eigen::Index offset = static_cast<Eigen::Index>(B) * area;
  RowMatrixX<T> d_logits;
  if (want_recon) d_logits.resize(P.rows(), P.cols());
  for (Eigen::Index c = 0; c < P.rows(); ++c) {
    double row_sum = 0.0;
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      const double t = static_cast<double>(X(c, offset + j));
      const double p0 = static_cast<double>(P(c, j));
      const double p = std::clamp(p0, nets::kPixelClamp, 1.0 - nets::kPixelClamp);
      row_sum += t * std::log(p) + (1.0 - t) * std::log1p(-p);
      // Straight-through past the clamp. A saturated pixel on the wrong side
      // would otherwise never receive gradient again.
      if (want_recon) d_logits(c, j) = static_cast<T>(scale * (t - p0));
    }
    terms.recon += row_sum;
  }

  const double entropy_const = 0.5 * nets::kLatentDim * (1.0 + std::log(2.0 * std::numbers::pi));
  terms.entropy = B * entropy_const;
  for (int b = B; b < 2 * B; ++b) {
    for (int d = 0; d < nets::kLatentDim; ++d) {
      terms.entropy += std::log(static_cast<double>(enc.stddev(d, b)));
    }
  }

  if (!want_encoder && !want_recon) return terms;

  Eigen::MatrixXd dZ = Eigen::MatrixXd::Zero(nets::kLatentDim, 2 * B);
  if (opts.grad_transition) {
    Eigen::MatrixXd d_raw_states, d_raw_next;
    normalize_latents_backward(n, d_states, d_next, &d_raw_states, &d_raw_next);
    dZ.leftCols(B) += d_raw_states;
    dZ.rightCols(B) += d_raw_next;
  }
  if (want_recon) {
    const RowMatrixX<T> d_lat =
        decoder.backward_logits(params.decoder, dcache, d_logits, grad->decoder);
    dZ.rightCols(B) += d_lat.template cast<double>();
  }
  if (!want_encoder) return terms;

  RowMatrixX<T> d_mean(nets::kLatentDim, 2 * B);
  RowMatrixX<T> d_std(nets::kLatentDim, 2 * B);
  for (int b = 0; b < 2 * B; ++b) {
    for (int d = 0; d < nets::kLatentDim; ++d) {
      double ds = dZ(d, b) * eps(d, b);
      if (b >= B && opts.grad_entropy) ds += scale / static_cast<double>(enc.stddev(d, b));
      d_mean(d, b) = static_cast<T>(dZ(d, b));
      d_std(d, b) = static_cast<T>(ds);
    }
  }
  encoder.backward(params.encoder, ecache, d_mean, d_std, grad->encoder);
  return terms;
}

}  // namespace

// ---------------------------------------------------------------- params

template <typename T>
DlgpdParams<T> DlgpdParams<T>::initialize(const nets::NetArch& arch,
                                          double reward_variance, double r_min,
                                          Rng& rng) {
  require(std::isfinite(reward_variance) && reward_variance >= 0.0,
          "reward variance must be finite and non-negative");
  DlgpdParams p;
  p.arch = arch;
  const nets::Encoder<T> enc(arch);
  const nets::Decoder<T> dec(arch);
  p.encoder.resize(enc.num_params());
  p.decoder.resize(dec.num_params());
  enc.initialize(p.encoder, rng);
  dec.initialize(p.decoder, rng);
  for (auto& k : p.transition) k = initial_kernel(1.0, 0.2);
  const double a2 = std::max(reward_variance, 2.0 * gp::kMinOutputscaleSq);
  p.reward = initial_kernel(a2, 0.2 * a2);
  p.r_min = r_min;
  return p;
}

template <typename T>
DlgpdParams<T> DlgpdParams<T>::zeros_like() const {
  DlgpdParams z = *this;
  std::fill(z.encoder.begin(), z.encoder.end(), T(0));
  std::fill(z.decoder.begin(), z.decoder.end(), T(0));
  for (int k = 0; k < kNumKernels; ++k) {
    auto& h = kernel_ref(z, k);
    h.raw_lengthscales.setZero();
    h.raw_outputscale = 0.0;
    h.raw_noise = 0.0;
  }
  z.r_min = 0.0;
  return z;
}

template <typename T>
std::vector<gp::RbfHyperparams> DlgpdParams<T>::kernels() const {
  std::vector<gp::RbfHyperparams> out;
  for (int k = 0; k < kNumKernels; ++k) out.push_back(gp::constrain(kernel_ref(*this, k)));
  return out;
}

template <typename T>
std::size_t DlgpdParams<T>::num_scalars() const {
  return encoder.size() + decoder.size() + kNumKernels * kHyperScalars;
}

template <typename T>
double DlgpdParams<T>::get_scalar(std::size_t i) const {
  if (i < encoder.size()) return encoder[i];
  i -= encoder.size();
  if (i < decoder.size()) return decoder[i];
  i -= decoder.size();
  require(i < static_cast<std::size_t>(kNumKernels * kHyperScalars), "scalar index out of range");
  auto& h = const_cast<gp::RawHyperparams&>(kernel_ref(*this, static_cast<int>(i / kHyperScalars)));
  return *hyper_slot(h, static_cast<int>(i % kHyperScalars));
}

template <typename T>
void DlgpdParams<T>::set_scalar(std::size_t i, double v) {
  if (i < encoder.size()) {
    encoder[i] = static_cast<T>(v);
    return;
  }
  i -= encoder.size();
  if (i < decoder.size()) {
    decoder[i] = static_cast<T>(v);
    return;
  }
  i -= decoder.size();
  require(i < static_cast<std::size_t>(kNumKernels * kHyperScalars), "scalar index out of range");
  *hyper_slot(kernel_ref(*this, static_cast<int>(i / kHyperScalars)),
              static_cast<int>(i % kHyperScalars)) = v;
}

template <typename T>
std::string DlgpdParams<T>::scalar_name(std::size_t i) const {
  auto find = [](const nets::ParamLayout& layout, std::size_t j) {
    for (const auto& b : layout.blocks()) {
      if (j >= b.offset && j < b.offset + b.size()) {
        return b.name + "[" + std::to_string(j - b.offset) + "]";
      }
    }
    return std::string("?");
  };
  if (i < encoder.size()) return find(nets::Encoder<T>(arch).layout(), i);
  i -= encoder.size();
  if (i < decoder.size()) return find(nets::Decoder<T>(arch).layout(), i);
  i -= decoder.size();
  const int k = static_cast<int>(i / kHyperScalars);
  const int j = static_cast<int>(i % kHyperScalars);
  const std::string kernel = k < nets::kLatentDim ? "gp.transition" + std::to_string(k) : "gp.reward";
  if (j < kGpInputDim) return kernel + ".raw_lengthscale[" + std::to_string(j) + "]";
  return kernel + (j == kGpInputDim ? ".raw_outputscale" : ".raw_noise");
}

template <typename T>
std::uint64_t DlgpdParams<T>::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  mix(encoder.data(), encoder.size() * sizeof(T));
  mix(decoder.data(), decoder.size() * sizeof(T));
  for (int k = 0; k < kNumKernels; ++k) {
    const auto& r = kernel_ref(*this, k);
    mix(r.raw_lengthscales.data(), r.raw_lengthscales.size() * sizeof(double));
    mix(&r.raw_outputscale, sizeof(double));
    mix(&r.raw_noise, sizeof(double));
  }
  mix(&r_min, sizeof(double));
  return h;
}

template struct DlgpdParams<float>;
template struct DlgpdParams<double>;

// ---------------------------------------------------------------- batches

void TrainBatch::validate() const {
  const std::size_t b = obs.size();
  require(b >= 2, "a batch needs at least two transitions");
  require(next_obs.size() == b && static_cast<std::size_t>(actions.size()) == b &&
              static_cast<std::size_t>(rewards.size()) == b,
          "batch fields are not aligned");
  require(actions.allFinite() && rewards.allFinite(), "non-finite action or reward in batch");
}

TrainBatch make_batch(const data::TransitionSet& data, std::span<const int> indices) {
  TrainBatch b;
  const int n = static_cast<int>(indices.size());
  b.actions.resize(n);
  b.rewards.resize(n);
  b.obs.reserve(n);
  b.next_obs.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int idx = indices[i];
    require(idx >= 0 && idx < data.size(), "transition index out of range");
    const auto& ref = data.ref(idx);
    const env::Rollout& r = data.rollouts()[ref.rollout];
    b.obs.push_back(r.observation(ref.t));
    b.next_obs.push_back(r.observation(ref.t + 1));
    b.actions(i) = data.action(idx);
    b.rewards(i) = data.reward(idx);
  }
  return b;
}

// ---------------------------------------------------------------- normalization

void NormStats::validate() const {
  require(mean.allFinite() && stddev.allFinite() && (stddev.array() > 0.0).all(),
          "normalization stddev must be positive");
}

Normalized normalize_latents(const Eigen::MatrixXd& states,
                             const Eigen::MatrixXd& next_states) {
  require(states.rows() == nets::kLatentDim && next_states.rows() == nets::kLatentDim &&
              states.cols() == next_states.cols(),
          "latent batches must be 3 x B and aligned");
  const Eigen::Index B = states.cols();
  require(B >= 2, "normalization needs at least two samples");
  Normalized n;
  for (int d = 0; d < nets::kLatentDim; ++d) {
    const double mu = (states.row(d).sum() + next_states.row(d).sum()) / (2.0 * B);
    const double var = ((states.row(d).array() - mu).square().sum() +
                        (next_states.row(d).array() - mu).square().sum()) /
                       (2.0 * B);
    n.stats.mean(d) = mu;
    n.raw_stddev(d) = std::sqrt(var);
    n.stats.stddev(d) = std::max(n.raw_stddev(d), kNormFloor);
  }
  n.states.resize(nets::kLatentDim, B);
  n.next_states.resize(nets::kLatentDim, B);
  for (int d = 0; d < nets::kLatentDim; ++d) {
    n.states.row(d) = (states.row(d).array() - n.stats.mean(d)) / n.stats.stddev(d);
    n.next_states.row(d) = (next_states.row(d).array() - n.stats.mean(d)) / n.stats.stddev(d);
  }
  return n;
}

void normalize_latents_backward(const Normalized& n, const Eigen::MatrixXd& d_states,
                                const Eigen::MatrixXd& d_next_states,
                                Eigen::MatrixXd* d_raw_states,
                                Eigen::MatrixXd* d_raw_next_states) {
  const Eigen::Index B = n.states.cols();
  d_raw_states->resize(nets::kLatentDim, B);
  d_raw_next_states->resize(nets::kLatentDim, B);
  const double count = 2.0 * B;
  for (int d = 0; d < nets::kLatentDim; ++d) {
    const double sd = n.stats.stddev(d);
    const double g_mean = (d_states.row(d).sum() + d_next_states.row(d).sum()) / count;
    double g_dot = 0.0;
    if (n.raw_stddev(d) >= kNormFloor) {
      g_dot = (d_states.row(d).dot(n.states.row(d)) +
               d_next_states.row(d).dot(n.next_states.row(d))) /
              count;
    }
    d_raw_states->row(d) =
        (d_states.row(d).array() - g_mean - n.states.row(d).array() * g_dot) / sd;
    d_raw_next_states->row(d) =
        (d_next_states.row(d).array() - g_mean - n.next_states.row(d).array() * g_dot) / sd;
  }
}

// ---------------------------------------------------------------- objective

template <typename T>
ElboTerms elbo(const TrainBatch& batch, const DlgpdParams<T>& params, Rng& rng,
               std::type_identity_t<DlgpdParams<T>>* grad, const ElboOptions& options) {
  return elbo_impl(batch, params, rng, grad, options, 1.0);
}

template <typename T>
LossParts training_loss(const TrainBatch& batch, const DlgpdParams<T>& params, Rng& rng,
                        std::type_identity_t<DlgpdParams<T>>* grad,
                        const ElboOptions& options) {
  LossParts parts;
  parts.terms = elbo_impl(batch, params, rng, grad, options, -1.0);
  const std::vector<gp::RbfHyperparams> kernels = params.kernels();
  parts.snr = gp::snr_penalty(kernels);
  for (const auto& hp : kernels) parts.log_prior += gp::hyperprior_logdensity(hp);
  parts.loss = -parts.terms.total() + parts.snr - parts.log_prior;
  if (grad) {
    for (int k = 0; k < kNumKernels; ++k) {
      add_raw(kernel_ref(*grad, k),
              gp::raw_gradient(kernel_ref(params, k), regularizer_gradient(kernels[k])));
    }
  }
  return parts;
}

template ElboTerms elbo<float>(const TrainBatch&, const DlgpdParams<float>&, Rng&,
                               DlgpdParams<float>*, const ElboOptions&);
template ElboTerms elbo<double>(const TrainBatch&, const DlgpdParams<double>&, Rng&,
                                DlgpdParams<double>*, const ElboOptions&);
template LossParts training_loss<float>(const TrainBatch&, const DlgpdParams<float>&, Rng&,
                                        DlgpdParams<float>*, const ElboOptions&);
template LossParts training_loss<double>(const TrainBatch&, const DlgpdParams<double>&, Rng&,
                                         DlgpdParams<double>*, const ElboOptions&);

// ---------------------------------------------------------------- encodings

std::vector<nets::LatentGaussian> encode_rollouts(const DlgpdParams<float>& params,
                                                  const std::vector<env::Rollout>& rollouts) {
  const nets::Encoder<float> encoder(params.arch);
  std::vector<env::Observation> obs;
  std::vector<nets::LatentGaussian> out;
  constexpr int kChunk = 64;
  auto flush = [&] {
    if (obs.empty()) return;
    std::vector<const env::Observation*> ptrs;
    for (const auto& o : obs) ptrs.push_back(&o);
    const auto enc = nets::encode_batch(ptrs, encoder, params.encoder);
    out.insert(out.end(), enc.begin(), enc.end());
    obs.clear();
  };
  for (const auto& r : rollouts) {
    for (int k = 0; k < r.num_observations(); ++k) {
      obs.push_back(r.observation(k));
      if (static_cast<int>(obs.size()) == kChunk) flush();
    }
  }
  flush();
  return out;
}

NormStats compute_norm_stats(const DlgpdParams<float>& params,
                             const std::vector<env::Rollout>& rollouts) {
  require(!rollouts.empty(), "no rollouts to compute normalization statistics from");
  const auto enc = encode_rollouts(params, rollouts);
  require(enc.size() >= 2, "need at least two observations for normalization statistics");
  NormStats s;
  Latent sum = Latent::Zero();
  for (const auto& e : enc) sum += e.mean;
  s.mean = sum / static_cast<double>(enc.size());
  Latent sq = Latent::Zero();
  for (const auto& e : enc) sq += (e.mean - s.mean).cwiseAbs2();
  s.stddev = (sq / static_cast<double>(enc.size())).cwiseSqrt().cwiseMax(kNormFloor);
  return s;
}

// ---------------------------------------------------------------- optimizer

template <typename T>
Adam<T>::Adam(const DlgpdParams<T>& like, Config config)
    : config_(config), m_(like.num_scalars(), 0.0), v_(like.num_scalars(), 0.0) {
  require(config_.lr > 0.0 && config_.beta1 >= 0.0 && config_.beta1 < 1.0 &&
              config_.beta2 >= 0.0 && config_.beta2 < 1.0 && config_.eps > 0.0,
          "invalid Adam settings");
}

template <typename T>
void Adam<T>::step(DlgpdParams<T>& params, const DlgpdParams<T>& grad) {
  require(params.num_scalars() == m_.size() && grad.num_scalars() == m_.size(),
          "optimizer state does not match the parameters");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto update = [&](std::size_t i, double p, double g) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    return p - config_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.eps);
  };
  std::size_t i = 0;
  for (std::size_t j = 0; j < params.encoder.size(); ++j, ++i) {
    params.encoder[j] = static_cast<T>(update(i, params.encoder[j], grad.encoder[j]));
  }
  for (std::size_t j = 0; j < params.decoder.size(); ++j, ++i) {
    params.decoder[j] = static_cast<T>(update(i, params.decoder[j], grad.decoder[j]));
  }
  for (int k = 0; k < kNumKernels; ++k) {
    auto& h = kernel_ref(params, k);
    auto& g = const_cast<gp::RawHyperparams&>(kernel_ref(grad, k));
    for (int j = 0; j < kHyperScalars; ++j, ++i) {
      *hyper_slot(h, j) = update(i, *hyper_slot(h, j), *hyper_slot(g, j));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
  require(epochs >= 1, "epochs must be positive");
  require(batch_size >= 2, "batch size must be at least 2");
  require(checkpoint_every >= 0, "checkpoint cadence must be non-negative");
  arch.validate();
}

namespace {

std::vector<std::vector<int>> epoch_batches(int n, int batch_size, std::uint64_t seed,
                                            int epoch) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = make_stream(seed, 2u, static_cast<std::uint32_t>(epoch));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<int>> out;
  for (int s = 0; s < n; s += batch_size) {
    out.emplace_back(perm.begin() + s, perm.begin() + std::min(n, s + batch_size));
  }
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back().front());
    out.pop_back();
  }
  return out;
}

}  // namespace

TrainResult train(const data::TransitionSet& data, const TrainConfig& config,
                  const TrainCallbacks& callbacks) {
  config.validate();
  const int n = data.size();
  require(n >= 2, "training needs at least two transitions");

  const auto first = epoch_batches(n, config.batch_size, config.seed, 1).front();
  double mean_r = 0.0;
  for (int i : first) mean_r += data.reward(i);
  mean_r /= first.size();
  double var_r = 0.0;
  for (int i : first) var_r += (data.reward(i) - mean_r) * (data.reward(i) - mean_r);
  var_r /= first.size();

  Rng init_rng = make_stream(config.seed, 1u);
  TrainResult result;
  result.params =
      DlgpdParams<float>::initialize(config.arch, var_r, data.min_reward(), init_rng);
  DlgpdParams<float>& params = result.params;
  Adam<float> adam(params, config.adam);

  int last_checkpoint = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto batches = epoch_batches(n, config.batch_size, config.seed, epoch);
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const TrainBatch batch = make_batch(data, batches[b]);
      Rng noise = make_stream(config.seed, 3u, static_cast<std::uint32_t>(epoch),
                              static_cast<std::uint32_t>(b));
      DlgpdParams<float> grad = params.zeros_like();
      const LossParts parts = training_loss(batch, params, noise, &grad);
      if (!std::isfinite(parts.loss)) {
        fail(ErrorKind::kNumerical,
             "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                 std::to_string(b) + ": recon=" + std::to_string(parts.terms.recon) +
                 " entropy=" + std::to_string(parts.terms.entropy) +
                 " transition=" + std::to_string(parts.terms.transition) +
                 " reward=" + std::to_string(parts.terms.reward) +
                 " snr=" + std::to_string(parts.snr));
      }
      adam.step(params, grad);
      log.loss += parts.loss;
      log.terms.recon += parts.terms.recon;
      log.terms.entropy += parts.terms.entropy;
      log.terms.transition += parts.terms.transition;
      log.terms.reward += parts.terms.reward;
      log.snr += parts.snr;
      log.log_prior += parts.log_prior;
    }
    log.loss /= n;
    log.terms.recon /= n;
    log.terms.entropy /= n;
    log.terms.transition /= n;
    log.terms.reward /= n;
    log.elbo = log.terms.total();
    log.snr /= batches.size();
    log.log_prior /= batches.size();
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);
    if (callbacks.on_epoch) callbacks.on_epoch(log);
    if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 &&
        callbacks.on_checkpoint) {
      callbacks.on_checkpoint(epoch, params);
      last_checkpoint = epoch;
    }
  }
  if (callbacks.on_checkpoint && last_checkpoint != config.epochs) {
    callbacks.on_checkpoint(config.epochs, params);
  }
  return result;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr char kCkptMagic[8] = {'D', 'L', 'G', 'P', 'D', 'C', 'K', 'P'};
constexpr std::uint32_t kCkptVersion = 1;

nlohmann::json raw_to_json(const gp::RawHyperparams& r) {
  return {{"raw_lengthscales",
           std::vector<double>(r.raw_lengthscales.data(),
                               r.raw_lengthscales.data() + r.raw_lengthscales.size())},
          {"raw_outputscale", r.raw_outputscale},
          {"raw_noise", r.raw_noise}};
}

gp::RawHyperparams raw_from_json(const nlohmann::json& j) {
  gp::RawHyperparams r;
  const auto l = j.at("raw_lengthscales").get<std::vector<double>>();
  require(static_cast<int>(l.size()) == kGpInputDim, "checkpoint kernel has wrong input dim");
  r.raw_lengthscales = Eigen::Map<const Eigen::VectorXd>(l.data(), l.size());
  r.raw_outputscale = j.at("raw_outputscale").get<double>();
  r.raw_noise = j.at("raw_noise").get<double>();
  return r;
}

nlohmann::json arch_to_json(const nets::NetArch& a) {
  auto convs = [](const std::vector<nets::ConvSpec>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : v) out.push_back({c.channels, c.kernel, c.stride});
    return out;
  };
  return {{"image_size", a.image_size},       {"in_channels", a.in_channels},
          {"encoder", convs(a.encoder)},      {"decoder_width", a.decoder_width},
          {"decoder", convs(a.decoder)},      {"sigma_offset", a.sigma_offset},
          {"sigma_floor", a.sigma_floor}};
}

nets::NetArch arch_from_json(const nlohmann::json& j) {
  auto convs = [](const nlohmann::json& v) {
    std::vector<nets::ConvSpec> out;
    for (const auto& c : v) out.push_back({c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>()});
    return out;
  };
  nets::NetArch a;
  a.image_size = j.at("image_size").get<int>();
  a.in_channels = j.at("in_channels").get<int>();
  a.encoder = convs(j.at("encoder"));
  a.decoder_width = j.at("decoder_width").get<int>();
  a.decoder = convs(j.at("decoder"));
  a.sigma_offset = j.at("sigma_offset").get<double>();
  a.sigma_floor = j.at("sigma_floor").get<double>();
  a.validate();
  return a;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ckpt.norm.validate();
  nlohmann::json h;
  h["format"] = "dlgpd-checkpoint";
  h["epoch"] = ckpt.epoch;
  h["arch"] = arch_to_json(ckpt.params.arch);
  h["transition"] = nlohmann::json::array();
  for (const auto& k : ckpt.params.transition) h["transition"].push_back(raw_to_json(k));
  h["reward"] = raw_to_json(ckpt.params.reward);
  h["r_min"] = ckpt.params.r_min;
  h["norm"] = {{"mean", {ckpt.norm.mean(0), ckpt.norm.mean(1), ckpt.norm.mean(2)}},
               {"stddev", {ckpt.norm.stddev(0), ckpt.norm.stddev(1), ckpt.norm.stddev(2)}}};
  h["encoder_size"] = ckpt.params.encoder.size();
  h["decoder_size"] = ckpt.params.decoder.size();
  try {
    h["config"] = nlohmann::json::parse(ckpt.config_json);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidArgument, std::string("checkpoint config is not JSON: ") + e.what());
  }
  const std::string header = h.dump();

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorKind::kIo, "cannot write " + tmp.string());
    os.write(kCkptMagic, sizeof(kCkptMagic));
    os.write(reinterpret_cast<const char*>(&kCkptVersion), sizeof(kCkptVersion));
    const std::uint64_t len = header.size();
    os.write(reinterpret_cast<const char*>(&len), sizeof(len));
    os.write(header.data(), static_cast<std::streamsize>(len));
    os.write(reinterpret_cast<const char*>(ckpt.params.encoder.data()),
             static_cast<std::streamsize>(ckpt.params.encoder.size() * sizeof(float)));
    os.write(reinterpret_cast<const char*>(ckpt.params.decoder.data()),
             static_cast<std::streamsize>(ckpt.params.decoder.size() * sizeof(float)));
    if (!os) fail(ErrorKind::kIo, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::kIo, "cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0) {
    fail(ErrorKind::kIo, "not a checkpoint: " + path.string());
  }
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kCkptVersion) fail(ErrorKind::kIo, "unsupported checkpoint version");
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!is || len > (1u << 26)) fail(ErrorKind::kIo, "corrupt checkpoint header");
  std::string header(len, '\0');
  is.read(header.data(), static_cast<std::streamsize>(len));

  Checkpoint c;
  try {
    const auto h = nlohmann::json::parse(header);
    c.epoch = h.at("epoch").get<int>();
    c.params.arch = arch_from_json(h.at("arch"));
    for (int d = 0; d < nets::kLatentDim; ++d) {
      c.params.transition[d] = raw_from_json(h.at("transition").at(d));
    }
    c.params.reward = raw_from_json(h.at("reward"));
    c.params.r_min = h.at("r_min").get<double>();
    for (int d = 0; d < nets::kLatentDim; ++d) {
      c.norm.mean(d) = h.at("norm").at("mean").at(d).get<double>();
      c.norm.stddev(d) = h.at("norm").at("stddev").at(d).get<double>();
    }
    c.params.encoder.resize(h.at("encoder_size").get<std::size_t>());
    c.params.decoder.resize(h.at("decoder_size").get<std::size_t>());
    c.config_json = h.at("config").dump();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kIo, std::string("malformed checkpoint header: ") + e.what());
  }
  c.norm.validate();
  if (c.params.encoder.size() != nets::Encoder<float>(c.params.arch).num_params() ||
      c.params.decoder.size() != nets::Decoder<float>(c.params.arch).num_params()) {
    fail(ErrorKind::kIo, "checkpoint weight sizes do not match its architecture");
  }
  is.read(reinterpret_cast<char*>(c.params.encoder.data()),
          static_cast<std::streamsize>(c.params.encoder.size() * sizeof(float)));
  is.read(reinterpret_cast<char*>(c.params.decoder.data()),
          static_cast<std::streamsize>(c.params.decoder.size() * sizeof(float)));
  if (!is) fail(ErrorKind::kIo, "truncated checkpoint " + path.string());
  return c;
}

// ---------------------------------------------------------------- conditioning

EncodedEvidence encode_evidence(const DlgpdParams<float>& params, const NormStats& norm,
                                const std::vector<env::Rollout>& rollouts,
                                std::uint64_t seed) {
  require(!rollouts.empty(), "evidence needs at least one rollout");
  norm.validate();
  const auto enc = encode_rollouts(params, rollouts);
  int total = 0;
  for (const auto& r : rollouts) total += r.num_transitions();

  EncodedEvidence ev;
  ev.inputs.resize(total, kGpInputDim);
  ev.next_states.resize(total, nets::kLatentDim);
  ev.rewards.resize(total);
  std::normal_distribution<double> normal;
  std::size_t offset = 0;
  int row = 0;
  for (std::size_t r = 0; r < rollouts.size(); ++r) {
    const env::Rollout& ro = rollouts[r];
    std::vector<Latent> samples(ro.num_observations());
    for (int k = 0; k < ro.num_observations(); ++k) {
      Rng rng = make_stream(seed, static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(k));
      Latent z;
      for (int d = 0; d < nets::kLatentDim; ++d) z(d) = normal(rng);
      normal.reset();
      samples[k] = norm.apply(nets::reparam_sample(enc[offset + k], z));
    }
    for (int t = 0; t < ro.num_transitions(); ++t, ++row) {
      ev.inputs.row(row).head(nets::kLatentDim) = samples[t].transpose();
      ev.inputs(row, nets::kLatentDim) = ro.transition_action(t);
      ev.next_states.row(row) = samples[t + 1].transpose();
      ev.rewards(row) = ro.transition_reward(t);
    }
    offset += ro.num_observations();
  }
  return ev;
}

ConditionedModel::ConditionedModel(const DlgpdParams<float>& params, const NormStats& norm,
                                   const EncodedEvidence& transition_evidence,
                                   const EncodedEvidence& reward_evidence)
    : params_(params), norm_(norm), encoder_(params.arch), decoder_(params.arch) {
  norm_.validate();
  require(transition_evidence.size() >= 1 && reward_evidence.size() >= 1,
          "conditioning needs non-empty evidence");
  const auto kernels = params_.kernels();
  for (int d = 0; d < nets::kLatentDim; ++d) {
    transition_[d] = std::make_unique<gp::Posterior>(
        gp::GpEvidence{transition_evidence.inputs, transition_evidence.next_states.col(d)},
        kernels[d], gp::MeanFunction::identity_on_state(d));
  }
  reward_ = std::make_unique<gp::Posterior>(
      gp::GpEvidence{reward_evidence.inputs, reward_evidence.rewards},
      kernels[nets::kLatentDim], gp::MeanFunction::constant(params_.r_min));
}

Latent ConditionedModel::encode_mean(const env::Observation& obs) const {
  return norm_.apply(nets::encode(obs, encoder_, params_.encoder).mean);
}

planner::StatePrediction ConditionedModel::predict_next(const Latent& s, double a) const {
  require(s.allFinite() && std::isfinite(a), "non-finite query");
  Eigen::RowVectorXd x(kGpInputDim);
  x << s.transpose(), a;
  planner::StatePrediction p;
  for (int d = 0; d < nets::kLatentDim; ++d) {
    transition_[d]->predict(x, &p.mean(d), &p.variance(d));
  }
  return p;
}

planner::ScalarPrediction ConditionedModel::predict_reward(const Latent& s, double a) const {
  require(s.allFinite() && std::isfinite(a), "non-finite query");
  Eigen::RowVectorXd x(kGpInputDim);
  x << s.transpose(), a;
  planner::ScalarPrediction p;
  reward_->predict(x, &p.mean, &p.variance);
  return p;
}

double ConditionedModel::predict_reward_mean(const Latent& s, double a) const {
  Eigen::RowVectorXd x(kGpInputDim);
  x << s.transpose(), a;
  return reward_->predict_mean(x);
}

std::vector<float> ConditionedModel::decode(const Latent& s) const {
  return nets::decode(norm_.invert(s), decoder_, params_.decoder);
}

ConditionedModel condition(const DlgpdParams<float>& params, const NormStats& norm,
                           const std::vector<env::Rollout>& rollouts, std::uint64_t seed) {
  const EncodedEvidence ev = encode_evidence(params, norm, rollouts, seed);
  return ConditionedModel(params, norm, ev, ev);
}

ConditionedModel condition(const DlgpdParams<float>& params, const NormStats& norm,
                           const std::vector<env::Rollout>& transition_rollouts,
                           const std::vector<env::Rollout>& reward_rollouts,
                           std::uint64_t seed) {
  const EncodedEvidence tev = encode_evidence(params, norm, transition_rollouts, seed);
  const EncodedEvidence rev = encode_evidence(params, norm, reward_rollouts, seed);
  return ConditionedModel(params, norm, tev, rev);
}

}  // namespace dlgpd::model
