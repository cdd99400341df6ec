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

#include "dlgpd/verify.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <Eigen/LU>

#include "dlgpd/config.h"
#include "dlgpd/dataset.h"
#include "dlgpd/env.h"
#include "dlgpd/experiments.h"
#include "dlgpd/gp.h"
#include "dlgpd/model.h"
#include "dlgpd/nets.h"
#include "dlgpd/planner.h"

namespace dlgpd::verify {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = false;
  std::string detail;
  std::uint64_t digest = 0;
};

class Digest {
 public:
  void add(double v) { mix(&v, sizeof(v)); }
  void add(std::uint64_t v) { mix(&v, sizeof(v)); }
  void add(const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) add(m.data()[i]);
  }
  std::uint64_t value() const { return h_; }

 private:
  void mix(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= b[i];
      h_ *= 1099511628211ull;
    }
  }
  std::uint64_t h_ = 1469598103934665603ull;
};

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

void say(const Options& o, const std::string& msg) {
  if (o.progress) o.progress(msg);
}

// ---------------------------------------------------------------- shared

struct GpProblem {
  gp::GpEvidence evidence;
  gp::RbfHyperparams hp;
  gp::MeanFunction mean = gp::MeanFunction::constant(0.0);
  Eigen::MatrixXd queries;
};

GpProblem random_problem(Rng& rng) {
  std::uniform_int_distribution<int> n_dist(1, 50);
  std::uniform_int_distribution<int> d_dist(1, 4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> ls(0.3, 3.0);
  std::uniform_real_distribution<double> os(0.1, 3.0);
  std::uniform_real_distribution<double> nz(0.01, 0.5);
  GpProblem p;
  const int n = n_dist(rng);
  const int d = d_dist(rng);
  p.evidence.inputs.resize(n, d);
  for (Eigen::Index i = 0; i < p.evidence.inputs.size(); ++i) p.evidence.inputs.data()[i] = u(rng);
  p.evidence.targets.resize(n);
  for (int i = 0; i < n; ++i) p.evidence.targets(i) = u(rng);
  p.hp.lengthscales.resize(d);
  for (int k = 0; k < d; ++k) p.hp.lengthscales(k) = ls(rng);
  p.hp.outputscale_sq = os(rng);
  p.hp.noise_var = nz(rng);
  if (std::bernoulli_distribution(0.5)(rng)) {
    p.mean = gp::MeanFunction::identity_on_state(std::uniform_int_distribution<int>(0, d - 1)(rng));
  } else {
    p.mean = gp::MeanFunction::constant(u(rng));
  }
  p.queries.resize(7, d);
  for (Eigen::Index i = 0; i < p.queries.size(); ++i) p.queries.data()[i] = 1.5 * u(rng);
  return p;
}

// Direct-formula GP: explicit kernel loops, LU inverse and determinant.
struct DenseOracle {
  double mll;
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

double oracle_kernel(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y,
                     const gp::RbfHyperparams& hp) {
  double q = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double t = (x(d) - y(d)) / hp.lengthscales(d);
    q += t * t;
  }
  return hp.outputscale_sq * std::exp(-0.5 * q);
}

double oracle_mean(const gp::MeanFunction& m, const Eigen::RowVectorXd& x) {
  return m.kind() == gp::MeanFunction::Kind::kConstant ? m.value() : x(m.state_index());
}

DenseOracle dense_oracle(const GpProblem& p) {
  const auto& X = p.evidence.inputs;
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      K(i, j) = oracle_kernel(X.row(i), X.row(j), p.hp) + (i == j ? p.hp.noise_var : 0.0);
    }
  }
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) r(i) = p.evidence.targets(i) - oracle_mean(p.mean, X.row(i));
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  const Eigen::MatrixXd Kinv = lu.inverse();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(std::abs(lu.matrixLU()(i, i)));
  DenseOracle o;
  o.mll = -0.5 * r.dot(Kinv * r) - 0.5 * logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
  const Eigen::Index m = p.queries.rows();
  o.mean.resize(m);
  o.variance.resize(m);
  for (Eigen::Index q = 0; q < m; ++q) {
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) k(i) = oracle_kernel(p.queries.row(q), X.row(i), p.hp);
    o.mean(q) = oracle_mean(p.mean, p.queries.row(q)) + k.dot(Kinv * r);
    o.variance(q) = p.hp.outputscale_sq + p.hp.noise_var - k.dot(Kinv * k);
  }
  return o;
}

model::TrainBatch tiny_batch(Rng& rng, int size) {
  env::RenderOptions ro;
  ro.image_size = nets::NetArch::tiny().image_size;
  std::vector<env::Rollout> rs;
  for (int i = 0; i < 2; ++i) {
    rs.push_back(env::collect_rollout({}, env::UniformInit::training(),
                                      env::uniform_random_policy(), size, rng, ro));
  }
  const data::TransitionSet ts(rs);
  std::vector<int> idx(ts.size());
  for (int i = 0; i < ts.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(size);
  return model::make_batch(ts, idx);
}

// ---------------------------------------------------------------- 1

Outcome gp_oracle(std::uint64_t seed) {
  Rng rng = make_stream(seed, 1u);
  double worst = 0.0;
  Digest dg;
  for (int t = 0; t < 100; ++t) {
    const GpProblem p = random_problem(rng);
    const DenseOracle o = dense_oracle(p);
    const double v = gp::mll(p.evidence, p.hp, p.mean);
    const gp::Prediction pr = gp::posterior_predict(p.evidence, p.hp, p.mean, p.queries);
    worst = std::max(worst, std::abs(v - o.mll));
    worst = std::max(worst, (pr.mean - o.mean).cwiseAbs().maxCoeff());
    worst = std::max(worst, (pr.variance - o.variance).cwiseAbs().maxCoeff());
    dg.add(v);
    dg.add(pr.mean);
    dg.add(pr.variance);
  }
  return {worst <= 1e-8, "100 problems, max abs error " + fmt(worst) + " (tol 1e-8)", dg.value()};
}

// ---------------------------------------------------------------- 2

double rel_error(double a, double f) {
  const double m = std::max(std::abs(a), std::abs(f));
  if (std::abs(a - f) <= 1e-9) return 0.0;
  return std::abs(a - f) / m;
}

Outcome gradient_checks(std::uint64_t seed) {
  Rng rng = make_stream(seed, 2u);
  Digest dg;

  // (a) every raw hyperparameter of random GP problems.
  double worst_gp = 0.0;
  int gp_checked = 0;
  while (gp_checked < 100) {
    GpProblem p = random_problem(rng);
    const gp::RawHyperparams raw = gp::unconstrain(p.hp);
    auto objective = [&](const gp::RawHyperparams& r) {
      const gp::RbfHyperparams hp = gp::constrain(r);
      const gp::RbfHyperparams one[] = {hp};
      return gp::mll(p.evidence, hp, p.mean) + gp::snr_penalty(one) +
             gp::hyperprior_logdensity(hp);
    };
    const gp::RbfHyperparams hp = gp::constrain(raw);
    gp::HyperGradient g = gp::mll_with_gradient(p.evidence, hp, p.mean).hyper;
    g += gp::snr_penalty_gradient(hp);
    g += gp::hyperprior_gradient(hp);
    const Eigen::VectorXd analytic = gp::raw_gradient(raw, g);
    const Eigen::VectorXd packed = raw.pack();
    const int din = static_cast<int>(p.hp.lengthscales.size());
    for (int i = 0; i < packed.size(); ++i) {
      const double h = 1e-6;
      Eigen::VectorXd plus = packed, minus = packed;
      plus(i) += h;
      minus(i) -= h;
      const double fd = (objective(gp::RawHyperparams::unpack(plus, din)) -
                         objective(gp::RawHyperparams::unpack(minus, din))) /
                        (2.0 * h);
      worst_gp = std::max(worst_gp, rel_error(analytic(i), fd));
      dg.add(analytic(i));
      ++gp_checked;
    }
  }

  // (b) the full loss on the tiny model. Reward-GP inputs are frozen so the
  // finite differences see the same gradient stop as the analytic pass.
  const model::TrainBatch batch = tiny_batch(rng, 4);
  auto params = model::DlgpdParams<double>::initialize(nets::NetArch::tiny(), 1.0,
                                                       batch.rewards.minCoeff(), rng);
  Eigen::MatrixXd reward_inputs;
  model::ElboOptions record;
  record.reward_inputs_out = &reward_inputs;
  auto grad = params.zeros_like();
  const std::uint64_t noise_seed = make_stream(seed, 22u)();
  {
    Rng noise(noise_seed);
    model::training_loss(batch, params, noise, &grad, record);
  }
  model::ElboOptions frozen;
  frozen.reward_inputs = &reward_inputs;
  auto loss_at = [&](std::size_t i, double v) {
    auto q = params;
    q.set_scalar(i, v);
    Rng noise(noise_seed);
    return model::training_loss(batch, q, noise, nullptr, frozen).loss;
  };
  const std::size_t n = params.num_scalars();
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  double worst_net = 0.0;
  std::string worst_name;
  constexpr int kSamples = 120;
  for (int s = 0; s < kSamples; ++s) {
    // The 24 GP scalars at the end are always included.
    const std::size_t i = s < 24 ? n - 1 - s : pick(rng);
    const double v = params.get_scalar(i);
    const double h = 1e-5;
    // Grouped as differences so that a parameter without effect gives 0.
    const double d1 = loss_at(i, v + h) - loss_at(i, v - h);
    const double d2 = loss_at(i, v + 2 * h) - loss_at(i, v - 2 * h);
    const double fd = (8 * d1 - d2) / (12 * h);
    const double e = rel_error(grad.get_scalar(i), fd);
    if (e > worst_net) {
      worst_net = e;
      worst_name = params.scalar_name(i);
    }
    dg.add(grad.get_scalar(i));
  }
  const bool ok = worst_gp < 1e-4 && worst_net < 1e-4;
  return {ok,
          "(a) " + std::to_string(gp_checked) + " GP hyperparameters, max rel err " +
              fmt(worst_gp) + "; (b) " + std::to_string(kSamples) +
              " loss parameters, max rel err " + fmt(worst_net) +
              (worst_name.empty() ? "" : " at " + worst_name) + " (tol 1e-4)",
          dg.value()};
}

// ---------------------------------------------------------------- 3

Outcome closed_forms(std::uint64_t seed) {
  Rng rng = make_stream(seed, 3u);
  Digest dg;
  std::vector<std::string> failures;
  const double c = 1.5 * (1.0 + std::log(2.0 * std::numbers::pi));

  nets::LatentGaussian unit;
  const double h = nets::diag_gaussian_entropy(unit);
  if (std::abs(h - c) > 1e-12) failures.push_back("entropy " + fmt(h, 17));

  std::vector<gp::RbfHyperparams> kernels(4);
  for (auto& k : kernels) {
    k.lengthscales = Eigen::VectorXd::Ones(4);
    k.outputscale_sq = 2.0;
    k.noise_var = 0.02;  // alpha / sigma = 10
  }
  const double snr = gp::snr_penalty(kernels);
  if (std::abs(snr - 4.0) > 1e-12) failures.push_back("snr " + fmt(snr, 17));

  // Loss composition, and the entropy term at sigma = 1 on every item.
  const model::TrainBatch batch = tiny_batch(rng, 5);
  auto params = model::DlgpdParams<double>::initialize(nets::NetArch::tiny(), 1.0,
                                                       batch.rewards.minCoeff(), rng);
  const nets::Encoder<double> enc(params.arch);
  const auto& blocks = enc.layout().blocks();
  const double b = gp::softplus_inverse(1.0 - params.arch.sigma_floor) - params.arch.sigma_offset;
  for (const auto& blk : blocks) {
    if (blk.name == "enc.std.w") std::fill_n(params.encoder.begin() + blk.offset, blk.size(), 0.0);
    if (blk.name == "enc.std.b") std::fill_n(params.encoder.begin() + blk.offset, blk.size(), b);
  }
  Eigen::MatrixXd reward_inputs;
  model::ElboOptions opts;
  opts.reward_inputs_out = &reward_inputs;
  Rng noise(7);
  const model::LossParts parts = model::training_loss(batch, params, noise, nullptr, opts);
  const double expected_entropy = batch.size() * c;
  if (std::abs(parts.terms.entropy - expected_entropy) > 1e-9) {
    failures.push_back("entropy term " + fmt(parts.terms.entropy, 17));
  }
  const auto ks = params.kernels();
  double prior = 0.0;
  for (const auto& k : ks) prior += gp::hyperprior_logdensity(k);
  const double assembled = -(parts.terms.recon + parts.terms.entropy + parts.terms.transition +
                             parts.terms.reward) +
                           gp::snr_penalty(ks) - prior;
  if (assembled != parts.loss) failures.push_back("loss composition");
  const double reward_direct =
      gp::mll({reward_inputs, batch.rewards}, ks[3], gp::MeanFunction::constant(params.r_min));
  if (reward_direct != parts.terms.reward) failures.push_back("reward term vs gp mll");

  dg.add(h);
  dg.add(snr);
  dg.add(parts.loss);
  std::string detail = "entropy(sigma=1) " + fmt(h, 12) + ", snr(alpha/sigma=10, 4 kernels) " +
                       fmt(snr, 12) + ", loss = -elbo + snr - log prior exactly";
  for (const auto& f : failures) detail += "; FAILED " + f;
  return {failures.empty(), detail, dg.value()};
}

// ---------------------------------------------------------------- 4

Outcome gradient_stop(std::uint64_t seed) {
  Rng rng = make_stream(seed, 4u);
  Digest dg;
  model::ElboOptions only_reward;
  only_reward.grad_recon = false;
  only_reward.grad_entropy = false;
  only_reward.grad_transition = false;
  int checked = 0;
  bool zero = true;
  bool hyper_active = true;
  for (int t = 0; t < 5; ++t) {
    const model::TrainBatch batch = tiny_batch(rng, 4 + t);
    auto params = model::DlgpdParams<double>::initialize(nets::NetArch::tiny(), 0.5,
                                                         batch.rewards.minCoeff(), rng);
    auto grad = params.zeros_like();
    Rng noise = make_stream(seed, 44u, static_cast<std::uint32_t>(t));
    model::elbo(batch, params, noise, &grad, only_reward);
    for (double g : grad.encoder) {
      zero = zero && g == 0.0;
      ++checked;
    }
    hyper_active = hyper_active && grad.reward.raw_outputscale != 0.0;
    dg.add(grad.reward.raw_outputscale);
  }
  {
    // The same contract on the full-size float networks.
    Rng data_rng = make_stream(seed, 45u);
    std::vector<env::Rollout> rs{env::collect_rollout({}, env::UniformInit::training(),
                                                      env::uniform_random_policy(), 6, data_rng)};
    const data::TransitionSet ts(rs);
    std::vector<int> idx{0, 1, 2, 3, 4, 5};
    const auto batch = model::make_batch(ts, idx);
    auto params = model::DlgpdParams<float>::initialize(nets::NetArch::standard(), 0.5,
                                                        ts.min_reward(), data_rng);
    auto grad = params.zeros_like();
    model::elbo(batch, params, data_rng, &grad, only_reward);
    for (float g : grad.encoder) {
      zero = zero && g == 0.0f;
      ++checked;
    }
    hyper_active = hyper_active && grad.reward.raw_outputscale != 0.0;
  }
  return {zero && hyper_active,
          std::to_string(checked) + " encoder gradient entries of the reward term, " +
              (zero ? "all exactly zero" : "NONZERO ENTRIES") +
              (hyper_active ? "; reward hyperparameters still receive gradient"
                            : "; reward hyperparameter gradient missing"),
          dg.value()};
}

// ---------------------------------------------------------------- 5

Outcome transfer_symmetry(std::uint64_t seed) {
  Rng rng = make_stream(seed, 5u);
  const env::PendulumParams base;
  const env::PendulumParams inverted =
      env::make_variant(base, env::Variant::inverted_action());
  std::vector<env::Rollout> original, flipped;
  for (int i = 0; i < 3; ++i) {
    env::Rollout r = env::collect_rollout(base, env::UniformInit::training(),
                                          env::uniform_random_policy(), 28, rng);
    // Replaying the negated actions in the inverted environment reproduces
    // the same motion.
    const env::UniformInit same{r.init_state.theta, r.init_state.theta,
                                r.init_state.theta_dot, r.init_state.theta_dot};
    const auto actions = r.actions;
    const env::Policy replay = [&actions](Rng&, const env::PhysicalState&, int k) {
      return -actions[k];
    };
    env::Rollout f = env::collect_rollout(inverted, same, replay, 28, rng);
    if (f.frames != r.frames) return {false, "replayed inverted rollout renders differently", 0};
    original.push_back(std::move(r));
    flipped.push_back(std::move(f));
  }
  auto params = model::DlgpdParams<float>::initialize(nets::NetArch::standard(), 1.0,
                                                      data::TransitionSet(original).min_reward(),
                                                      rng);
  const model::NormStats norm = model::compute_norm_stats(params, original);
  const std::uint64_t ev_seed = make_stream(seed, 55u)();
  const model::ConditionedModel f = model::condition(params, norm, original, ev_seed);
  const model::ConditionedModel g = model::condition(params, norm, flipped, ev_seed);

  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> act(-2.0, 2.0);
  double worst = 0.0;
  Digest dg;
  for (int q = 0; q < 50; ++q) {
    const Latent s(normal(rng), normal(rng), normal(rng));
    const double a = act(rng);
    const auto pg = g.predict_next(s, a);
    const auto pf = f.predict_next(s, -a);
    worst = std::max(worst, (pg.mean - pf.mean).cwiseAbs().maxCoeff());
    worst = std::max(worst, (pg.variance - pf.variance).cwiseAbs().maxCoeff());
    dg.add(pg.mean(0));
    dg.add(pg.variance(2));
  }
  return {worst <= 1e-8,
          "50 queries on 84 evidence points, max |f'(s,a) - f(s,-a)| " + fmt(worst) +
              " (tol 1e-8)",
          dg.value()};
}

// ---------------------------------------------------------------- 6

struct OracleRun {
  int successes = 0;
  std::uint64_t digest = 0;
  std::string returns;
};

OracleRun oracle_episodes(std::uint64_t seed, int episodes, int threads, const Options& o) {
  OracleRun run;
  Digest dg;
  for (int ep = 0; ep < episodes; ++ep) {
    env::Pendulum pendulum;
    const planner::TrueDynamicsModel model(pendulum);
    planner::CemConfig cfg;
    cfg.seed = make_stream(seed, 6u, static_cast<std::uint32_t>(ep))();
    cfg.threads = threads;
    Rng init_rng = make_stream(seed, 66u, static_cast<std::uint32_t>(ep));
    const env::PhysicalState init = env::UniformInit::swing_up().sample(init_rng);
    const planner::Trajectory t = planner::mpc_run(pendulum, init, model, cfg, 150);
    const bool ok = experiments::success(t.rewards);
    run.successes += ok ? 1 : 0;
    for (double a : t.actions) dg.add(a);
    run.returns += (ep ? " " : "") + fmt(t.cumulative_reward(), 4);
    say(o, "oracle episode " + std::to_string(ep) + ": return " + fmt(t.cumulative_reward(), 5) +
               (ok ? " (success)" : " (failure)"));
  }
  run.digest = dg.value();
  return run;
}

Outcome planner_oracle(std::uint64_t seed, const Options& o, double* seconds) {
  const auto t0 = Clock::now();
  const OracleRun run = oracle_episodes(seed, 10, o.threads, o);
  *seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool fast = *seconds < 300.0;
  return {run.successes >= 9 && fast,
          std::to_string(run.successes) + "/10 episodes succeed (need 9), returns [" +
              run.returns + "], " + fmt(*seconds, 4) + " s (limit 300 s)",
          run.digest};
}

// ---------------------------------------------------------------- 7

struct DeskData {
  std::vector<env::Rollout> train;
  std::vector<env::Rollout> heldout;
};

DeskData desk_data(std::uint64_t seed, const std::filesystem::path& work) {
  data::RolloutSetSpec spec;
  spec.variant = env::Variant::original();
  spec.init = env::UniformInit::training();
  spec.length = 28;
  spec.count = 50;
  spec.seed = make_stream(seed, 7u, 1u)();
  data::generate_rollout_set(work / "desk" / "train", spec);
  spec.count = 10;
  spec.seed = make_stream(seed, 7u, 2u)();
  data::generate_rollout_set(work / "desk" / "heldout", spec);
  return {data::load_rollouts(work / "desk" / "train"),
          data::load_rollouts(work / "desk" / "heldout")};
}

model::TrainConfig desk_train_config(std::uint64_t seed, int epochs) {
  model::TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 256;
  tc.seed = make_stream(seed, 7u, 3u)();
  return tc;
}

Outcome learning_smoke(std::uint64_t seed, const Options& o) {
  const auto t0 = Clock::now();
  const DeskData d = desk_data(seed, o.work_dir);
  const data::TransitionSet train(d.train);
  model::TrainCallbacks cb;
  cb.on_epoch = [&](const model::EpochLog& e) {
    if (e.epoch == 1 || e.epoch % 10 == 0) {
      say(o, "desk training epoch " + std::to_string(e.epoch) + "/300 elbo " + fmt(e.elbo, 6) +
                 " (" + fmt(e.seconds, 3) + " s/epoch)");
    }
  };
  const model::TrainResult res = model::train(train, desk_train_config(seed, 300), cb);
  const auto& params = res.params;
  const model::NormStats norm = model::compute_norm_stats(params, d.train);
  {
    model::Checkpoint ckpt{params, norm, "{}", 300};
    model::save_checkpoint(o.work_dir / "desk" / "model.ckpt", ckpt);
  }

  double first = 0.0, last = 0.0;
  for (int i = 0; i < 10; ++i) {
    first += res.log[i].elbo / 10.0;
    last += res.log[res.log.size() - 1 - i].elbo / 10.0;
  }
  const bool trend = last > first + 0.2 * std::abs(first);

  // Held-out reconstruction from mean encodings.
  const nets::Decoder<float> decoder(params.arch);
  const auto enc = model::encode_rollouts(params, d.heldout);
  double bce = 0.0;
  std::size_t count = 0;
  std::size_t i = 0;
  std::vector<Latent> heldout_means;
  for (const auto& r : d.heldout) {
    for (int k = 0; k < r.num_observations(); ++k, ++i) {
      const env::Observation obs = r.observation(k);
      const std::vector<float> p = nets::decode(enc[i].mean, decoder, params.decoder);
      const auto t = obs.data();
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double pj = std::clamp<double>(p[j], nets::kPixelClamp, 1.0 - nets::kPixelClamp);
        bce -= t[j] * std::log(pj) + (1.0 - t[j]) * std::log1p(-pj);
      }
      count += p.size();
      heldout_means.push_back(norm.apply(enc[i].mean));
    }
  }
  bce /= static_cast<double>(count);

  // One-step prediction on held-out transitions versus s' = s.
  const model::ConditionedModel cm =
      model::condition(params, norm, d.train, make_stream(seed, 7u, 4u)());
  double se_gp = 0.0, se_id = 0.0;
  int n = 0;
  std::size_t base = 0;
  for (const auto& r : d.heldout) {
    for (int t = 0; t < r.num_transitions(); ++t) {
      const Latent& s = heldout_means[base + t];
      const Latent& s_next = heldout_means[base + t + 1];
      const Latent pred = cm.predict_next(s, r.transition_action(t)).mean;
      se_gp += (pred - s_next).squaredNorm();
      se_id += (s - s_next).squaredNorm();
      n += 3;
    }
    base += r.num_observations();
  }
  const double rmse_gp = std::sqrt(se_gp / n);
  const double rmse_id = std::sqrt(se_id / n);
  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  Digest dg;
  for (const auto& e : res.log) dg.add(e.loss);
  dg.add(params.hash());
  const bool ok = trend && bce < 0.08 && rmse_gp < rmse_id && seconds < 7200.0;
  return {ok,
          "(a) elbo first10 " + fmt(first, 6) + " -> last10 " + fmt(last, 6) +
              (trend ? " ok" : " FAIL") + "; (b) held-out BCE/pixel " + fmt(bce, 4) +
              (bce < 0.08 ? " ok" : " FAIL") + " (< 0.08); (c) one-step RMSE " +
              fmt(rmse_gp, 4) + " vs identity " + fmt(rmse_id, 4) +
              (rmse_gp < rmse_id ? " ok" : " FAIL") + "; " + fmt(seconds / 60.0, 3) +
              " min (target < 120)",
          dg.value()};
}

// ---------------------------------------------------------------- 8

Outcome full_scale_preset(const Options& o) {
  if (o.preset_config.empty()) return {false, "no preset path given", 0};
  const config::RunConfig c = config::load(o.preset_config, {});
  std::vector<std::string> bad;
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond) bad.push_back(what);
  };
  expect(c.train.adam.lr == 1e-3, "lr");
  expect(c.train.batch_size == 1024, "batch size");
  expect(c.train.epochs == 2000, "epochs");
  expect(c.data.train_rollouts == 500, "training rollouts");
  expect(c.data.pools == 3 && c.data.pool_size == 200, "evidence pools");
  expect(c.data.rollout_len == 28, "rollout length");
  expect(c.planner.horizon == 20 && c.planner.reward_samples == 5, "planner horizon/samples");
  expect(c.planner.action_lo == -2.0 && c.planner.action_hi == 2.0, "action bounds");
  expect(c.eval.episode_len == 150, "episode length");
  expect(c.eval.models * c.eval.pools * c.eval.trials == 27, "27 runs per subset");
  expect(c.eval.subset_sizes.front() == 10 && c.eval.subset_sizes.back() == 200, "subset sweep");
  const auto& v = c.data.variants;
  for (const char* name : {"original", "inverted-action", "mass-0.2", "mass-1.5"}) {
    expect(std::find(v.begin(), v.end(), name) != v.end(), std::string("variant ") + name);
  }
  expect(c.to_json() == config::RunConfig::from_json(config::defaults()).to_json(),
         "preset equals built-in defaults");
  std::string detail = o.preset_config.filename().string() +
                       " loads and encodes the full protocol (launch only; not run here)";
  for (const auto& b : bad) detail += "; MISMATCH " + b;
  return {bad.empty(), detail, 0};
}

// ---------------------------------------------------------------- 9

Outcome determinism(std::uint64_t seed, const Options& o) {
  std::vector<std::string> parts;
  bool ok = true;
  auto twice = [&](const std::string& name, auto&& fn) {
    const std::uint64_t a = fn();
    const std::uint64_t b = fn();
    ok = ok && a == b;
    parts.push_back(name + (a == b ? " same" : " DIFFERENT"));
  };
  twice("1", [&] { return gp_oracle(seed).digest; });
  twice("2", [&] { return gradient_checks(seed).digest; });
  twice("3", [&] { return closed_forms(seed).digest; });
  twice("4", [&] { return gradient_stop(seed).digest; });
  twice("5", [&] { return transfer_symmetry(seed).digest; });
  twice("6 (2 episodes)", [&] { return oracle_episodes(seed, 2, o.threads, o).digest; });
  twice("7 (2 epochs)", [&] {
    const DeskData d = desk_data(seed, o.work_dir);
    const data::TransitionSet train(d.train);
    const auto res = model::train(train, desk_train_config(seed, 2));
    Digest dg;
    for (const auto& e : res.log) dg.add(e.loss);
    dg.add(res.params.hash());
    return dg.value();
  });
  std::string detail = "bitwise reruns:";
  for (const auto& p : parts) detail += " " + p + ";";
  detail.pop_back();
  return {ok, detail, 0};
}

const char* criterion_name(int id) {
  switch (id) {
    case 1: return "gp-oracle";
    case 2: return "gradient-checks";
    case 3: return "closed-forms";
    case 4: return "gradient-stop";
    case 5: return "transfer-symmetry";
    case 6: return "planner-oracle";
    case 7: return "learning-smoke";
    case 8: return "full-scale-preset";
    case 9: return "determinism";
  }
  return "unknown";
}

}  // namespace

std::vector<CriterionResult> run(const Options& options) {
  std::vector<CriterionResult> out;
  std::filesystem::create_directories(options.work_dir);
  for (int id : options.criteria) {
    require(id >= 1 && id <= 9, "acceptance criteria are numbered 1 to 9");
    CriterionResult r;
    r.id = id;
    r.name = criterion_name(id);
    say(options, "running criterion " + std::to_string(id) + " (" + r.name + ")");
    const auto t0 = Clock::now();
    Outcome o;
    try {
      double secs = 0.0;
      switch (id) {
        case 1: o = gp_oracle(options.seed); break;
        case 2: o = gradient_checks(options.seed); break;
        case 3: o = closed_forms(options.seed); break;
        case 4: o = gradient_stop(options.seed); break;
        case 5: o = transfer_symmetry(options.seed); break;
        case 6: o = planner_oracle(options.seed, options, &secs); break;
        case 7: o = learning_smoke(options.seed, options); break;
        case 8: o = full_scale_preset(options); break;
        case 9: o = determinism(options.seed, options); break;
      }
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what(), 0};
    }
    r.passed = o.passed;
    r.detail = o.detail;
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    out.push_back(r);
  }
  return out;
}

std::string format(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.passed ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << ": " << r.detail
     << " (" << std::fixed << std::setprecision(1) << r.seconds << " s)";
  return os.str();
}

}  // namespace dlgpd::verify
