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

#ifndef DLGPD_GP_H_
#define DLGPD_GP_H_

#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dlgpd/common.h"

namespace dlgpd::gp {

inline constexpr double kMinOutputscaleSq = 1e-2;
inline constexpr double kMinNoiseRatio = 1e-3;
inline constexpr double kSnrTau = 10.0;
inline constexpr int kSnrPower = 8;
inline constexpr double kPriorRate = 5.0;

// k(x, x') = outputscale_sq * exp(-0.5 * sum_d (x_d - x'_d)^2 / l_d^2)
//            + noise_var * [same index]
struct RbfHyperparams {
  Eigen::VectorXd lengthscales;
  double outputscale_sq = 1.0;
  double noise_var = 0.2;
};

// Unconstrained parameterization optimized during training:
//   l_d          = softplus(raw_lengthscales_d)
//   outputscale  = 1e-2 + softplus(raw_outputscale)
//   noise_var    = 1e-3 * outputscale + softplus(raw_noise)
struct RawHyperparams {
  Eigen::VectorXd raw_lengthscales;
  double raw_outputscale = 0.0;
  double raw_noise = 0.0;

  int size() const { return static_cast<int>(raw_lengthscales.size()) + 2; }
  Eigen::VectorXd pack() const;
  static RawHyperparams unpack(const Eigen::VectorXd& v, int input_dim);
};

double softplus(double x);
double softplus_inverse(double y);
double sigmoid(double x);

RbfHyperparams constrain(const RawHyperparams& raw);
// Inverse of constrain on the feasible region.
RawHyperparams unconstrain(const RbfHyperparams& hp);

// Gradient with respect to the constrained values.
struct HyperGradient {
  Eigen::VectorXd lengthscales;
  double outputscale_sq = 0.0;
  double noise_var = 0.0;

  static HyperGradient zero(int input_dim);
  HyperGradient& operator+=(const HyperGradient& o);
};

// Chain rule through constrain(); returns d/d raw packed like RawHyperparams.
Eigen::VectorXd raw_gradient(const RawHyperparams& raw, const HyperGradient& g);

class MeanFunction {
 public:
  enum class Kind { kIdentityOnState, kConstant };

  static MeanFunction identity_on_state(int state_index) {
    return MeanFunction(Kind::kIdentityOnState, state_index, 0.0);
  }
  static MeanFunction constant(double c) {
    return MeanFunction(Kind::kConstant, -1, c);
  }

  Kind kind() const { return kind_; }
  int state_index() const { return index_; }
  double value() const { return constant_; }

  double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    return kind_ == Kind::kConstant ? constant_ : x(index_);
  }
  Eigen::VectorXd evaluate(const Eigen::MatrixXd& X) const;
  void validate(int input_dim) const;

 private:
  MeanFunction(Kind kind, int index, double c)
      : kind_(kind), index_(index), constant_(c) {}
  Kind kind_;
  int index_;
  double constant_;
};

struct GpEvidence {
  Eigen::MatrixXd inputs;   // N x Din
  Eigen::VectorXd targets;  // N

  void validate() const;
};

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& X2,
                              const RbfHyperparams& hp, bool include_noise);

// Cholesky factorization of K with the escalating jitter schedule
// 1e-6, 1e-5, ..., 1e-2 times mean(diag K).
struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};
Factorization factorize(const Eigen::MatrixXd& K);

double mll(const GpEvidence& evidence, const RbfHyperparams& hp,
           const MeanFunction& mean);

struct MllGradient {
  double value = 0.0;
  HyperGradient hyper;
  Eigen::MatrixXd inputs;   // d mll / d X
  Eigen::VectorXd targets;  // d mll / d y
};

MllGradient mll_with_gradient(const GpEvidence& evidence,
                              const RbfHyperparams& hp,
                              const MeanFunction& mean);

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

// Exact posterior conditioned once on evidence. Immutable after construction;
// each query row is evaluated independently of the others so results do not
// depend on how queries are batched.
class Posterior {
 public:
  Posterior(GpEvidence evidence, RbfHyperparams hp, MeanFunction mean);

  double predict_mean(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  // Predictive variance of a noisy observation at x.
  void predict(const Eigen::Ref<const Eigen::RowVectorXd>& x, double* mean,
               double* variance) const;
  Prediction predict(const Eigen::MatrixXd& Xq) const;

  const GpEvidence& evidence() const { return evidence_; }
  const RbfHyperparams& hyperparams() const { return hp_; }
  const MeanFunction& mean_function() const { return mean_; }
  int size() const { return static_cast<int>(evidence_.targets.size()); }

 private:
  void cross_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                    Eigen::VectorXd* k) const;

  GpEvidence evidence_;
  RbfHyperparams hp_;
  MeanFunction mean_;
  Eigen::MatrixXd scaled_inputs_;  // inputs / lengthscales
  Eigen::MatrixXd chol_;           // lower factor
  Eigen::VectorXd alpha_;
};

Prediction posterior_predict(const GpEvidence& evidence, const RbfHyperparams& hp,
                             const MeanFunction& mean, const Eigen::MatrixXd& Xq);

// sum_k (log(alpha_k / sigma_k) / log 10)^8
double snr_penalty(std::span<const RbfHyperparams> kernels);
HyperGradient snr_penalty_gradient(const RbfHyperparams& hp);

// Gamma(shape 1, rate 5) log-density of the outputscale.
double hyperprior_logdensity(const RbfHyperparams& hp);
HyperGradient hyperprior_gradient(const RbfHyperparams& hp);

}  // namespace dlgpd::gp

#endif  // DLGPD_GP_H_
