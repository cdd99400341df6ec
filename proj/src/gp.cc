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

#include "dlgpd/gp.h"

#include <cmath>
#include <numbers>
#include <string>

namespace dlgpd::gp {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void require_finite_matrix(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    fail(ErrorKind::kInvalidArgument, std::string("non-finite ") + what);
  }
}

void validate_hyperparams(const RbfHyperparams& hp, int input_dim) {
  require(hp.lengthscales.size() == input_dim,
          "lengthscale count does not match input dimension");
  require((hp.lengthscales.array() > 0.0).all(), "lengthscales must be positive");
  require(hp.outputscale_sq > 0.0 && hp.noise_var > 0.0,
          "outputscale and noise must be positive");
}

// exp(-0.5 * squared scaled distance) without the outputscale.
Eigen::MatrixXd unit_rbf(const Eigen::MatrixXd& X, const Eigen::MatrixXd& X2,
                         const Eigen::VectorXd& lengthscales) {
  const Eigen::RowVectorXd inv_l = lengthscales.cwiseInverse().transpose();
  const Eigen::MatrixXd A = X.array().rowwise() * inv_l.array();
  const Eigen::MatrixXd B = X2.array().rowwise() * inv_l.array();
  Eigen::MatrixXd E(X.rows(), X2.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      E(i, j) = std::exp(-0.5 * (A.row(i) - B.row(j)).squaredNorm());
    }
  }
  return E;
}

}  // namespace

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  require(y > 0.0, "softplus_inverse needs a positive argument");
  if (y > 30.0) return y;
  return y + std::log(-std::expm1(-y));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::VectorXd RawHyperparams::pack() const {
  Eigen::VectorXd v(size());
  v.head(raw_lengthscales.size()) = raw_lengthscales;
  v(raw_lengthscales.size()) = raw_outputscale;
  v(raw_lengthscales.size() + 1) = raw_noise;
  return v;
}

RawHyperparams RawHyperparams::unpack(const Eigen::VectorXd& v, int input_dim) {
  require(v.size() == input_dim + 2, "raw hyperparameter vector has wrong size");
  RawHyperparams raw;
  raw.raw_lengthscales = v.head(input_dim);
  raw.raw_outputscale = v(input_dim);
  raw.raw_noise = v(input_dim + 1);
  return raw;
}

RbfHyperparams constrain(const RawHyperparams& raw) {
  RbfHyperparams hp;
  hp.lengthscales = raw.raw_lengthscales.unaryExpr([](double x) { return softplus(x); });
  hp.outputscale_sq = kMinOutputscaleSq + softplus(raw.raw_outputscale);
  hp.noise_var = kMinNoiseRatio * hp.outputscale_sq + softplus(raw.raw_noise);
  return hp;
}

RawHyperparams unconstrain(const RbfHyperparams& hp) {
  require(hp.outputscale_sq > kMinOutputscaleSq,
          "outputscale below its lower bound");
  require(hp.noise_var > kMinNoiseRatio * hp.outputscale_sq,
          "noise variance below its lower bound");
  RawHyperparams raw;
  raw.raw_lengthscales =
      hp.lengthscales.unaryExpr([](double y) { return softplus_inverse(y); });
  raw.raw_outputscale = softplus_inverse(hp.outputscale_sq - kMinOutputscaleSq);
  raw.raw_noise = softplus_inverse(hp.noise_var - kMinNoiseRatio * hp.outputscale_sq);
  return raw;
}

HyperGradient HyperGradient::zero(int input_dim) {
  HyperGradient g;
  g.lengthscales = Eigen::VectorXd::Zero(input_dim);
  return g;
}

HyperGradient& HyperGradient::operator+=(const HyperGradient& o) {
  lengthscales += o.lengthscales;
  outputscale_sq += o.outputscale_sq;
  noise_var += o.noise_var;
  return *this;
}

Eigen::VectorXd raw_gradient(const RawHyperparams& raw, const HyperGradient& g) {
  const int d = static_cast<int>(raw.raw_lengthscales.size());
  Eigen::VectorXd out(d + 2);
  for (int i = 0; i < d; ++i) {
    out(i) = g.lengthscales(i) * sigmoid(raw.raw_lengthscales(i));
  }
  out(d) = (g.outputscale_sq + kMinNoiseRatio * g.noise_var) *
           sigmoid(raw.raw_outputscale);
  out(d + 1) = g.noise_var * sigmoid(raw.raw_noise);
  return out;
}

Eigen::VectorXd MeanFunction::evaluate(const Eigen::MatrixXd& X) const {
  if (kind_ == Kind::kConstant) return Eigen::VectorXd::Constant(X.rows(), constant_);
  return X.col(index_);
}

void MeanFunction::validate(int input_dim) const {
  if (kind_ == Kind::kIdentityOnState) {
    require(index_ >= 0 && index_ < input_dim,
            "identity mean index outside the input dimension");
  }
}

void GpEvidence::validate() const {
  require(inputs.rows() >= 1, "GP evidence must be nonempty");
  require(inputs.rows() == targets.size(), "GP evidence rows and targets differ");
  require_finite_matrix(inputs, "GP evidence inputs");
  require(targets.allFinite(), "non-finite GP evidence targets");
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& X2,
                              const RbfHyperparams& hp, bool include_noise) {
  require(X.cols() == X2.cols(), "kernel inputs have different dimensions");
  require_finite_matrix(X, "kernel input");
  require_finite_matrix(X2, "kernel input");
  validate_hyperparams(hp, static_cast<int>(X.cols()));
  Eigen::MatrixXd K = hp.outputscale_sq * unit_rbf(X, X2, hp.lengthscales);
  if (include_noise) {
    const Eigen::Index n = std::min(K.rows(), K.cols());
    for (Eigen::Index i = 0; i < n; ++i) K(i, i) += hp.noise_var;
  }
  return K;
}

Factorization factorize(const Eigen::MatrixXd& K) {
  Factorization f;
  f.llt.compute(K);
  if (f.llt.info() == Eigen::Success) return f;
  const double scale = K.diagonal().mean();
  for (double rel = 1e-6; rel <= 1e-2 * (1.0 + 1e-9); rel *= 10.0) {
    f.jitter = rel * scale;
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += f.jitter;
    f.llt.compute(Kj);
    if (f.llt.info() == Eigen::Success) return f;
  }
  fail(ErrorKind::kNumerical,
       "Cholesky factorization failed after maximum jitter (N=" +
           std::to_string(K.rows()) + ")");
}

double mll(const GpEvidence& evidence, const RbfHyperparams& hp,
           const MeanFunction& mean) {
  evidence.validate();
  mean.validate(static_cast<int>(evidence.inputs.cols()));
  const Eigen::MatrixXd K = kernel_matrix(evidence.inputs, evidence.inputs, hp, true);
  const Factorization f = factorize(K);
  const Eigen::VectorXd r = evidence.targets - mean.evaluate(evidence.inputs);
  const Eigen::VectorXd z = f.llt.matrixL().solve(r);
  const double n = static_cast<double>(r.size());
  const double logdet_half =
      f.llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * z.squaredNorm() - logdet_half - 0.5 * n * kLog2Pi;
}

MllGradient mll_with_gradient(const GpEvidence& evidence,
                              const RbfHyperparams& hp,
                              const MeanFunction& mean) {
  evidence.validate();
  const int n = static_cast<int>(evidence.inputs.rows());
  const int d = static_cast<int>(evidence.inputs.cols());
  mean.validate(d);
  validate_hyperparams(hp, d);

  const Eigen::MatrixXd& X = evidence.inputs;
  const Eigen::MatrixXd E = unit_rbf(X, X, hp.lengthscales);
  Eigen::MatrixXd K = hp.outputscale_sq * E;
  K.diagonal().array() += hp.noise_var;
  const Factorization f = factorize(K);

  const Eigen::VectorXd r = evidence.targets - mean.evaluate(X);
  const Eigen::VectorXd z = f.llt.matrixL().solve(r);
  const Eigen::VectorXd a = f.llt.solve(r);
  const double logdet_half = f.llt.matrixLLT().diagonal().array().log().sum();

  MllGradient g;
  g.value = -0.5 * z.squaredNorm() - logdet_half - 0.5 * n * kLog2Pi;

  // dmll/dK = 0.5 (a a^T - K^-1)
  Eigen::MatrixXd W = f.llt.solve(Eigen::MatrixXd::Identity(n, n));
  W = 0.5 * (a * a.transpose() - W);

  const Eigen::MatrixXd M = (W.array() * E.array()).matrix() * hp.outputscale_sq;
  const Eigen::VectorXd row_sum = M.rowwise().sum();

  g.hyper = HyperGradient::zero(d);
  g.hyper.outputscale_sq = (W.array() * E.array()).sum();
  g.hyper.noise_var = W.trace();
  g.inputs.resize(n, d);
  for (int k = 0; k < d; ++k) {
    const double l = hp.lengthscales(k);
    const Eigen::VectorXd xk = X.col(k);
    const Eigen::VectorXd Mx = M * xk;
    const double quad = row_sum.dot(xk.cwiseAbs2()) - xk.dot(Mx);
    g.hyper.lengthscales(k) = 2.0 * quad / (l * l * l);
    g.inputs.col(k) = -2.0 / (l * l) * (row_sum.cwiseProduct(xk) - Mx);
  }
  g.targets = -a;
  if (mean.kind() == MeanFunction::Kind::kIdentityOnState) {
    g.inputs.col(mean.state_index()) += a;
  }
  return g;
}

Posterior::Posterior(GpEvidence evidence, RbfHyperparams hp, MeanFunction mean)
    : evidence_(std::move(evidence)), hp_(std::move(hp)), mean_(mean) {
  evidence_.validate();
  const int d = static_cast<int>(evidence_.inputs.cols());
  mean_.validate(d);
  validate_hyperparams(hp_, d);
  const Eigen::RowVectorXd inv_l = hp_.lengthscales.cwiseInverse().transpose();
  scaled_inputs_ = evidence_.inputs.array().rowwise() * inv_l.array();
  const Eigen::MatrixXd K =
      kernel_matrix(evidence_.inputs, evidence_.inputs, hp_, true);
  Factorization f = factorize(K);
  chol_ = f.llt.matrixL();
  alpha_ = f.llt.solve(evidence_.targets - mean_.evaluate(evidence_.inputs));
}

void Posterior::cross_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                             Eigen::VectorXd* k) const {
  require(x.size() == scaled_inputs_.cols(), "query has wrong input dimension");
  if (!x.allFinite()) fail(ErrorKind::kInvalidArgument, "non-finite GP query");
  const Eigen::RowVectorXd xs =
      x.array() / hp_.lengthscales.transpose().array();
  k->resize(scaled_inputs_.rows());
  for (Eigen::Index j = 0; j < scaled_inputs_.rows(); ++j) {
    (*k)(j) = hp_.outputscale_sq *
              std::exp(-0.5 * (scaled_inputs_.row(j) - xs).squaredNorm());
  }
}

double Posterior::predict_mean(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  Eigen::VectorXd k;
  cross_kernel(x, &k);
  return mean_(x) + k.dot(alpha_);
}

void Posterior::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                        double* mean, double* variance) const {
  Eigen::VectorXd k;
  cross_kernel(x, &k);
  *mean = mean_(x) + k.dot(alpha_);
  chol_.triangularView<Eigen::Lower>().solveInPlace(k);
  *variance = hp_.outputscale_sq + hp_.noise_var - k.squaredNorm();
}

Prediction Posterior::predict(const Eigen::MatrixXd& Xq) const {
  Prediction p;
  p.mean.resize(Xq.rows());
  p.variance.resize(Xq.rows());
  for (Eigen::Index i = 0; i < Xq.rows(); ++i) {
    predict(Xq.row(i), &p.mean(i), &p.variance(i));
  }
  return p;
}

Prediction posterior_predict(const GpEvidence& evidence, const RbfHyperparams& hp,
                             const MeanFunction& mean, const Eigen::MatrixXd& Xq) {
  return Posterior(evidence, hp, mean).predict(Xq);
}

namespace {

double snr_log_ratio(const RbfHyperparams& hp) {
  // log(alpha / sigma) / log(tau)
  return 0.5 * (std::log(hp.outputscale_sq) - std::log(hp.noise_var)) /
         std::log(kSnrTau);
}

}  // namespace

double snr_penalty(std::span<const RbfHyperparams> kernels) {
  double total = 0.0;
  for (const auto& hp : kernels) {
    require(hp.outputscale_sq > 0.0 && hp.noise_var > 0.0,
            "SNR penalty needs positive hyperparameters");
    total += std::pow(snr_log_ratio(hp), kSnrPower);
  }
  return total;
}

HyperGradient snr_penalty_gradient(const RbfHyperparams& hp) {
  HyperGradient g = HyperGradient::zero(static_cast<int>(hp.lengthscales.size()));
  const double t = snr_log_ratio(hp);
  const double dt = kSnrPower * std::pow(t, kSnrPower - 1) * 0.5 / std::log(kSnrTau);
  g.outputscale_sq = dt / hp.outputscale_sq;
  g.noise_var = -dt / hp.noise_var;
  return g;
}

double hyperprior_logdensity(const RbfHyperparams& hp) {
  require(hp.outputscale_sq >= 0.0, "outputscale must be non-negative");
  return std::log(kPriorRate) - kPriorRate * hp.outputscale_sq;
}

HyperGradient hyperprior_gradient(const RbfHyperparams& hp) {
  HyperGradient g = HyperGradient::zero(static_cast<int>(hp.lengthscales.size()));
  g.outputscale_sq = -kPriorRate;
  return g;
}

}  // namespace dlgpd::gp
