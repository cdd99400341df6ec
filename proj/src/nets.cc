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

#include "dlgpd/nets.h"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dlgpd::nets {
namespace {

template <typename T>
using RowMap = Eigen::Map<RowMatrixX<T>>;
template <typename T>
using ConstRowMap = Eigen::Map<const RowMatrixX<T>>;
template <typename T>
using VecMap = Eigen::Map<VectorX<T>>;
template <typename T>
using ConstVecMap = Eigen::Map<const VectorX<T>>;

template <typename T>
ConstRowMap<T> view(std::span<const T> p, const ParamBlock& b) {
  return ConstRowMap<T>(p.data() + b.offset, b.rows, b.cols);
}
template <typename T>
RowMap<T> view(std::span<T> p, const ParamBlock& b) {
  return RowMap<T>(p.data() + b.offset, b.rows, b.cols);
}
template <typename T>
ConstVecMap<T> bias(std::span<const T> p, const ParamBlock& b) {
  return ConstVecMap<T>(p.data() + b.offset, b.size());
}
template <typename T>
VecMap<T> bias(std::span<T> p, const ParamBlock& b) {
  return VecMap<T>(p.data() + b.offset, b.size());
}

template <typename T>
T softplus(T x) {
  return x > T(20) ? x : std::log1p(std::exp(x));
}
template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Columns processed per GEMM call; bounds the size of the unfolded buffer.
constexpr int kChunkColumns = 8192;

int chunk_samples(int per_sample, int batch) {
  return std::clamp(kChunkColumns / std::max(per_sample, 1), 1, std::max(batch, 1));
}

// Geometry of a valid, square convolution: n_in -> n_out with kernel k and
// stride s. Transposed convolutions reuse it with the roles of the sides
// swapped.
struct Geometry {
  int channels;
  int n_in;
  int n_out;
  int k;
  int s;
};

// Unfolds samples [b0, b0 + nb) of X (channels x B*n_in^2) into
// col (channels*k*k x nb*n_out^2).
template <typename T>
void im2col(const RowMatrixX<T>& X, const Geometry& g, int b0, int nb,
            RowMatrixX<T>& col) {
  const int in_area = g.n_in * g.n_in;
  const int out_area = g.n_out * g.n_out;
  col.resize(static_cast<Eigen::Index>(g.channels) * g.k * g.k,
             static_cast<Eigen::Index>(nb) * out_area);
  for (int c = 0; c < g.channels; ++c) {
    const T* src = X.data() + static_cast<std::size_t>(c) * X.cols();
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        T* dst = col.data() +
                 static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * col.cols();
        for (int b = 0; b < nb; ++b) {
          const T* img = src + static_cast<std::size_t>(b0 + b) * in_area;
          for (int ho = 0; ho < g.n_out; ++ho) {
            const T* row = img + (ho * g.s + ki) * g.n_in + kj;
            T* d = dst + (static_cast<std::size_t>(b) * g.n_out + ho) * g.n_out;
            for (int wo = 0; wo < g.n_out; ++wo) d[wo] = row[wo * g.s];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters col back into samples [b0, b0 + nb) of X.
template <typename T>
void col2im(const RowMatrixX<T>& col, const Geometry& g, int b0, int nb,
            RowMatrixX<T>& X) {
  const int in_area = g.n_in * g.n_in;
  for (int c = 0; c < g.channels; ++c) {
    T* dst_base = X.data() + static_cast<std::size_t>(c) * X.cols();
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        const T* src = col.data() +
                       static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * col.cols();
        for (int b = 0; b < nb; ++b) {
          T* img = dst_base + static_cast<std::size_t>(b0 + b) * in_area;
          for (int ho = 0; ho < g.n_out; ++ho) {
            T* row = img + (ho * g.s + ki) * g.n_in + kj;
            const T* s = src + (static_cast<std::size_t>(b) * g.n_out + ho) * g.n_out;
            for (int wo = 0; wo < g.n_out; ++wo) row[wo * g.s] += s[wo];
          }
        }
      }
    }
  }
}

template <typename T>
void add_bias(RowMatrixX<T>& Y, const ConstVecMap<T>& b) {
  for (Eigen::Index r = 0; r < Y.rows(); ++r) Y.row(r).array() += b(r);
}

template <typename T>
void relu_inplace(RowMatrixX<T>& Y) {
  Y = Y.cwiseMax(T(0));
}

// Y (c_out x B*n_out^2) = relu?(W * unfold(X) + b)
template <typename T>
void conv_forward(const RowMatrixX<T>& X, const ConstRowMap<T>& W,
                  const ConstVecMap<T>& b, const Geometry& g, int batch,
                  RowMatrixX<T>& Y) {
  const int out_area = g.n_out * g.n_out;
  Y.resize(W.rows(), static_cast<Eigen::Index>(batch) * out_area);
  RowMatrixX<T> col;
  const int step = chunk_samples(out_area, batch);
  for (int b0 = 0; b0 < batch; b0 += step) {
    const int nb = std::min(step, batch - b0);
    im2col(X, g, b0, nb, col);
    Y.middleCols(static_cast<Eigen::Index>(b0) * out_area,
                 static_cast<Eigen::Index>(nb) * out_area)
        .noalias() = W * col;
  }
  add_bias(Y, b);
}

template <typename T>
void conv_backward(const RowMatrixX<T>& X, const ConstRowMap<T>& W,
                   const RowMatrixX<T>& dZ, const Geometry& g, int batch,
                   RowMap<T> dW, VecMap<T> db, RowMatrixX<T>* dX) {
  const int out_area = g.n_out * g.n_out;
  db += dZ.rowwise().sum();
  if (dX != nullptr) {
    dX->setZero(X.rows(), X.cols());
  }
  RowMatrixX<T> col, dcol;
  const int step = chunk_samples(out_area, batch);
  for (int b0 = 0; b0 < batch; b0 += step) {
    const int nb = std::min(step, batch - b0);
    im2col(X, g, b0, nb, col);
    const auto dZc = dZ.middleCols(static_cast<Eigen::Index>(b0) * out_area,
                                   static_cast<Eigen::Index>(nb) * out_area);
    dW.noalias() += dZc * col.transpose();
    if (dX != nullptr) {
      dcol.noalias() = W.transpose() * dZc;
      col2im(dcol, g, b0, nb, *dX);
    }
  }
}

// Transposed convolution: X (c_in x B*n^2) -> Y (c_out x B*m^2) with
// m = (n - 1) s + k. conv geometry g describes the adjoint convolution
// (channels = c_out, n_in = m, n_out = n).
template <typename T>
void deconv_forward(const RowMatrixX<T>& X, const ConstRowMap<T>& W,
                    const ConstVecMap<T>& b, const Geometry& g, int batch,
                    RowMatrixX<T>& Y) {
  const int in_area = g.n_out * g.n_out;
  Y.setZero(g.channels, static_cast<Eigen::Index>(batch) * g.n_in * g.n_in);
  RowMatrixX<T> cols;
  const int step = chunk_samples(in_area, batch);
  for (int b0 = 0; b0 < batch; b0 += step) {
    const int nb = std::min(step, batch - b0);
    cols.noalias() = W.transpose() *
                     X.middleCols(static_cast<Eigen::Index>(b0) * in_area,
                                  static_cast<Eigen::Index>(nb) * in_area);
    col2im(cols, g, b0, nb, Y);
  }
  add_bias(Y, b);
}

template <typename T>
void deconv_backward(const RowMatrixX<T>& X, const ConstRowMap<T>& W,
                     const RowMatrixX<T>& dY, const Geometry& g, int batch,
                     RowMap<T> dW, VecMap<T> db, RowMatrixX<T>& dX) {
  const int in_area = g.n_out * g.n_out;
  db += dY.rowwise().sum();
  dX.resize(X.rows(), X.cols());
  RowMatrixX<T> dcol;
  const int step = chunk_samples(in_area, batch);
  for (int b0 = 0; b0 < batch; b0 += step) {
    const int nb = std::min(step, batch - b0);
    im2col(dY, g, b0, nb, dcol);
    const auto Xc = X.middleCols(static_cast<Eigen::Index>(b0) * in_area,
                                 static_cast<Eigen::Index>(nb) * in_area);
    dW.noalias() += Xc * dcol.transpose();
    dX.middleCols(static_cast<Eigen::Index>(b0) * in_area,
                  static_cast<Eigen::Index>(nb) * in_area)
        .noalias() = W * dcol;
  }
}

template <typename T>
void mask_relu(RowMatrixX<T>& grad, const RowMatrixX<T>& activation) {
  grad = (activation.array() > T(0)).select(grad, T(0));
}

template <typename T>
void init_uniform(std::span<T> params, const ParamBlock& block, double fan_in,
                  Rng& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> u(-bound, bound);
  for (std::size_t i = 0; i < block.size(); ++i) {
    params[block.offset + i] = static_cast<T>(u(rng));
  }
}

}  // namespace

NetArch NetArch::tiny() {
  NetArch a;
  a.image_size = 8;
  a.encoder = {{4, 4, 2}, {8, 3, 2}};
  a.decoder_width = 8;
  a.decoder = {{4, 3, 2}, {6, 4, 2}};
  return a;
}

std::vector<int> NetArch::encoder_sizes() const {
  std::vector<int> sizes{image_size};
  for (const auto& c : encoder) {
    const int n = sizes.back();
    sizes.push_back(n < c.kernel ? 0 : (n - c.kernel) / c.stride + 1);
  }
  return sizes;
}

std::vector<int> NetArch::decoder_sizes() const {
  std::vector<int> sizes{1};
  for (const auto& c : decoder) sizes.push_back((sizes.back() - 1) * c.stride + c.kernel);
  return sizes;
}

int NetArch::encoder_features() const {
  const int n = encoder_sizes().back();
  return encoder.empty() ? in_channels * n * n : encoder.back().channels * n * n;
}

void NetArch::validate() const {
  require(image_size > 0 && in_channels > 0, "bad network input shape");
  require(!encoder.empty() && !decoder.empty(), "network needs layers");
  for (const auto& c : encoder) {
    require(c.channels > 0 && c.kernel > 0 && c.stride > 0, "bad encoder layer");
  }
  for (const auto& c : decoder) {
    require(c.channels > 0 && c.kernel > 0 && c.stride > 0, "bad decoder layer");
  }
  for (int n : encoder_sizes()) require(n > 0, "encoder shape chain collapses");
  require(decoder_sizes().back() == image_size,
          "decoder does not reproduce the image size");
  require(decoder.back().channels == in_channels,
          "decoder output channels differ from input channels");
  require(decoder_width > 0, "decoder width must be positive");
  require(sigma_floor > 0.0, "sigma floor must be positive");
}

bool NetArch::operator==(const NetArch& o) const {
  auto same = [](const std::vector<ConvSpec>& a, const std::vector<ConvSpec>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].channels != b[i].channels || a[i].kernel != b[i].kernel ||
          a[i].stride != b[i].stride) {
        return false;
      }
    }
    return true;
  };
  return image_size == o.image_size && in_channels == o.in_channels &&
         same(encoder, o.encoder) && decoder_width == o.decoder_width &&
         same(decoder, o.decoder) && sigma_offset == o.sigma_offset &&
         sigma_floor == o.sigma_floor;
}

const ParamBlock& ParamLayout::add(std::string name, int rows, int cols) {
  ParamBlock b{std::move(name), total_, rows, cols};
  total_ += b.size();
  blocks_.push_back(std::move(b));
  return blocks_.back();
}

template <typename T>
RowMatrixX<T> pack_observations(std::span<const env::Observation* const> batch) {
  require(!batch.empty(), "empty observation batch");
  const int n = batch.front()->size();
  const std::size_t area = static_cast<std::size_t>(n) * n;
  RowMatrixX<T> X(env::kObservationChannels,
                  static_cast<Eigen::Index>(batch.size() * area));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    require(batch[b]->size() == n, "observation size mismatch in batch");
    const auto data = batch[b]->data();
    for (int c = 0; c < env::kObservationChannels; ++c) {
      T* dst = X.data() + c * X.cols() + b * area;
      const float* src = data.data() + c * area;
      for (std::size_t p = 0; p < area; ++p) dst[p] = static_cast<T>(src[p]);
    }
  }
  return X;
}

// ---------------------------------------------------------------- Encoder

template <typename T>
Encoder<T>::Encoder(NetArch arch) : arch_(std::move(arch)) {
  arch_.validate();
  sizes_ = arch_.encoder_sizes();
  int c_in = arch_.in_channels;
  for (std::size_t l = 0; l < arch_.encoder.size(); ++l) {
    const auto& c = arch_.encoder[l];
    layout_.add("enc.conv" + std::to_string(l) + ".w", c.channels,
                c_in * c.kernel * c.kernel);
    layout_.add("enc.conv" + std::to_string(l) + ".b", c.channels, 1);
    c_in = c.channels;
  }
  const int f = arch_.encoder_features();
  layout_.add("enc.mean.w", kLatentDim, f);
  layout_.add("enc.mean.b", kLatentDim, 1);
  layout_.add("enc.std.w", kLatentDim, f);
  layout_.add("enc.std.b", kLatentDim, 1);
}

template <typename T>
void Encoder<T>::initialize(std::span<T> params, Rng& rng) const {
  require(params.size() == num_params(), "encoder parameter size mismatch");
  int c_in = arch_.in_channels;
  for (std::size_t l = 0; l < arch_.encoder.size(); ++l) {
    const auto& c = arch_.encoder[l];
    const double fan_in = static_cast<double>(c_in) * c.kernel * c.kernel;
    init_uniform(params, layout_[2 * l], fan_in, rng);
    init_uniform(params, layout_[2 * l + 1], fan_in, rng);
    c_in = c.channels;
  }
  const std::size_t h = 2 * arch_.encoder.size();
  const double f = arch_.encoder_features();
  for (std::size_t i = 0; i < 4; ++i) init_uniform(params, layout_[h + i], f, rng);
}

template <typename T>
typename Encoder<T>::Output Encoder<T>::forward(std::span<const T> params,
                                                const RowMatrixX<T>& input,
                                                int batch, Cache* cache) const {
  require(params.size() == num_params(), "encoder parameter size mismatch");
  require(input.rows() == arch_.in_channels &&
              input.cols() == static_cast<Eigen::Index>(batch) *
                                  arch_.pixels_per_image(),
          "encoder input has wrong shape");
  Cache local;
  Cache& c = cache ? *cache : local;
  c.batch = batch;
  c.activations.clear();
  c.activations.reserve(arch_.encoder.size() + 1);
  c.activations.push_back(input);

  int c_in = arch_.in_channels;
  for (std::size_t l = 0; l < arch_.encoder.size(); ++l) {
    const auto& spec = arch_.encoder[l];
    const Geometry g{c_in, sizes_[l], sizes_[l + 1], spec.kernel, spec.stride};
    RowMatrixX<T> Y;
    conv_forward(c.activations.back(), view(params, layout_[2 * l]),
                 bias(params, layout_[2 * l + 1]), g, batch, Y);
    relu_inplace(Y);
    c.activations.push_back(std::move(Y));
    c_in = spec.channels;
  }
  if (cache == nullptr) {
    // Only the last activation is needed from here on.
    c.activations.erase(c.activations.begin(), c.activations.end() - 1);
  }

  const RowMatrixX<T>& last = c.activations.back();
  const int area = sizes_.back() * sizes_.back();
  const int f = arch_.encoder_features();
  c.features.resize(f, batch);
  for (int ch = 0; ch < c_in; ++ch) {
    for (int b = 0; b < batch; ++b) {
      for (int p = 0; p < area; ++p) {
        c.features(ch * area + p, b) = last(ch, static_cast<Eigen::Index>(b) * area + p);
      }
    }
  }

  const std::size_t h = 2 * arch_.encoder.size();
  Output out;
  out.mean.noalias() = view(params, layout_[h]) * c.features;
  add_bias(out.mean, bias(params, layout_[h + 1]));
  c.sigma_pre.noalias() = view(params, layout_[h + 2]) * c.features;
  add_bias(c.sigma_pre, bias(params, layout_[h + 3]));
  c.sigma_pre.array() += static_cast<T>(arch_.sigma_offset);
  out.stddev = c.sigma_pre.unaryExpr([](T x) { return softplus(x); });
  out.stddev.array() += static_cast<T>(arch_.sigma_floor);
  return out;
}

template <typename T>
void Encoder<T>::backward(std::span<const T> params, const Cache& cache,
                          const RowMatrixX<T>& d_mean,
                          const RowMatrixX<T>& d_stddev, std::span<T> grad) const {
  require(grad.size() == num_params(), "encoder gradient size mismatch");
  require(cache.activations.size() == arch_.encoder.size() + 1,
          "encoder cache is incomplete");
  const int batch = cache.batch;
  const std::size_t h = 2 * arch_.encoder.size();

  const RowMatrixX<T> d_pre =
      d_stddev.cwiseProduct(cache.sigma_pre.unaryExpr([](T x) { return sigmoid(x); }));
  view(grad, layout_[h]).noalias() += d_mean * cache.features.transpose();
  bias(grad, layout_[h + 1]) += d_mean.rowwise().sum();
  view(grad, layout_[h + 2]).noalias() += d_pre * cache.features.transpose();
  bias(grad, layout_[h + 3]) += d_pre.rowwise().sum();
  RowMatrixX<T> d_features = view(params, layout_[h]).transpose() * d_mean;
  d_features.noalias() += view(params, layout_[h + 2]).transpose() * d_pre;

  const int area = sizes_.back() * sizes_.back();
  const int c_last = arch_.encoder.back().channels;
  RowMatrixX<T> dA(c_last, static_cast<Eigen::Index>(batch) * area);
  for (int ch = 0; ch < c_last; ++ch) {
    for (int b = 0; b < batch; ++b) {
      for (int p = 0; p < area; ++p) {
        dA(ch, static_cast<Eigen::Index>(b) * area + p) = d_features(ch * area + p, b);
      }
    }
  }

  for (int l = static_cast<int>(arch_.encoder.size()) - 1; l >= 0; --l) {
    const auto& spec = arch_.encoder[l];
    const int c_in = l == 0 ? arch_.in_channels : arch_.encoder[l - 1].channels;
    const Geometry g{c_in, sizes_[l], sizes_[l + 1], spec.kernel, spec.stride};
    mask_relu(dA, cache.activations[l + 1]);
    RowMatrixX<T> dX;
    conv_backward(cache.activations[l], view(params, layout_[2 * l]), dA, g, batch,
                  view(grad, layout_[2 * l]), bias(grad, layout_[2 * l + 1]),
                  l > 0 ? &dX : nullptr);
    dA = std::move(dX);
  }
}

// ---------------------------------------------------------------- Decoder

template <typename T>
Decoder<T>::Decoder(NetArch arch) : arch_(std::move(arch)) {
  arch_.validate();
  sizes_ = arch_.decoder_sizes();
  layout_.add("dec.linear.w", arch_.decoder_width, kLatentDim);
  layout_.add("dec.linear.b", arch_.decoder_width, 1);
  int c_in = arch_.decoder_width;
  for (std::size_t l = 0; l < arch_.decoder.size(); ++l) {
    const auto& c = arch_.decoder[l];
    layout_.add("dec.deconv" + std::to_string(l) + ".w", c_in,
                c.channels * c.kernel * c.kernel);
    layout_.add("dec.deconv" + std::to_string(l) + ".b", c.channels, 1);
    c_in = c.channels;
  }
}

template <typename T>
void Decoder<T>::initialize(std::span<T> params, Rng& rng) const {
  require(params.size() == num_params(), "decoder parameter size mismatch");
  init_uniform(params, layout_[0], kLatentDim, rng);
  init_uniform(params, layout_[1], kLatentDim, rng);
  for (std::size_t l = 0; l < arch_.decoder.size(); ++l) {
    const auto& c = arch_.decoder[l];
    const double fan_in = static_cast<double>(c.channels) * c.kernel * c.kernel;
    init_uniform(params, layout_[2 + 2 * l], fan_in, rng);
    init_uniform(params, layout_[3 + 2 * l], fan_in, rng);
  }
}

template <typename T>
RowMatrixX<T> Decoder<T>::forward(std::span<const T> params,
                                  const RowMatrixX<T>& latents, Cache* cache) const {
  require(params.size() == num_params(), "decoder parameter size mismatch");
  require(latents.rows() == kLatentDim, "decoder input must be 3 x B");
  const int batch = static_cast<int>(latents.cols());
  Cache local;
  Cache& c = cache ? *cache : local;
  c.batch = batch;
  c.latents = latents;
  c.activations.clear();

  RowMatrixX<T> H = view(params, layout_[0]) * latents;
  add_bias(H, bias(params, layout_[1]));
  relu_inplace(H);
  c.activations.push_back(std::move(H));

  int c_in = arch_.decoder_width;
  const std::size_t L = arch_.decoder.size();
  RowMatrixX<T> Y;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& spec = arch_.decoder[l];
    const Geometry g{spec.channels, sizes_[l + 1], sizes_[l], spec.kernel, spec.stride};
    deconv_forward(c.activations.back(), view(params, layout_[2 + 2 * l]),
                   bias(params, layout_[3 + 2 * l]), g, batch, Y);
    if (l + 1 < L) {
      relu_inplace(Y);
      c.activations.push_back(std::move(Y));
      if (cache == nullptr) c.activations.erase(c.activations.begin());
    }
    c_in = spec.channels;
  }
  (void)c_in;
  Y = Y.unaryExpr([](T x) { return sigmoid(x); });
  if (cache != nullptr) c.output = Y;
  return Y;
}

template <typename T>
RowMatrixX<T> Decoder<T>::backward_logits(std::span<const T> params,
                                          const Cache& cache,
                                          const RowMatrixX<T>& d_logits,
                                          std::span<T> grad) const {
  require(grad.size() == num_params(), "decoder gradient size mismatch");
  const std::size_t L = arch_.decoder.size();
  require(cache.activations.size() == L, "decoder cache is incomplete");
  const int batch = cache.batch;

  RowMatrixX<T> dY = d_logits;
  for (int l = static_cast<int>(L) - 1; l >= 0; --l) {
    const auto& spec = arch_.decoder[l];
    const Geometry g{spec.channels, sizes_[l + 1], sizes_[l], spec.kernel, spec.stride};
    RowMatrixX<T> dX;
    deconv_backward(cache.activations[l], view(params, layout_[2 + 2 * l]), dY, g,
                    batch, view(grad, layout_[2 + 2 * l]),
                    bias(grad, layout_[3 + 2 * l]), dX);
    mask_relu(dX, cache.activations[l]);
    dY = std::move(dX);
  }
  view(grad, layout_[0]).noalias() += dY * cache.latents.transpose();
  bias(grad, layout_[1]) += dY.rowwise().sum();
  return view(params, layout_[0]).transpose() * dY;
}

template <typename T>
RowMatrixX<T> Decoder<T>::backward(std::span<const T> params, const Cache& cache,
                                   const RowMatrixX<T>& d_output,
                                   std::span<T> grad) const {
  const RowMatrixX<T> d_logits =
      d_output.cwiseProduct(cache.output.cwiseProduct(
          (T(1) - cache.output.array()).matrix()));
  return backward_logits(params, cache, d_logits, grad);
}

template class Encoder<float>;
template class Encoder<double>;
template class Decoder<float>;
template class Decoder<double>;
template RowMatrixX<float> pack_observations<float>(
    std::span<const env::Observation* const>);
template RowMatrixX<double> pack_observations<double>(
    std::span<const env::Observation* const>);

// ---------------------------------------------------------------- helpers

std::vector<LatentGaussian> encode_batch(
    std::span<const env::Observation* const> batch, const Encoder<float>& encoder,
    std::span<const float> params) {
  const RowMatrixX<float> X = pack_observations<float>(batch);
  const auto out = encoder.forward(params, X, static_cast<int>(batch.size()));
  std::vector<LatentGaussian> res(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (int d = 0; d < kLatentDim; ++d) {
      res[b].mean(d) = out.mean(d, b);
      res[b].stddev(d) = out.stddev(d, b);
    }
  }
  return res;
}

LatentGaussian encode(const env::Observation& obs, const Encoder<float>& encoder,
                      std::span<const float> params) {
  const env::Observation* p = &obs;
  return encode_batch(std::span(&p, 1), encoder, params).front();
}

std::vector<float> decode(const Latent& s, const Decoder<float>& decoder,
                          std::span<const float> params) {
  require(s.allFinite(), "non-finite latent passed to decoder");
  RowMatrixX<float> z(kLatentDim, 1);
  for (int d = 0; d < kLatentDim; ++d) z(d, 0) = static_cast<float>(s(d));
  const RowMatrixX<float> out = decoder.forward(params, z);
  return std::vector<float>(out.data(), out.data() + out.size());
}

Latent reparam_sample(const LatentGaussian& lg, const Latent& noise) {
  return lg.mean + lg.stddev.cwiseProduct(noise);
}

double diag_gaussian_entropy(const LatentGaussian& lg) {
  require((lg.stddev.array() > 0.0).all(), "stddev must be positive");
  return 0.5 * kLatentDim * (1.0 + std::log(2.0 * std::numbers::pi)) +
         lg.stddev.array().log().sum();
}

namespace {

template <typename T>
double bernoulli_impl(std::span<const T> target, std::span<const T> predicted) {
  require(target.size() == predicted.size(), "Bernoulli shapes differ");
  double total = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double p0 = predicted[i];
    if (!(p0 > 0.0 && p0 < 1.0)) {
      fail(ErrorKind::kInvalidArgument, "predicted pixel outside (0, 1)");
    }
    const double p = std::clamp(p0, kPixelClamp, 1.0 - kPixelClamp);
    const double t = target[i];
    total += t * std::log(p) + (1.0 - t) * std::log1p(-p);
  }
  return total;
}

}  // namespace

double bernoulli_loglik(std::span<const double> target,
                        std::span<const double> predicted) {
  return bernoulli_impl(target, predicted);
}

double bernoulli_loglik(std::span<const float> target,
                        std::span<const float> predicted) {
  return bernoulli_impl(target, predicted);
}

}  // namespace dlgpd::nets
