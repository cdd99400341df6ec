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

#ifndef DLGPD_NETS_H_
#define DLGPD_NETS_H_

#include <span>
#include <string>
#include <vector>

#include "dlgpd/common.h"
#include "dlgpd/env.h"

namespace dlgpd::nets {

inline constexpr int kLatentDim = 3;

struct ConvSpec {
  int channels = 0;  // output channels
  int kernel = 0;
  int stride = 0;
};

// Layer pattern of the encoder (valid convolutions + ReLU, mean and
// softplus-stddev heads) and of the decoder (linear + ReLU, transposed
// convolutions without padding, sigmoid output). The standard architecture
// resolves to the spatial chains 64 -> 31 -> 14 -> 6 -> 2 and
// 1 -> 5 -> 13 -> 30 -> 64.
struct NetArch {
  int image_size = 64;
  int in_channels = 6;
  std::vector<ConvSpec> encoder = {{32, 4, 2}, {64, 4, 2}, {128, 4, 2}, {256, 4, 2}};
  int decoder_width = 1024;
  std::vector<ConvSpec> decoder = {{128, 5, 2}, {64, 5, 2}, {32, 6, 2}, {6, 6, 2}};
  double sigma_offset = 0.55;
  double sigma_floor = 0.01;

  static NetArch standard() { return {}; }
  // 8x8 inputs, same layer pattern: 8 -> 3 -> 1 and 1 -> 3 -> 8.
  static NetArch tiny();

  std::vector<int> encoder_sizes() const;
  std::vector<int> decoder_sizes() const;
  int encoder_features() const;
  int pixels_per_image() const { return image_size * image_size; }
  void validate() const;

  bool operator==(const NetArch& o) const;
};

// A named contiguous block of a flat parameter vector, viewed as a row-major
// rows x cols matrix.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

class ParamLayout {
 public:
  const ParamBlock& add(std::string name, int rows, int cols);
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& operator[](std::size_t i) const { return blocks_[i]; }
  std::size_t total() const { return total_; }

 private:
  std::vector<ParamBlock> blocks_;
  std::size_t total_ = 0;
};

// Packs observations into the channel-major batch layout used by the
// networks: row c holds channel c of every sample, sample-major.
template <typename T>
RowMatrixX<T> pack_observations(std::span<const env::Observation* const> batch);

template <typename T>
class Encoder {
 public:
  explicit Encoder(NetArch arch = {});

  const NetArch& arch() const { return arch_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t num_params() const { return layout_.total(); }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void initialize(std::span<T> params, Rng& rng) const;

  struct Output {
    RowMatrixX<T> mean;    // 3 x B
    RowMatrixX<T> stddev;  // 3 x B
  };
  struct Cache {
    int batch = 0;
    std::vector<RowMatrixX<T>> activations;  // inputs of every conv layer + last output
    RowMatrixX<T> features;                  // F x B
    RowMatrixX<T> sigma_pre;                 // 3 x B, before softplus
  };

  Output forward(std::span<const T> params, const RowMatrixX<T>& input, int batch,
                 Cache* cache = nullptr) const;
  // Accumulates parameter gradients into grad.
  void backward(std::span<const T> params, const Cache& cache,
                const RowMatrixX<T>& d_mean, const RowMatrixX<T>& d_stddev,
                std::span<T> grad) const;

 private:
  NetArch arch_;
  std::vector<int> sizes_;
  ParamLayout layout_;
};

template <typename T>
class Decoder {
 public:
  explicit Decoder(NetArch arch = {});

  const NetArch& arch() const { return arch_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t num_params() const { return layout_.total(); }

  void initialize(std::span<T> params, Rng& rng) const;

  struct Cache {
    int batch = 0;
    RowMatrixX<T> latents;                   // 3 x B
    std::vector<RowMatrixX<T>> activations;  // inputs of every deconv layer
    RowMatrixX<T> output;                    // sigmoid output, C x (B*H*W)
  };

  // latents: 3 x B. Returns C x (B*H*W) values in (0, 1).
  RowMatrixX<T> forward(std::span<const T> params, const RowMatrixX<T>& latents,
                        Cache* cache = nullptr) const;
  // Gradient with respect to the pre-sigmoid logits. Accumulates parameter
  // gradients into grad and returns d/d latents (3 x B).
  RowMatrixX<T> backward_logits(std::span<const T> params, const Cache& cache,
                                const RowMatrixX<T>& d_logits,
                                std::span<T> grad) const;
  RowMatrixX<T> backward(std::span<const T> params, const Cache& cache,
                         const RowMatrixX<T>& d_output, std::span<T> grad) const;

 private:
  NetArch arch_;
  std::vector<int> sizes_;
  ParamLayout layout_;
};

struct LatentGaussian {
  Latent mean = Latent::Zero();
  Latent stddev = Latent::Ones();
};

// Single-sample helpers on top of the batched networks.
LatentGaussian encode(const env::Observation& obs, const Encoder<float>& encoder,
                      std::span<const float> params);
std::vector<LatentGaussian> encode_batch(
    std::span<const env::Observation* const> batch, const Encoder<float>& encoder,
    std::span<const float> params);
// Expected observation, 6 x H x W planar, values in (0, 1).
std::vector<float> decode(const Latent& s, const Decoder<float>& decoder,
                          std::span<const float> params);

Latent reparam_sample(const LatentGaussian& lg, const Latent& noise);

// D/2 (1 + log 2 pi) + sum_i log sigma_i
double diag_gaussian_entropy(const LatentGaussian& lg);

inline constexpr double kPixelClamp = 1e-6;

// sum t log p + (1 - t) log(1 - p) with p clamped to [1e-6, 1 - 1e-6].
double bernoulli_loglik(std::span<const double> target,
                        std::span<const double> predicted);
double bernoulli_loglik(std::span<const float> target,
                        std::span<const float> predicted);

}  // namespace dlgpd::nets

#endif  // DLGPD_NETS_H_
