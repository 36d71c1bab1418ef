#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acsc/tensor.hpp"

namespace acsc {

// All trainable quantities of the unrolled sparse auto-encoder.
//   w_e : s x s x c x m encoder filters, applied by true convolution
//   w_d : s x s x m x c encoder synthesis filters
//   theta : m nonnegative per-map thresholds
//   d : s x s x m x c decoder dictionary
//   K : unroll depth of the encoder recurrence
struct ModelParams {
  FilterBank w_e;
  FilterBank w_d;
  std::vector<double> theta;
  FilterBank d;
  int K = 0;

  int size() const { return d.size; }
  int maps() const { return d.in_channels; }
  int channels() const { return d.out_channels; }

  // Throws if the four groups are dimensionally inconsistent, theta has a
  // negative entry, or K < 1.
  void validate() const;
};

// Per-iteration state captured during encoding so training can run the
// recurrence backwards. Entry k holds the code entering iteration k, the
// (masked) reconstruction residual it produced, and the pre-threshold
// activation.
struct EncodeTrace {
  struct Step {
    FeatureMaps code_in;
    Image masked_residual;
    FeatureMaps pre_activation;
  };
  std::vector<Step> steps;
};

struct ForwardResult {
  Image reconstruction;
  FeatureMaps code;
  double sparsity = 0.0;  // fraction of exactly-zero code entries
};

// Deterministic initialization: w_d and d share one zero-mean Gaussian draw
// (std 1/s, large enough that some pre-threshold activations clear theta),
// w_e is 1/10 of w_d with each filter flipped and the channel axes swapped,
// theta is 0.1 everywhere.
ModelParams init_params(std::uint64_t seed, int s = 7, int m = 64, int c = 1, int K = 3);

// K repetitions of code = soft_threshold(code + w_e * (mask .* (x - w_d * code)))
// from a zero code. The mask, when given, must match x and contain only
// {0,1}. Pass a trace pointer to capture per-iteration state.
FeatureMaps encode(const Image& x, const ModelParams& p, const Image* mask = nullptr,
                   PaddingMode mode = PaddingMode::zero, EncodeTrace* trace = nullptr,
                   int threads = 1);

// Linear reconstruction through the decoder dictionary.
Image decode(const FeatureMaps& z, const ModelParams& p,
             PaddingMode mode = PaddingMode::zero, int threads = 1);

// encode then decode, plus the exact-zero fraction of the code.
ForwardResult forward(const Image& x, const ModelParams& p, const Image* mask = nullptr,
                      PaddingMode mode = PaddingMode::zero, int threads = 1);

// Binary model file: magic "ACSC", version 0x01, little-endian u32 header
// [s, m, c, K], then w_e, w_d, theta, d as raw little-endian f64 blocks in
// the container layouts, then a CRC-32 of the payload bytes. Round trips
// bit-exactly.
void save_model(const ModelParams& p, const std::string& path);
ModelParams load_model(const std::string& path);

}  // namespace acsc
