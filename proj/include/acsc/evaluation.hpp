#pragma once

#include <string>

#include "acsc/model.hpp"
#include "acsc/tensor.hpp"

namespace acsc {

struct BenchmarkStats {
  double mean_seconds = 0.0;
  double std_seconds = 0.0;
  int reps = 0;  // timed repetitions included in the statistics
  int height = 0;
  int width = 0;
  int thread_count = 1;

  std::string csv_header() const;
  std::string csv_line() const;
};

// 10*log10(peak^2 / MSE); identical images return +infinity.
double psnr(const Image& reference, const Image& test, double peak = 1.0);

// Wall-clock statistics over repeated forward passes on a fixed random
// image; the first pass is dropped as warm-up when reps >= 3. The numeric
// output is checked to be identical across repetitions.
BenchmarkStats benchmark_forward(const ModelParams& p, int height, int width, int reps,
                                 int threads = 1);

// Decoder atoms tiled on a ceil(sqrt(m)) grid with mid-gray one-pixel
// gutters. Each atom is min-max normalized to [0,1]; a constant atom
// renders as zeros; unused cells stay mid-gray. Multi-channel decoders
// render output channel 0.
Image dictionary_mosaic(const ModelParams& p, int separator = 1);

struct ContrastNormalization {
  Image normalized;
  Image local_mean;
  Image local_std;
};

// Window-local affine normalization: out = (x - mu)/(sigma + eps) with mu
// and sigma the Gaussian-weighted mean/deviation of the window centered at
// each pixel (window 9x9, sigma 2; weights renormalized over the in-bounds
// taps near the borders). Within each window the recentered values average
// to zero under the window weights by construction. The returned maps make
// the mapping exactly invertible.
ContrastNormalization local_contrast_normalize(const Image& x, double eps = 1e-4);

// Inverse of local_contrast_normalize given its returned maps.
Image contrast_denormalize(const Image& normalized, const Image& local_mean,
                           const Image& local_std, double eps = 1e-4);

}  // namespace acsc
