#pragma once

#include <cstddef>
#include <vector>

#include "acsc/errors.hpp"

namespace acsc {

// Boundary handling for all spatial operations. Zero padding is the default
// everywhere; circular exists so shift-equivariance can be tested exactly.
enum class PaddingMode { zero, circular };

// H x W x C grid of doubles, row-major with the channel index innermost:
// data[(i*width + j)*channels + c]. This layout is also the on-disk order
// of the model file, so it must not change.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c = 1)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, 0.0) {
    if (h <= 0 || w <= 0 || c <= 0) throw ShapeError("Image: non-positive dimension");
  }

  double& at(int i, int j, int c = 0) {
    return data[(static_cast<std::size_t>(i) * width + j) * channels + c];
  }
  double at(int i, int j, int c = 0) const {
    return data[(static_cast<std::size_t>(i) * width + j) * channels + c];
  }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// H x W x m stack of feature maps over a convolutional dictionary; same
// spatial dimensions as the image it encodes. Layout mirrors Image with the
// map index innermost: data[(i*width + j)*maps + k].
struct FeatureMaps {
  int height = 0;
  int width = 0;
  int maps = 0;
  std::vector<double> data;

  FeatureMaps() = default;
  FeatureMaps(int h, int w, int m)
      : height(h), width(w), maps(m),
        data(static_cast<std::size_t>(h) * w * m, 0.0) {
    if (h <= 0 || w <= 0 || m <= 0) throw ShapeError("FeatureMaps: non-positive dimension");
  }

  double& at(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * width + j) * maps + k];
  }
  double at(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * width + j) * maps + k];
  }
  bool same_shape(const FeatureMaps& o) const {
    return height == o.height && width == o.width && maps == o.maps;
  }
};

// s x s x c_in x c_out array of convolution filters. s must be odd so that
// same-size output is centered. Layout: data[((u*size + v)*in_channels + ci)
// * out_channels + co].
struct FilterBank {
  int size = 0;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> data;

  FilterBank() = default;
  FilterBank(int s, int cin, int cout)
      : size(s), in_channels(cin), out_channels(cout),
        data(static_cast<std::size_t>(s) * s * cin * cout, 0.0) {
    if (s <= 0 || cin <= 0 || cout <= 0)
      throw ShapeError("FilterBank: non-positive dimension");
    if (s % 2 == 0) throw ValueError("FilterBank: filter size must be odd");
  }

  double& at(int u, int v, int ci, int co) {
    return data[(static_cast<std::size_t>(u) * size + v) * in_channels * out_channels +
                static_cast<std::size_t>(ci) * out_channels + co];
  }
  double at(int u, int v, int ci, int co) const {
    return data[(static_cast<std::size_t>(u) * size + v) * in_channels * out_channels +
                static_cast<std::size_t>(ci) * out_channels + co];
  }
};

// Single s x s kernel, row-major.
struct Kernel {
  int size = 0;
  std::vector<double> data;

  Kernel() = default;
  explicit Kernel(int s) : size(s), data(static_cast<std::size_t>(s) * s, 0.0) {
    if (s <= 0) throw ShapeError("Kernel: non-positive size");
    if (s % 2 == 0) throw ValueError("Kernel: size must be odd");
  }

  double& at(int u, int v) { return data[static_cast<std::size_t>(u) * size + v]; }
  double at(int u, int v) const { return data[static_cast<std::size_t>(u) * size + v]; }
};

// Dense matrix view of a convolutional dictionary (test scale only).
struct DenseDictionary {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major

  DenseDictionary() = default;
  DenseDictionary(int r, int c)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// Read-only / mutable views shared by Image and FeatureMaps so the
// convolution engine can serve both without copies.
struct PlanesView {
  int height = 0;
  int width = 0;
  int channels = 0;
  const double* data = nullptr;
};
struct PlanesMut {
  int height = 0;
  int width = 0;
  int channels = 0;
  double* data = nullptr;
};

inline PlanesView view(const Image& x) { return {x.height, x.width, x.channels, x.data.data()}; }
inline PlanesView view(const FeatureMaps& z) { return {z.height, z.width, z.maps, z.data.data()}; }
inline PlanesMut mut_view(Image& x) { return {x.height, x.width, x.channels, x.data.data()}; }
inline PlanesMut mut_view(FeatureMaps& z) { return {z.height, z.width, z.maps, z.data.data()}; }

// Core same-size filter application.
//   flip = false: out(p,q,co) = sum_{u,v,ci} in(p+u-h, q+v-h, ci) * K(u,v,ci,co)
//                 (correlation),
//   flip = true:  the kernel is indexed reversed in both spatial dims
//                 (true convolution).
// Out-of-range reads are zeros or wrap according to mode. out must already
// have the input's spatial dims and bank.out_channels channels.
void bank_apply(PlanesView in, const FilterBank& bank, bool flip, PaddingMode mode,
                PlanesMut out, int threads = 1);

// Gradient of bank_apply with respect to the bank: given the input planes and
// the gradient at the output, returns d(loss)/d(bank) for the same flip/mode.
FilterBank bank_grad(PlanesView in, PlanesView out_grad, int size, bool flip,
                     PaddingMode mode);

// out(u,v) = k(s-1-u, s-1-v).
Kernel flip2d(const Kernel& k);

// flip2d applied to every (ci,co) slice of the bank.
FilterBank flip_filters(const FilterBank& bank);

// Swaps the in/out channel axes: out(u,v,a,b) = in(u,v,b,a).
FilterBank transpose_bank(const FilterBank& bank);

// Same-size correlation of a single-channel plane with an s x s kernel.
Image correlate2d_same(const Image& x, const Kernel& k, PaddingMode mode);

// Correlation of the image with every filter (the adjoint of
// synthesis_transform under both padding modes): map co gets
// sum_ci corr(x[ci], bank(:,:,ci,co)). bank.in_channels must equal
// x.channels.
FeatureMaps analysis_transform(const Image& x, const FilterBank& bank,
                               PaddingMode mode = PaddingMode::zero, int threads = 1);

// Reconstruction from feature maps: channel co gets
// sum_i conv(z[i], bank(:,:,i,co)). bank.in_channels must equal z.maps.
Image synthesis_transform(const FeatureMaps& z, const FilterBank& bank,
                          PaddingMode mode = PaddingMode::zero, int threads = 1);

// True convolution of the image with the bank, producing maps; this is how
// the learned encoder filters are applied.
FeatureMaps convolve_transform(const Image& x, const FilterBank& bank,
                               PaddingMode mode = PaddingMode::zero, int threads = 1);

// Materializes the dense dictionary matrix equivalent to the bank on a
// height x width grid: column i*(height*width) + p is the vectorized output
// of synthesis_transform applied to a unit impulse at pixel p of map i.
// Refuses to build more than max_entries matrix entries.
DenseDictionary toeplitz_from_bank(const FilterBank& bank, int height, int width,
                                   PaddingMode mode = PaddingMode::zero,
                                   std::size_t max_entries = std::size_t(1) << 20);

// Map-major flattening used by the dense dictionary: out[i*H*W + r*W + t]
// = z(r, t, i). Inverse of unflatten_maps.
std::vector<double> flatten_maps(const FeatureMaps& z);
FeatureMaps unflatten_maps(const std::vector<double>& v, int height, int width, int maps);

// Row-major channel-minor flattening of an image (its natural data order).
std::vector<double> flatten_image(const Image& x);
Image unflatten_image(const std::vector<double>& v, int height, int width, int channels);

bool all_finite(const std::vector<double>& v);

}  // namespace acsc
