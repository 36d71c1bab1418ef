#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "acsc/rng.hpp"
#include "acsc/tensor.hpp"

using namespace acsc;

namespace {

// Independent reference: plain quadruple loop, no shared code with the
// library path. out(i,j) = sum_{u,v} x(i+u-h, j+v-h) * k(u,v).
Image reference_correlate(const Image& x, const Kernel& k, PaddingMode mode) {
  const int s = k.size, h = s / 2;
  Image out(x.height, x.width, 1);
  for (int i = 0; i < x.height; ++i)
    for (int j = 0; j < x.width; ++j) {
      double sum = 0.0;
      for (int u = 0; u < s; ++u)
        for (int v = 0; v < s; ++v) {
          int r = i + u - h;
          int c = j + v - h;
          if (mode == PaddingMode::zero) {
            if (r < 0 || r >= x.height || c < 0 || c >= x.width) continue;
          } else {
            r = ((r % x.height) + x.height) % x.height;
            c = ((c % x.width) + x.width) % x.width;
          }
          sum += x.at(r, c) * k.at(u, v);
        }
      out.at(i, j) = sum;
    }
  return out;
}

Image random_image(Rng& rng, int h, int w, int c = 1) {
  Image x(h, w, c);
  for (double& v : x.data) v = rng.normal();
  return x;
}

FeatureMaps random_maps(Rng& rng, int h, int w, int m) {
  FeatureMaps z(h, w, m);
  for (double& v : z.data) v = rng.normal();
  return z;
}

FilterBank random_bank(Rng& rng, int s, int cin, int cout) {
  FilterBank b(s, cin, cout);
  for (double& v : b.data) v = rng.normal();
  return b;
}

Kernel random_kernel(Rng& rng, int s) {
  Kernel k(s);
  for (double& v : k.data) v = rng.normal();
  return k;
}

Kernel delta_kernel(int s) {
  Kernel k(s);
  k.at(s / 2, s / 2) = 1.0;
  return k;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

std::vector<double> matvec(const DenseDictionary& D, const std::vector<double>& v) {
  std::vector<double> out(D.rows, 0.0);
  for (int r = 0; r < D.rows; ++r) {
    double sum = 0.0;
    for (int c = 0; c < D.cols; ++c) sum += D.at(r, c) * v[c];
    out[r] = sum;
  }
  return out;
}

std::vector<double> matvec_t(const DenseDictionary& D, const std::vector<double>& v) {
  std::vector<double> out(D.cols, 0.0);
  for (int r = 0; r < D.rows; ++r)
    for (int c = 0; c < D.cols; ++c) out[c] += D.at(r, c) * v[r];
  return out;
}

Image circshift(const Image& x, int dr, int dc) {
  Image out(x.height, x.width, x.channels);
  for (int i = 0; i < x.height; ++i)
    for (int j = 0; j < x.width; ++j)
      for (int c = 0; c < x.channels; ++c)
        out.at((i + dr) % x.height, (j + dc) % x.width, c) = x.at(i, j, c);
  return out;
}

}  // namespace

TEST_CASE("correlate2d_same: delta kernel is the identity") {
  Rng rng(11);
  const Image x = random_image(rng, 6, 9);
  for (int s : {1, 3, 5}) {
    const Image y = correlate2d_same(x, delta_kernel(s), PaddingMode::zero);
    for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(y.data[i] == x.data[i]);
  }
}

TEST_CASE("correlate2d_same: 1x1 image under 3x3 ones keeps only the center tap") {
  Image x(1, 1, 1);
  x.at(0, 0) = 2.0;
  Kernel ones(3);
  for (double& v : ones.data) v = 1.0;
  const Image y = correlate2d_same(x, ones, PaddingMode::zero);
  CHECK(y.height == 1);
  CHECK(y.width == 1);
  CHECK(y.at(0, 0) == 2.0);
}

TEST_CASE("correlate2d_same matches the nested-loop reference") {
  Rng rng(17);
  for (PaddingMode mode : {PaddingMode::zero, PaddingMode::circular}) {
    for (int trial = 0; trial < 6; ++trial) {
      const Image x = random_image(rng, 5, 5);
      const Kernel k = random_kernel(rng, 3);
      const Image got = correlate2d_same(x, k, mode);
      const Image want = reference_correlate(x, k, mode);
      for (std::size_t i = 0; i < got.data.size(); ++i)
        CHECK(std::abs(got.data[i] - want.data[i]) <= 1e-12);
    }
  }
}

TEST_CASE("correlate2d_same rejects even kernels, multi-channel planes, non-finite taps") {
  Rng rng(3);
  const Image x = random_image(rng, 4, 4);
  CHECK_THROWS_AS((void)Kernel(4), ValueError);
  Kernel k(3);
  k.at(1, 1) = std::nan("");
  CHECK_THROWS_AS((void)correlate2d_same(x, k, PaddingMode::zero), ValueError);
  const Image rgb = random_image(rng, 4, 4, 3);
  CHECK_THROWS_AS((void)correlate2d_same(rgb, delta_kernel(3), PaddingMode::zero), ShapeError);
}

TEST_CASE("flip2d: symmetry, involution, index arithmetic") {
  Kernel sym(3);
  sym.at(0, 0) = sym.at(2, 2) = 1.0;
  sym.at(0, 2) = sym.at(2, 0) = 2.0;
  sym.at(1, 1) = 5.0;
  const Kernel f = flip2d(sym);
  for (std::size_t i = 0; i < f.data.size(); ++i) CHECK(f.data[i] == sym.data[i]);

  Rng rng(5);
  const Kernel k = random_kernel(rng, 5);
  const Kernel ff = flip2d(flip2d(k));
  for (std::size_t i = 0; i < k.data.size(); ++i) CHECK(ff.data[i] == k.data[i]);

  Kernel corner(3);
  corner.at(0, 0) = 1.0;
  CHECK(flip2d(corner).at(2, 2) == 1.0);
  CHECK(flip2d(corner).at(0, 0) == 0.0);
}

TEST_CASE("analysis_transform: delta filters copy the image, zero image maps to zero") {
  Rng rng(23);
  const Image x = random_image(rng, 7, 5);
  const int m = 4;
  FilterBank bank(3, 1, m);
  for (int i = 0; i < m; ++i) bank.at(1, 1, 0, i) = 1.0;
  const FeatureMaps z = analysis_transform(x, bank, PaddingMode::zero);
  for (int i = 0; i < x.height; ++i)
    for (int j = 0; j < x.width; ++j)
      for (int f = 0; f < m; ++f) CHECK(z.at(i, j, f) == x.at(i, j));

  Image zero(7, 5, 1);
  const FeatureMaps zz = analysis_transform(zero, bank, PaddingMode::zero);
  for (double v : zz.data) CHECK(v == 0.0);
}

TEST_CASE("analysis_transform equals the transposed Toeplitz matrix") {
  Rng rng(31);
  const Image x = random_image(rng, 6, 4);
  const FilterBank bank = random_bank(rng, 3, 3, 1);  // synthesis orientation, m=3
  const DenseDictionary D = toeplitz_from_bank(bank, 6, 4);
  const FeatureMaps z = analysis_transform(x, transpose_bank(bank), PaddingMode::zero);
  const std::vector<double> want = matvec_t(D, flatten_image(x));
  const std::vector<double> got = flatten_maps(z);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(std::abs(got[i] - want[i]) <= 1e-12);
}

TEST_CASE("synthesis_transform: identity filter, zero code, Toeplitz equality") {
  Rng rng(41);
  FilterBank delta(3, 1, 1);
  delta.at(1, 1, 0, 0) = 1.0;
  const FeatureMaps z1 = random_maps(rng, 5, 6, 1);
  const Image x1 = synthesis_transform(z1, delta, PaddingMode::zero);
  for (std::size_t i = 0; i < z1.data.size(); ++i) CHECK(x1.data[i] == z1.data[i]);

  FeatureMaps zeros(5, 6, 3);
  const FilterBank bank = random_bank(rng, 3, 3, 1);
  const Image x0 = synthesis_transform(zeros, bank, PaddingMode::zero);
  for (double v : x0.data) CHECK(v == 0.0);

  const FeatureMaps z = random_maps(rng, 5, 6, 3);
  const DenseDictionary D = toeplitz_from_bank(bank, 5, 6);
  const std::vector<double> want = matvec(D, flatten_maps(z));
  const Image got = synthesis_transform(z, bank, PaddingMode::zero);
  for (std::size_t i = 0; i < got.data.size(); ++i)
    CHECK(std::abs(got.data[i] - want[i]) <= 1e-12);
}

TEST_CASE("transform shape errors") {
  Rng rng(2);
  const Image x = random_image(rng, 4, 4, 2);
  const FilterBank bank = random_bank(rng, 3, 1, 3);
  CHECK_THROWS_AS((void)analysis_transform(x, bank, PaddingMode::zero), ShapeError);
  const FeatureMaps z = random_maps(rng, 4, 4, 2);
  CHECK_THROWS_AS((void)synthesis_transform(z, bank, PaddingMode::zero), ShapeError);
}

TEST_CASE("toeplitz_from_bank: identity for a delta filter and documented dims") {
  FilterBank delta(3, 1, 1);
  delta.at(1, 1, 0, 0) = 1.0;
  const DenseDictionary I = toeplitz_from_bank(delta, 4, 5);
  REQUIRE(I.rows == 20);
  REQUIRE(I.cols == 20);
  for (int r = 0; r < I.rows; ++r)
    for (int c = 0; c < I.cols; ++c) CHECK(I.at(r, c) == (r == c ? 1.0 : 0.0));

  Rng rng(7);
  const FilterBank bank = random_bank(rng, 3, 3, 1);
  const DenseDictionary D = toeplitz_from_bank(bank, 4, 4);
  CHECK(D.rows == 16);
  CHECK(D.cols == 48);
}

TEST_CASE("toeplitz_from_bank columns match direct convolution of impulse maps") {
  Rng rng(13);
  const int H = 4, W = 5, m = 2;
  const FilterBank bank = random_bank(rng, 3, m, 1);
  const DenseDictionary D = toeplitz_from_bank(bank, H, W);
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < H * W; ++p) {
      // impulse map i with a 1 at pixel p, convolved directly per filter
      Image imp(H, W, 1);
      imp.data[p] = 1.0;
      Kernel k(3);
      for (int u = 0; u < 3; ++u)
        for (int v = 0; v < 3; ++v) k.at(u, v) = bank.at(2 - u, 2 - v, i, 0);
      const Image want = reference_correlate(imp, k, PaddingMode::zero);
      const int col = i * H * W + p;
      for (int r = 0; r < D.rows; ++r)
        CHECK(std::abs(D.at(r, col) - want.data[r]) <= 1e-15);
    }
}

TEST_CASE("toeplitz_from_bank refuses to exceed the entry cap") {
  Rng rng(9);
  const FilterBank bank = random_bank(rng, 3, 4, 1);
  CHECK_THROWS_AS((void)toeplitz_from_bank(bank, 64, 64, PaddingMode::zero), ResourceError);
  // explicit cap small enough to trip on a tiny instance
  CHECK_THROWS_AS((void)toeplitz_from_bank(bank, 4, 4, PaddingMode::zero, 100), ResourceError);
}

TEST_CASE("analysis_transform is linear") {
  Rng rng(53);
  const FilterBank bank = random_bank(rng, 3, 1, 3);
  for (int trial = 0; trial < 4; ++trial) {
    const Image x = random_image(rng, 6, 6);
    const Image y = random_image(rng, 6, 6);
    const double a = rng.normal(), b = rng.normal();
    Image mix(6, 6, 1);
    for (std::size_t i = 0; i < mix.data.size(); ++i)
      mix.data[i] = a * x.data[i] + b * y.data[i];
    const FeatureMaps zm = analysis_transform(mix, bank, PaddingMode::zero);
    const FeatureMaps zx = analysis_transform(x, bank, PaddingMode::zero);
    const FeatureMaps zy = analysis_transform(y, bank, PaddingMode::zero);
    for (std::size_t i = 0; i < zm.data.size(); ++i)
      CHECK(std::abs(zm.data[i] - (a * zx.data[i] + b * zy.data[i])) <= 1e-12);
  }
}

TEST_CASE("analysis and synthesis are adjoint under zero padding") {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 3 + static_cast<int>(rng.integer(6));
    const int w = 3 + static_cast<int>(rng.integer(6));
    const int m = 1 + static_cast<int>(rng.integer(4));
    const FilterBank bank = random_bank(rng, 3, m, 1);
    const Image x = random_image(rng, h, w);
    const FeatureMaps z = random_maps(rng, h, w, m);
    // analysis with bank viewed c->m, synthesis with the same bank m->c
    const FeatureMaps ax = analysis_transform(x, transpose_bank(bank), PaddingMode::zero);
    const Image sz = synthesis_transform(z, bank, PaddingMode::zero);
    const double lhs = dot(flatten_maps(ax), flatten_maps(z));
    const double rhs = dot(x.data, sz.data);
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1.0});
    CHECK(std::abs(lhs - rhs) / scale <= 1e-10);
  }
}

TEST_CASE("circular mode is exactly shift equivariant") {
  Rng rng(71);
  const Image x = random_image(rng, 8, 10);
  const FilterBank bank = random_bank(rng, 3, 1, 3);
  const FeatureMaps z = analysis_transform(x, bank, PaddingMode::circular);
  const FeatureMaps zs = analysis_transform(circshift(x, 3, 4), bank, PaddingMode::circular);
  for (int i = 0; i < x.height; ++i)
    for (int j = 0; j < x.width; ++j)
      for (int f = 0; f < 3; ++f)
        CHECK(zs.at((i + 3) % x.height, (j + 4) % x.width, f) == z.at(i, j, f));
}

TEST_CASE("both transforms match their dense counterparts on all small sizes") {
  Rng rng(83);
  for (int h : {3, 5, 8}) {
    for (int m : {1, 4}) {
      const int w = h == 5 ? 7 : h;
      const FilterBank bank = random_bank(rng, 3, m, 1);
      const DenseDictionary D = toeplitz_from_bank(bank, h, w);
      const Image x = random_image(rng, h, w);
      const FeatureMaps z = random_maps(rng, h, w, m);

      const std::vector<double> synth_want = matvec(D, flatten_maps(z));
      const Image synth_got = synthesis_transform(z, bank, PaddingMode::zero);
      for (std::size_t i = 0; i < synth_got.data.size(); ++i)
        CHECK(std::abs(synth_got.data[i] - synth_want[i]) <= 1e-10);

      const std::vector<double> ana_want = matvec_t(D, flatten_image(x));
      const std::vector<double> ana_got =
          flatten_maps(analysis_transform(x, transpose_bank(bank), PaddingMode::zero));
      for (std::size_t i = 0; i < ana_got.size(); ++i)
        CHECK(std::abs(ana_got[i] - ana_want[i]) <= 1e-10);
    }
  }
}

TEST_CASE("bank_apply threading produces identical bits") {
  Rng rng(97);
  const Image x = random_image(rng, 33, 29);
  const FilterBank bank = random_bank(rng, 5, 1, 8);
  FeatureMaps z1(33, 29, 8), z4(33, 29, 8);
  bank_apply(view(x), bank, true, PaddingMode::zero, mut_view(z1), 1);
  bank_apply(view(x), bank, true, PaddingMode::zero, mut_view(z4), 4);
  for (std::size_t i = 0; i < z1.data.size(); ++i) CHECK(z1.data[i] == z4.data[i]);
}
