#include "acsc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace acsc {

namespace {

inline int wrap_index(int i, int n) {
  int r = i % n;
  return r < 0 ? r + n : r;
}

// One row range of bank_apply. The edge path resolves every column read
// individually; the interior path (full window in bounds) runs without
// column checks. Both accumulate in the same order, so circularly shifting
// the input permutes results bit-exactly.
void apply_rows(PlanesView in, const FilterBank& bank, bool flip, PaddingMode mode,
                PlanesMut out, int p0, int p1) {
  const int H = in.height, W = in.width;
  const int cin = in.channels, cout = bank.out_channels;
  const int s = bank.size, half = s / 2;
  const std::size_t tap_stride = static_cast<std::size_t>(cin) * cout;

  std::vector<const double*> wtap(static_cast<std::size_t>(s) * s);
  for (int u = 0; u < s; ++u)
    for (int v = 0; v < s; ++v) {
      const int tu = flip ? s - 1 - u : u;
      const int tv = flip ? s - 1 - v : v;
      wtap[static_cast<std::size_t>(u) * s + v] =
          bank.data.data() + (static_cast<std::size_t>(tu) * s + tv) * tap_stride;
    }

  std::vector<const double*> rows(s);
  std::vector<double> acc(cout);
  double* const ap = acc.data();

  // accumulate one (inrow, weight-tap) pair into the pixel accumulator
  auto add_tap_multi = [&](const double* xr, const double* w) {
    for (int ci = 0; ci < cin; ++ci) {
      const double xv = xr[ci];
      const double* wr = w + static_cast<std::size_t>(ci) * cout;
      for (int co = 0; co < cout; ++co) ap[co] += xv * wr[co];
    }
  };

  for (int p = p0; p < p1; ++p) {
    for (int u = 0; u < s; ++u) {
      int rp = p + u - half;
      if (rp < 0 || rp >= H) {
        if (mode == PaddingMode::zero) {
          rows[u] = nullptr;
          continue;
        }
        rp = wrap_index(rp, H);
      }
      rows[u] = in.data + static_cast<std::size_t>(rp) * W * cin;
    }

    double* orow = out.data + static_cast<std::size_t>(p) * W * cout;
    const int lo = std::min(half, W);
    const int hi = std::max(lo, W - half);

    auto edge_pixel = [&](int q) {
      if (cout == 1) {
        double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
        for (int u = 0; u < s; ++u) {
          const double* r = rows[u];
          if (!r) continue;
          const double* const* wrow = &wtap[static_cast<std::size_t>(u) * s];
          for (int v = 0; v < s; ++v) {
            int cq = q + v - half;
            if (cq < 0 || cq >= W) {
              if (mode == PaddingMode::zero) continue;
              cq = wrap_index(cq, W);
            }
            const double* xr = r + static_cast<std::size_t>(cq) * cin;
            const double* w = wrow[v];
            int ci = 0;
            for (; ci + 4 <= cin; ci += 4) {
              a0 += xr[ci] * w[ci];
              a1 += xr[ci + 1] * w[ci + 1];
              a2 += xr[ci + 2] * w[ci + 2];
              a3 += xr[ci + 3] * w[ci + 3];
            }
            for (; ci < cin; ++ci) a0 += xr[ci] * w[ci];
          }
        }
        orow[q] = (a0 + a1) + (a2 + a3);
      } else {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int u = 0; u < s; ++u) {
          const double* r = rows[u];
          if (!r) continue;
          const double* const* wrow = &wtap[static_cast<std::size_t>(u) * s];
          for (int v = 0; v < s; ++v) {
            int cq = q + v - half;
            if (cq < 0 || cq >= W) {
              if (mode == PaddingMode::zero) continue;
              cq = wrap_index(cq, W);
            }
            add_tap_multi(r + static_cast<std::size_t>(cq) * cin, wrow[v]);
          }
        }
        std::copy(acc.begin(), acc.end(), orow + static_cast<std::size_t>(q) * cout);
      }
    };

    for (int q = 0; q < lo; ++q) edge_pixel(q);

    if (cout == 1) {
      for (int q = lo; q < hi; ++q) {
        double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
        const std::size_t qbase = static_cast<std::size_t>(q - half) * cin;
        for (int u = 0; u < s; ++u) {
          const double* r = rows[u];
          if (!r) continue;
          const double* xs = r + qbase;
          const double* const* wrow = &wtap[static_cast<std::size_t>(u) * s];
          for (int v = 0; v < s; ++v) {
            const double* xr = xs + static_cast<std::size_t>(v) * cin;
            const double* w = wrow[v];
            int ci = 0;
            for (; ci + 4 <= cin; ci += 4) {
              a0 += xr[ci] * w[ci];
              a1 += xr[ci + 1] * w[ci + 1];
              a2 += xr[ci + 2] * w[ci + 2];
              a3 += xr[ci + 3] * w[ci + 3];
            }
            for (; ci < cin; ++ci) a0 += xr[ci] * w[ci];
          }
        }
        orow[q] = (a0 + a1) + (a2 + a3);
      }
    } else {
      for (int q = lo; q < hi; ++q) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const std::size_t qbase = static_cast<std::size_t>(q - half) * cin;
        for (int u = 0; u < s; ++u) {
          const double* r = rows[u];
          if (!r) continue;
          const double* xs = r + qbase;
          const double* const* wrow = &wtap[static_cast<std::size_t>(u) * s];
          for (int v = 0; v < s; ++v)
            add_tap_multi(xs + static_cast<std::size_t>(v) * cin, wrow[v]);
        }
        std::copy(acc.begin(), acc.end(), orow + static_cast<std::size_t>(q) * cout);
      }
    }

    for (int q = hi; q < W; ++q) edge_pixel(q);
  }
}

}  // namespace

void bank_apply(PlanesView in, const FilterBank& bank, bool flip, PaddingMode mode,
                PlanesMut out, int threads) {
  if (bank.size % 2 == 0) throw ValueError("bank_apply: filter size must be odd");
  if (in.channels != bank.in_channels)
    throw ShapeError("bank_apply: input channels do not match bank");
  if (out.height != in.height || out.width != in.width ||
      out.channels != bank.out_channels)
    throw ShapeError("bank_apply: output dims do not match");

  const int H = in.height;
  if (threads <= 1 || H < 2 * threads) {
    apply_rows(in, bank, flip, mode, out, 0, H);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const int chunk = (H + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int p0 = t * chunk;
    const int p1 = std::min(H, p0 + chunk);
    if (p0 >= p1) break;
    pool.emplace_back(apply_rows, in, std::cref(bank), flip, mode, out, p0, p1);
  }
  for (auto& th : pool) th.join();
}

FilterBank bank_grad(PlanesView in, PlanesView out_grad, int size, bool flip,
                     PaddingMode mode) {
  if (size % 2 == 0) throw ValueError("bank_grad: filter size must be odd");
  if (out_grad.height != in.height || out_grad.width != in.width)
    throw ShapeError("bank_grad: spatial dims do not match");

  const int H = in.height, W = in.width;
  const int cin = in.channels, cout = out_grad.channels;
  const int s = size, half = s / 2;
  FilterBank grad(s, cin, cout);
  const std::size_t tap_stride = static_cast<std::size_t>(cin) * cout;

  std::vector<double*> gtap(static_cast<std::size_t>(s) * s);
  for (int u = 0; u < s; ++u)
    for (int v = 0; v < s; ++v) {
      const int tu = flip ? s - 1 - u : u;
      const int tv = flip ? s - 1 - v : v;
      gtap[static_cast<std::size_t>(u) * s + v] =
          grad.data.data() + (static_cast<std::size_t>(tu) * s + tv) * tap_stride;
    }

  for (int p = 0; p < H; ++p) {
    for (int u = 0; u < s; ++u) {
      int rp = p + u - half;
      const double* r = nullptr;
      if (rp >= 0 && rp < H) {
        r = in.data + static_cast<std::size_t>(rp) * W * cin;
      } else if (mode == PaddingMode::circular) {
        r = in.data + static_cast<std::size_t>(wrap_index(rp, H)) * W * cin;
      }
      if (!r) continue;
      double* const* grow = &gtap[static_cast<std::size_t>(u) * s];
      for (int q = 0; q < W; ++q) {
        const double* go = out_grad.data + (static_cast<std::size_t>(p) * W + q) * cout;
        for (int v = 0; v < s; ++v) {
          int cq = q + v - half;
          if (cq < 0 || cq >= W) {
            if (mode == PaddingMode::zero) continue;
            cq = wrap_index(cq, W);
          }
          const double* xr = r + static_cast<std::size_t>(cq) * cin;
          double* g = grow[v];
          if (cout == 1) {
            const double gv = go[0];
            for (int ci = 0; ci < cin; ++ci) g[ci] += xr[ci] * gv;
          } else {
            for (int ci = 0; ci < cin; ++ci) {
              const double xv = xr[ci];
              double* gr = g + static_cast<std::size_t>(ci) * cout;
              for (int co = 0; co < cout; ++co) gr[co] += xv * go[co];
            }
          }
        }
      }
    }
  }
  return grad;
}

Kernel flip2d(const Kernel& k) {
  Kernel out(k.size);
  const int s = k.size;
  for (int u = 0; u < s; ++u)
    for (int v = 0; v < s; ++v) out.at(u, v) = k.at(s - 1 - u, s - 1 - v);
  return out;
}

FilterBank flip_filters(const FilterBank& bank) {
  FilterBank out(bank.size, bank.in_channels, bank.out_channels);
  const int s = bank.size;
  for (int u = 0; u < s; ++u)
    for (int v = 0; v < s; ++v)
      for (int ci = 0; ci < bank.in_channels; ++ci)
        for (int co = 0; co < bank.out_channels; ++co)
          out.at(u, v, ci, co) = bank.at(s - 1 - u, s - 1 - v, ci, co);
  return out;
}

FilterBank transpose_bank(const FilterBank& bank) {
  FilterBank out(bank.size, bank.out_channels, bank.in_channels);
  for (int u = 0; u < bank.size; ++u)
    for (int v = 0; v < bank.size; ++v)
      for (int ci = 0; ci < bank.in_channels; ++ci)
        for (int co = 0; co < bank.out_channels; ++co)
          out.at(u, v, co, ci) = bank.at(u, v, ci, co);
  return out;
}

Image correlate2d_same(const Image& x, const Kernel& k, PaddingMode mode) {
  if (x.channels != 1) throw ShapeError("correlate2d_same: expected a single-channel plane");
  if (k.size % 2 == 0) throw ValueError("correlate2d_same: kernel size must be odd");
  if (!all_finite(k.data)) throw ValueError("correlate2d_same: kernel has non-finite entries");

  FilterBank bank(k.size, 1, 1);
  bank.data = k.data;
  Image out(x.height, x.width, 1);
  bank_apply(view(x), bank, /*flip=*/false, mode, mut_view(out));
  return out;
}

FeatureMaps analysis_transform(const Image& x, const FilterBank& bank, PaddingMode mode,
                               int threads) {
  if (x.channels != bank.in_channels)
    throw ShapeError("analysis_transform: image channels do not match bank");
  FeatureMaps z(x.height, x.width, bank.out_channels);
  bank_apply(view(x), bank, /*flip=*/false, mode, mut_view(z), threads);
  return z;
}

Image synthesis_transform(const FeatureMaps& z, const FilterBank& bank, PaddingMode mode,
                          int threads) {
  if (z.maps != bank.in_channels)
    throw ShapeError("synthesis_transform: map count does not match bank");
  Image x(z.height, z.width, bank.out_channels);
  bank_apply(view(z), bank, /*flip=*/true, mode, mut_view(x), threads);
  return x;
}

FeatureMaps convolve_transform(const Image& x, const FilterBank& bank, PaddingMode mode,
                               int threads) {
  if (x.channels != bank.in_channels)
    throw ShapeError("convolve_transform: image channels do not match bank");
  FeatureMaps z(x.height, x.width, bank.out_channels);
  bank_apply(view(x), bank, /*flip=*/true, mode, mut_view(z), threads);
  return z;
}

DenseDictionary toeplitz_from_bank(const FilterBank& bank, int height, int width,
                                   PaddingMode mode, std::size_t max_entries) {
  if (height <= 0 || width <= 0) throw ShapeError("toeplitz_from_bank: bad dims");
  const int m = bank.in_channels;
  const int c = bank.out_channels;
  const std::size_t rows = static_cast<std::size_t>(height) * width * c;
  const std::size_t cols = static_cast<std::size_t>(height) * width * m;
  if (rows * cols > max_entries)
    throw ResourceError("toeplitz_from_bank: materialization exceeds entry cap");

  DenseDictionary D(static_cast<int>(rows), static_cast<int>(cols));
  FeatureMaps impulse(height, width, m);
  for (int i = 0; i < m; ++i) {
    for (int r = 0; r < height; ++r)
      for (int t = 0; t < width; ++t) {
        impulse.at(r, t, i) = 1.0;
        const Image col = synthesis_transform(impulse, bank, mode);
        impulse.at(r, t, i) = 0.0;
        const std::size_t j = (static_cast<std::size_t>(i) * height + r) * width + t;
        for (std::size_t row = 0; row < rows; ++row)
          D.data[row * cols + j] = col.data[row];
      }
  }
  return D;
}

std::vector<double> flatten_maps(const FeatureMaps& z) {
  std::vector<double> v(z.data.size());
  const std::size_t hw = static_cast<std::size_t>(z.height) * z.width;
  for (int i = 0; i < z.maps; ++i)
    for (std::size_t p = 0; p < hw; ++p) v[i * hw + p] = z.data[p * z.maps + i];
  return v;
}

FeatureMaps unflatten_maps(const std::vector<double>& v, int height, int width, int maps) {
  FeatureMaps z(height, width, maps);
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  if (v.size() != hw * maps) throw ShapeError("unflatten_maps: bad vector length");
  for (int i = 0; i < maps; ++i)
    for (std::size_t p = 0; p < hw; ++p) z.data[p * maps + i] = v[i * hw + p];
  return z;
}

std::vector<double> flatten_image(const Image& x) { return x.data; }

Image unflatten_image(const std::vector<double>& v, int height, int width, int channels) {
  Image x(height, width, channels);
  if (v.size() != x.data.size()) throw ShapeError("unflatten_image: bad vector length");
  x.data = v;
  return x;
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace acsc
