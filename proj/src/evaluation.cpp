#include "acsc/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "acsc/rng.hpp"

namespace acsc {

std::string BenchmarkStats::csv_header() const {
  return "mean_seconds,std_seconds,reps,height,width,threads";
}

std::string BenchmarkStats::csv_line() const {
  std::ostringstream out;
  out << mean_seconds << ',' << std_seconds << ',' << reps << ',' << height << ','
      << width << ',' << thread_count;
  return out.str();
}

double psnr(const Image& reference, const Image& test, double peak) {
  if (!reference.same_shape(test)) throw ShapeError("psnr: shape mismatch");
  if (peak <= 0.0) throw ValueError("psnr: peak must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < reference.data.size(); ++i) {
    const double d = reference.data[i] - test.data[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(reference.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

BenchmarkStats benchmark_forward(const ModelParams& p, int height, int width, int reps,
                                 int threads) {
  if (reps < 1) throw ValueError("benchmark_forward: reps must be >= 1");
  p.validate();

  Rng rng(0xbe9c);
  Image x(height, width, p.channels());
  for (double& v : x.data) v = rng.uniform();

  std::vector<double> times;
  times.reserve(reps);
  std::vector<double> first_output;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const ForwardResult fr = forward(x, p, nullptr, PaddingMode::zero, threads);
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
    if (r == 0) {
      first_output = fr.reconstruction.data;
    } else if (fr.reconstruction.data != first_output) {
      throw NumericError("benchmark_forward: output changed between repetitions");
    }
  }

  const std::size_t skip = reps >= 3 ? 1 : 0;  // warm-up pass
  const std::size_t n = times.size() - skip;
  double mean = 0.0;
  for (std::size_t i = skip; i < times.size(); ++i) mean += times[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = skip; i < times.size(); ++i)
    var += (times[i] - mean) * (times[i] - mean);
  var = n > 1 ? var / static_cast<double>(n - 1) : 0.0;

  BenchmarkStats stats;
  stats.mean_seconds = mean;
  stats.std_seconds = std::sqrt(var);
  stats.reps = static_cast<int>(n);
  stats.height = height;
  stats.width = width;
  stats.thread_count = threads;
  return stats;
}

Image dictionary_mosaic(const ModelParams& p, int separator) {
  if (separator < 0) throw ValueError("dictionary_mosaic: negative separator");
  const int m = p.maps();
  const int s = p.size();
  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));
  const int side = grid * s + (grid + 1) * separator;

  Image out(side, side, 1);
  for (double& v : out.data) v = 0.5;  // gutters and unused cells

  for (int atom = 0; atom < m; ++atom) {
    const int gi = atom / grid;
    const int gj = atom % grid;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int u = 0; u < s; ++u)
      for (int v = 0; v < s; ++v) {
        const double val = p.d.at(u, v, atom, 0);
        lo = std::min(lo, val);
        hi = std::max(hi, val);
      }
    const double range = hi - lo;
    const int top = separator + gi * (s + separator);
    const int left = separator + gj * (s + separator);
    for (int u = 0; u < s; ++u)
      for (int v = 0; v < s; ++v) {
        const double val = p.d.at(u, v, atom, 0);
        out.at(top + u, left + v) = range > 0.0 ? (val - lo) / range : 0.0;
      }
  }
  return out;
}

namespace {

constexpr int kLcnWindow = 9;
constexpr double kLcnSigma = 2.0;

const std::vector<double>& lcn_window() {
  static const std::vector<double> win = [] {
    std::vector<double> g1(kLcnWindow);
    for (int i = 0; i < kLcnWindow; ++i) {
      const double d = i - (kLcnWindow - 1) / 2.0;
      g1[i] = std::exp(-d * d / (2.0 * kLcnSigma * kLcnSigma));
    }
    std::vector<double> g2(static_cast<std::size_t>(kLcnWindow) * kLcnWindow);
    for (int i = 0; i < kLcnWindow; ++i)
      for (int j = 0; j < kLcnWindow; ++j)
        g2[static_cast<std::size_t>(i) * kLcnWindow + j] = g1[i] * g1[j];
    return g2;
  }();
  return win;
}

}  // namespace

ContrastNormalization local_contrast_normalize(const Image& x, double eps) {
  if (x.channels != 1) throw ShapeError("local_contrast_normalize: expected one channel");
  if (x.height < kLcnWindow || x.width < kLcnWindow)
    throw SizeError("local_contrast_normalize: image smaller than the 9x9 window");
  if (eps <= 0.0) throw ValueError("local_contrast_normalize: eps must be positive");

  const std::vector<double>& g = lcn_window();
  const int half = kLcnWindow / 2;
  ContrastNormalization out;
  out.local_mean = Image(x.height, x.width, 1);
  out.local_std = Image(x.height, x.width, 1);
  out.normalized = Image(x.height, x.width, 1);

  for (int i = 0; i < x.height; ++i)
    for (int j = 0; j < x.width; ++j) {
      double wsum = 0.0, mean = 0.0;
      for (int a = 0; a < kLcnWindow; ++a) {
        const int r = i + a - half;
        if (r < 0 || r >= x.height) continue;
        for (int b = 0; b < kLcnWindow; ++b) {
          const int c = j + b - half;
          if (c < 0 || c >= x.width) continue;
          const double w = g[static_cast<std::size_t>(a) * kLcnWindow + b];
          wsum += w;
          mean += w * x.at(r, c);
        }
      }
      mean /= wsum;
      double var = 0.0;
      for (int a = 0; a < kLcnWindow; ++a) {
        const int r = i + a - half;
        if (r < 0 || r >= x.height) continue;
        for (int b = 0; b < kLcnWindow; ++b) {
          const int c = j + b - half;
          if (c < 0 || c >= x.width) continue;
          const double w = g[static_cast<std::size_t>(a) * kLcnWindow + b];
          const double d = x.at(r, c) - mean;
          var += w * d * d;
        }
      }
      var /= wsum;
      const double sd = std::sqrt(std::max(var, 0.0));
      out.local_mean.at(i, j) = mean;
      out.local_std.at(i, j) = sd;
      out.normalized.at(i, j) = (x.at(i, j) - mean) / (sd + eps);
    }
  return out;
}

Image contrast_denormalize(const Image& normalized, const Image& local_mean,
                           const Image& local_std, double eps) {
  if (!normalized.same_shape(local_mean) || !normalized.same_shape(local_std))
    throw ShapeError("contrast_denormalize: map dims do not match");
  Image out = normalized;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = out.data[i] * (local_std.data[i] + eps) + local_mean.data[i];
  return out;
}

}  // namespace acsc
