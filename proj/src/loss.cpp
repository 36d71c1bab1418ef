#include "acsc/loss.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace acsc {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
// Standard five-scale weights; truncated prefixes are renormalized to sum 1.
constexpr std::array<double, 5> kScaleWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
// Factors are floored here before exponentiation so a degenerate negative
// covariance cannot turn the product into a NaN; the floored branch carries
// zero gradient.
constexpr double kFactorFloor = 1e-12;

struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0.0) {}
  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * w + j]; }
  double at(int i, int j) const { return v[static_cast<std::size_t>(i) * w + j]; }
};

const std::vector<double>& gaussian_window() {
  static const std::vector<double> win = [] {
    std::vector<double> g1(kWindow);
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - (kWindow - 1) / 2.0;
      g1[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      sum += g1[i];
    }
    for (double& v : g1) v /= sum;
    std::vector<double> g2(static_cast<std::size_t>(kWindow) * kWindow);
    for (int i = 0; i < kWindow; ++i)
      for (int j = 0; j < kWindow; ++j) g2[static_cast<std::size_t>(i) * kWindow + j] = g1[i] * g1[j];
    return g2;
  }();
  return win;
}

// Valid-mode correlation with the window: out is (h-10) x (w-10).
Plane window_corr(const Plane& x) {
  const std::vector<double>& g = gaussian_window();
  Plane out(x.h - kWindow + 1, x.w - kWindow + 1);
  for (int i = 0; i < out.h; ++i)
    for (int j = 0; j < out.w; ++j) {
      double sum = 0.0;
      for (int a = 0; a < kWindow; ++a) {
        const double* row = &x.v[static_cast<std::size_t>(i + a) * x.w + j];
        const double* gr = &g[static_cast<std::size_t>(a) * kWindow];
        for (int b = 0; b < kWindow; ++b) sum += row[b] * gr[b];
      }
      out.at(i, j) = sum;
    }
  return out;
}

// Adjoint of window_corr: scatters a valid-grid gradient back to h x w.
Plane window_corr_adjoint(const Plane& g_out, int h, int w) {
  const std::vector<double>& g = gaussian_window();
  Plane out(h, w);
  for (int i = 0; i < g_out.h; ++i)
    for (int j = 0; j < g_out.w; ++j) {
      const double gv = g_out.at(i, j);
      if (gv == 0.0) continue;
      for (int a = 0; a < kWindow; ++a) {
        double* row = &out.v[static_cast<std::size_t>(i + a) * w + j];
        const double* gr = &g[static_cast<std::size_t>(a) * kWindow];
        for (int b = 0; b < kWindow; ++b) row[b] += gv * gr[b];
      }
    }
  return out;
}

// 2x2 mean pooling with stride 2; trailing odd row/column are dropped.
Plane pool2(const Plane& x) {
  Plane out(x.h / 2, x.w / 2);
  for (int i = 0; i < out.h; ++i)
    for (int j = 0; j < out.w; ++j)
      out.at(i, j) = 0.25 * (x.at(2 * i, 2 * j) + x.at(2 * i, 2 * j + 1) +
                             x.at(2 * i + 1, 2 * j) + x.at(2 * i + 1, 2 * j + 1));
  return out;
}

Plane pool2_adjoint(const Plane& g, int h, int w) {
  Plane out(h, w);
  for (int i = 0; i < g.h; ++i)
    for (int j = 0; j < g.w; ++j) {
      const double v = 0.25 * g.at(i, j);
      out.at(2 * i, 2 * j) += v;
      out.at(2 * i, 2 * j + 1) += v;
      out.at(2 * i + 1, 2 * j) += v;
      out.at(2 * i + 1, 2 * j + 1) += v;
    }
  return out;
}

double plane_mean(const Plane& x) {
  double sum = 0.0;
  for (double v : x.v) sum += v;
  return sum / static_cast<double>(x.v.size());
}

struct ScaleData {
  Plane a, b;
  Plane mu_a, mu_b, sa, sb, sab, cs_map, l_map;
  double cs = 0.0, lum = 0.0;
};

// Forward pass over one channel pair; fills per-scale state for backward.
double msssim_forward(const Plane& a0, const Plane& b0, int scales,
                      std::vector<ScaleData>& stack, std::vector<double>& weights) {
  weights.assign(kScaleWeights.begin(), kScaleWeights.begin() + scales);
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  for (double& w : weights) w /= wsum;

  stack.clear();
  stack.resize(scales);
  Plane a = a0, b = b0;
  for (int j = 0; j < scales; ++j) {
    ScaleData& sd = stack[j];
    sd.a = a;
    sd.b = b;
    sd.mu_a = window_corr(a);
    sd.mu_b = window_corr(b);

    Plane aa(a.h, a.w), bb(a.h, a.w), ab(a.h, a.w);
    for (std::size_t i = 0; i < a.v.size(); ++i) {
      aa.v[i] = a.v[i] * a.v[i];
      bb.v[i] = b.v[i] * b.v[i];
      ab.v[i] = a.v[i] * b.v[i];
    }
    sd.sa = window_corr(aa);
    sd.sb = window_corr(bb);
    sd.sab = window_corr(ab);
    for (std::size_t i = 0; i < sd.sa.v.size(); ++i) {
      sd.sa.v[i] -= sd.mu_a.v[i] * sd.mu_a.v[i];
      sd.sb.v[i] -= sd.mu_b.v[i] * sd.mu_b.v[i];
      sd.sab.v[i] -= sd.mu_a.v[i] * sd.mu_b.v[i];
    }

    sd.cs_map = Plane(sd.sa.h, sd.sa.w);
    for (std::size_t i = 0; i < sd.cs_map.v.size(); ++i)
      sd.cs_map.v[i] = (2.0 * sd.sab.v[i] + kC2) / (sd.sa.v[i] + sd.sb.v[i] + kC2);
    sd.cs = plane_mean(sd.cs_map);

    if (j == scales - 1) {
      sd.l_map = Plane(sd.mu_a.h, sd.mu_a.w);
      for (std::size_t i = 0; i < sd.l_map.v.size(); ++i)
        sd.l_map.v[i] = (2.0 * sd.mu_a.v[i] * sd.mu_b.v[i] + kC1) /
                        (sd.mu_a.v[i] * sd.mu_a.v[i] + sd.mu_b.v[i] * sd.mu_b.v[i] + kC1);
      sd.lum = plane_mean(sd.l_map);
    } else {
      a = pool2(a);
      b = pool2(b);
    }
  }

  double value = 1.0;
  for (int j = 0; j < scales; ++j)
    value *= std::pow(std::max(stack[j].cs, kFactorFloor), weights[j]);
  value *= std::pow(std::max(stack[scales - 1].lum, kFactorFloor),
                    weights[scales - 1]);
  return value;
}

// Reverse pass: d(value)/d(a0), d(value)/d(b0) scaled by upstream.
void msssim_backward(const std::vector<ScaleData>& stack, const std::vector<double>& weights,
                     double value, double upstream, Plane& ga0, Plane& gb0) {
  const int scales = static_cast<int>(stack.size());

  Plane carry_a, carry_b;  // gradient w.r.t. the scale-j inputs from coarser scales
  for (int j = scales - 1; j >= 0; --j) {
    const ScaleData& sd = stack[j];
    const std::size_t n = sd.cs_map.v.size();

    // d(value)/d(cs_j); zero when the factor sat on the floor
    double dcs = 0.0;
    if (sd.cs > kFactorFloor) dcs = upstream * value * weights[j] / sd.cs;
    double dlum = 0.0;
    if (j == scales - 1 && sd.lum > kFactorFloor)
      dlum = upstream * value * weights[j] / sd.lum;

    Plane g_sa(sd.sa.h, sd.sa.w), g_sb(sd.sa.h, sd.sa.w), g_sab(sd.sa.h, sd.sa.w);
    Plane g_mu_a(sd.sa.h, sd.sa.w), g_mu_b(sd.sa.h, sd.sa.w);

    const double per_px = dcs / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double denom = sd.sa.v[i] + sd.sb.v[i] + kC2;
      g_sab.v[i] = per_px * 2.0 / denom;
      const double dden = -per_px * sd.cs_map.v[i] / denom;
      g_sa.v[i] = dden;
      g_sb.v[i] = dden;
    }

    if (j == scales - 1) {
      const double per_lpx = dlum / static_cast<double>(sd.l_map.v.size());
      for (std::size_t i = 0; i < n; ++i) {
        const double denom = sd.mu_a.v[i] * sd.mu_a.v[i] + sd.mu_b.v[i] * sd.mu_b.v[i] + kC1;
        g_mu_a.v[i] += per_lpx * 2.0 * (sd.mu_b.v[i] - sd.l_map.v[i] * sd.mu_a.v[i]) / denom;
        g_mu_b.v[i] += per_lpx * 2.0 * (sd.mu_a.v[i] - sd.l_map.v[i] * sd.mu_b.v[i]) / denom;
      }
    }

    // variance/covariance terms: s = corr(prod) - mu products
    for (std::size_t i = 0; i < n; ++i) {
      g_mu_a.v[i] += -2.0 * sd.mu_a.v[i] * g_sa.v[i] - sd.mu_b.v[i] * g_sab.v[i];
      g_mu_b.v[i] += -2.0 * sd.mu_b.v[i] * g_sb.v[i] - sd.mu_a.v[i] * g_sab.v[i];
    }

    const Plane g_aa = window_corr_adjoint(g_sa, sd.a.h, sd.a.w);
    const Plane g_bb = window_corr_adjoint(g_sb, sd.a.h, sd.a.w);
    const Plane g_ab = window_corr_adjoint(g_sab, sd.a.h, sd.a.w);
    Plane ga = window_corr_adjoint(g_mu_a, sd.a.h, sd.a.w);
    Plane gb = window_corr_adjoint(g_mu_b, sd.a.h, sd.a.w);
    for (std::size_t i = 0; i < ga.v.size(); ++i) {
      ga.v[i] += 2.0 * sd.a.v[i] * g_aa.v[i] + sd.b.v[i] * g_ab.v[i];
      gb.v[i] += 2.0 * sd.b.v[i] * g_bb.v[i] + sd.a.v[i] * g_ab.v[i];
    }

    if (j < scales - 1) {
      // contributions flowing back from coarser scales through the pooling
      for (std::size_t i = 0; i < ga.v.size(); ++i) {
        ga.v[i] += carry_a.v[i];
        gb.v[i] += carry_b.v[i];
      }
    }
    if (j > 0) {
      carry_a = pool2_adjoint(ga, stack[j - 1].a.h, stack[j - 1].a.w);
      carry_b = pool2_adjoint(gb, stack[j - 1].a.h, stack[j - 1].a.w);
    } else {
      ga0 = std::move(ga);
      gb0 = std::move(gb);
    }
  }
}

Plane extract_channel(const Image& x, int c) {
  Plane p(x.height, x.width);
  for (int i = 0; i < x.height; ++i)
    for (int j = 0; j < x.width; ++j) p.at(i, j) = x.at(i, j, c);
  return p;
}

}  // namespace

double pixel_loss(const Image& x, const Image& xhat, LossKind kind) {
  if (!x.same_shape(xhat)) throw ShapeError("pixel_loss: shape mismatch");
  if (kind == LossKind::combined)
    throw ValueError("pixel_loss: use combined_loss for the mixed objective");
  const double n = static_cast<double>(x.data.size());
  double sum = 0.0;
  if (kind == LossKind::l1) {
    for (std::size_t i = 0; i < x.data.size(); ++i) sum += std::abs(x.data[i] - xhat.data[i]);
  } else {
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      const double d = x.data[i] - xhat.data[i];
      sum += 0.5 * d * d;
    }
  }
  return sum / n;
}

int effective_msssim_scales(int height, int width, int requested) {
  if (requested < 1) throw ValueError("ms_ssim: scales must be >= 1");
  const int mindim = std::min(height, width);
  if (mindim < kWindow) throw SizeError("ms_ssim: image smaller than the 11x11 window");
  int scales = requested;
  while (scales > 1 && mindim < kWindow * (1 << (scales - 1))) --scales;
  return scales;
}

double ms_ssim(const Image& x, const Image& y, int scales) {
  if (!x.same_shape(y)) throw ShapeError("ms_ssim: shape mismatch");
  const int eff = effective_msssim_scales(x.height, x.width, scales);
  std::vector<ScaleData> stack;
  std::vector<double> weights;
  double total = 0.0;
  for (int c = 0; c < x.channels; ++c)
    total += msssim_forward(extract_channel(x, c), extract_channel(y, c), eff, stack, weights);
  return total / x.channels;
}

double combined_loss(const Image& x, const Image& xhat, double alpha, int scales) {
  if (alpha < 0.0 || alpha > 1.0) throw ValueError("combined_loss: alpha must be in [0,1]");
  return alpha * (1.0 - ms_ssim(x, xhat, scales)) +
         (1.0 - alpha) * pixel_loss(x, xhat, LossKind::l1);
}

LossGrad loss_with_grad(const Image& target, const Image& xhat, LossKind kind,
                        double alpha, int msssim_scales) {
  if (!target.same_shape(xhat)) throw ShapeError("loss_with_grad: shape mismatch");
  LossGrad out;
  out.grad = Image(xhat.height, xhat.width, xhat.channels);
  const double n = static_cast<double>(xhat.data.size());

  if (kind == LossKind::l2) {
    double sum = 0.0;
    for (std::size_t i = 0; i < xhat.data.size(); ++i) {
      const double d = xhat.data[i] - target.data[i];
      sum += 0.5 * d * d;
      out.grad.data[i] = d / n;
    }
    out.value = sum / n;
    return out;
  }

  // l1 term (used alone or inside the combination)
  double l1_sum = 0.0;
  Image l1_grad(xhat.height, xhat.width, xhat.channels);
  for (std::size_t i = 0; i < xhat.data.size(); ++i) {
    const double d = xhat.data[i] - target.data[i];
    l1_sum += std::abs(d);
    l1_grad.data[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
  }
  const double l1_value = l1_sum / n;

  if (kind == LossKind::l1) {
    out.value = l1_value;
    out.grad = std::move(l1_grad);
    return out;
  }

  if (alpha < 0.0 || alpha > 1.0) throw ValueError("loss_with_grad: alpha must be in [0,1]");
  const int eff = effective_msssim_scales(xhat.height, xhat.width, msssim_scales);
  const int c = xhat.channels;
  double ms_total = 0.0;
  std::vector<ScaleData> stack;
  std::vector<double> weights;
  for (int ch = 0; ch < c; ++ch) {
    const Plane a = extract_channel(target, ch);
    const Plane b = extract_channel(xhat, ch);
    const double value = msssim_forward(a, b, eff, stack, weights);
    ms_total += value;
    Plane ga, gb;
    // d(loss)/d(ms per channel) = -alpha / c
    msssim_backward(stack, weights, value, -alpha / c, ga, gb);
    for (int i = 0; i < xhat.height; ++i)
      for (int j = 0; j < xhat.width; ++j)
        out.grad.at(i, j, ch) = gb.at(i, j) + (1.0 - alpha) * l1_grad.at(i, j, ch);
  }
  out.value = alpha * (1.0 - ms_total / c) + (1.0 - alpha) * l1_value;
  return out;
}

}  // namespace acsc
