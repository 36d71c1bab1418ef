#include "acsc/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <thread>

#include "acsc/solvers.hpp"

namespace acsc {

ParamGrads ParamGrads::zeros_like(const ModelParams& p) {
  ParamGrads g;
  g.w_e = FilterBank(p.size(), p.channels(), p.maps());
  g.w_d = FilterBank(p.size(), p.maps(), p.channels());
  g.d = FilterBank(p.size(), p.maps(), p.channels());
  g.theta.assign(p.maps(), 0.0);
  return g;
}

void ParamGrads::accumulate(const ParamGrads& other) {
  for (std::size_t i = 0; i < w_e.data.size(); ++i) w_e.data[i] += other.w_e.data[i];
  for (std::size_t i = 0; i < w_d.data.size(); ++i) w_d.data[i] += other.w_d.data[i];
  for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] += other.d.data[i];
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += other.theta[i];
}

void ParamGrads::scale(double a) {
  for (double& v : w_e.data) v *= a;
  for (double& v : w_d.data) v *= a;
  for (double& v : d.data) v *= a;
  for (double& v : theta) v *= a;
}

AdamState AdamState::zeros_like(const ModelParams& p) {
  AdamState st;
  st.m_w_e = FilterBank(p.size(), p.channels(), p.maps());
  st.v_w_e = st.m_w_e;
  st.m_w_d = FilterBank(p.size(), p.maps(), p.channels());
  st.v_w_d = st.m_w_d;
  st.m_d = st.m_w_d;
  st.v_d = st.m_w_d;
  st.m_theta.assign(p.maps(), 0.0);
  st.v_theta.assign(p.maps(), 0.0);
  st.t = 0;
  return st;
}

void TrainConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0) throw ValueError("TrainConfig: alpha must be in [0,1]");
  if (mask_density <= 0.0 || mask_density >= 1.0)
    throw ValueError("TrainConfig: mask_density must be in (0,1)");
  if (sigma_n < 0.0) throw ValueError("TrainConfig: sigma_n must be >= 0");
  if (patch_size < 1 || batch_size < 1) throw ValueError("TrainConfig: bad batch geometry");
  if (steps < 0) throw ValueError("TrainConfig: steps must be >= 0");
  if (learning_rate <= 0.0) throw ValueError("TrainConfig: learning rate must be positive");
  if (filter_size % 2 == 0) throw ValueError("TrainConfig: filter size must be odd");
  if (maps < 1 || channels < 1 || unroll < 1) throw ValueError("TrainConfig: bad model shape");
  if (threads < 1) throw ValueError("TrainConfig: threads must be >= 1");
}

std::vector<Sample> make_batch(const std::vector<Image>& corpus, const TrainConfig& cfg,
                               Rng& rng) {
  if (corpus.empty()) throw DataError("make_batch: empty corpus");
  std::vector<int> eligible;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (corpus[i].height >= cfg.patch_size && corpus[i].width >= cfg.patch_size)
      eligible.push_back(static_cast<int>(i));
  if (eligible.empty())
    throw DataError("make_batch: no corpus image is at least patch_size in both dims");

  const int ps = cfg.patch_size;
  const double noise_std = cfg.sigma_n / 255.0;
  std::vector<Sample> batch(cfg.batch_size);
  for (Sample& sample : batch) {
    const Image& src = corpus[eligible[rng.integer(eligible.size())]];
    const int top = static_cast<int>(rng.integer(src.height - ps + 1));
    const int left = static_cast<int>(rng.integer(src.width - ps + 1));
    Image target(ps, ps, src.channels);
    for (int i = 0; i < ps; ++i)
      for (int j = 0; j < ps; ++j)
        for (int c = 0; c < src.channels; ++c)
          target.at(i, j, c) = src.at(top + i, left + j, c);

    if (cfg.task == Task::denoise) {
      sample.input = target;
      for (double& v : sample.input.data) v += rng.normal(0.0, noise_std);
    } else {
      sample.has_mask = true;
      sample.mask = Image(ps, ps, src.channels);
      for (double& v : sample.mask.data) v = rng.bernoulli(cfg.mask_density) ? 1.0 : 0.0;
      sample.input = target;
      for (std::size_t i = 0; i < sample.input.data.size(); ++i)
        sample.input.data[i] *= sample.mask.data[i];
    }
    sample.target = std::move(target);
  }
  return batch;
}

namespace {

// Reverse-mode pass for one sample. Forward state comes from the encode
// trace; gradients flow loss -> decoder -> unrolled iterations.
void backward_sample(const Sample& sample, const ModelParams& p, LossKind kind,
                     double alpha, PaddingMode mode, const FilterBank& w_e_t,
                     const FilterBank& w_d_t, const FilterBank& d_t, ParamGrads& out,
                     double& loss_out) {
  const Image* mask = sample.has_mask ? &sample.mask : nullptr;
  EncodeTrace trace;
  const FeatureMaps code = encode(sample.input, p, mask, mode, &trace);
  const Image xhat = decode(code, p, mode);

  const LossGrad lg = loss_with_grad(sample.target, xhat, kind, alpha);
  loss_out = lg.value;

  const int H = xhat.height, W = xhat.width;
  const int m = p.maps(), c = p.channels(), s = p.size();

  // decoder: xhat = conv(code, d)
  out.d = bank_grad(view(code), view(lg.grad), s, /*flip=*/true, mode);
  FeatureMaps g_code(H, W, m);
  bank_apply(view(lg.grad), d_t, /*flip=*/false, mode, mut_view(g_code));

  FeatureMaps gu(H, W, m);
  Image g_resid(H, W, c);
  Image g_ahat(H, W, c);
  FeatureMaps g_prev(H, W, m);

  out.w_e = FilterBank(s, c, m);
  out.w_d = FilterBank(s, m, c);
  out.theta.assign(m, 0.0);

  for (int k = p.K - 1; k >= 0; --k) {
    const EncodeTrace::Step& step = trace.steps[k];

    // through the soft threshold: derivative 1 strictly beyond theta, else 0
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j)
        for (int f = 0; f < m; ++f) {
          const double u = step.pre_activation.at(i, j, f);
          if (std::abs(u) > p.theta[f]) {
            const double g = g_code.at(i, j, f);
            gu.at(i, j, f) = g;
            out.theta[f] -= (u > 0.0 ? 1.0 : -1.0) * g;
          } else {
            gu.at(i, j, f) = 0.0;
          }
        }

    // update = code_in + conv(masked_residual, w_e)
    const FilterBank we_g =
        bank_grad(view(step.masked_residual), view(gu), s, /*flip=*/true, mode);
    for (std::size_t i = 0; i < out.w_e.data.size(); ++i) out.w_e.data[i] += we_g.data[i];

    bank_apply(view(gu), w_e_t, /*flip=*/false, mode, mut_view(g_resid));
    if (mask)
      for (std::size_t i = 0; i < g_resid.data.size(); ++i)
        g_resid.data[i] *= mask->data[i];

    // residual = x - conv(code_in, w_d)
    for (std::size_t i = 0; i < g_ahat.data.size(); ++i) g_ahat.data[i] = -g_resid.data[i];
    const FilterBank wd_g = bank_grad(view(step.code_in), view(g_ahat), s, /*flip=*/true, mode);
    for (std::size_t i = 0; i < out.w_d.data.size(); ++i) out.w_d.data[i] += wd_g.data[i];

    bank_apply(view(g_ahat), w_d_t, /*flip=*/false, mode, mut_view(g_prev));
    for (std::size_t i = 0; i < g_code.data.size(); ++i)
      g_code.data[i] = gu.data[i] + g_prev.data[i];
  }
}

void check_group_finite(const std::vector<double>& v, const char* name) {
  if (!all_finite(v))
    throw NumericError(std::string("backward: non-finite gradient for ") + name);
}

}  // namespace

BackwardResult backward(const std::vector<Sample>& batch, const ModelParams& p,
                        LossKind kind, double alpha, PaddingMode mode, int threads) {
  if (batch.empty()) throw DataError("backward: empty batch");
  p.validate();

  const FilterBank w_e_t = transpose_bank(p.w_e);
  const FilterBank w_d_t = transpose_bank(p.w_d);
  const FilterBank d_t = transpose_bank(p.d);

  const int n = static_cast<int>(batch.size());
  std::vector<ParamGrads> grads(n);
  std::vector<double> losses(n, 0.0);

  auto run_range = [&](int begin, int stride) {
    for (int i = begin; i < n; i += stride)
      backward_sample(batch[i], p, kind, alpha, mode, w_e_t, w_d_t, d_t, grads[i],
                      losses[i]);
  };

  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    run_range(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) pool.emplace_back(run_range, t, workers);
    for (auto& th : pool) th.join();
  }

  BackwardResult out;
  out.grads = std::move(grads[0]);
  for (int i = 1; i < n; ++i) out.grads.accumulate(grads[i]);  // fixed order
  out.grads.scale(1.0 / n);
  for (double l : losses) out.loss += l;
  out.loss /= n;

  check_group_finite(out.grads.w_e.data, "w_e");
  check_group_finite(out.grads.w_d.data, "w_d");
  check_group_finite(out.grads.theta, "theta");
  check_group_finite(out.grads.d.data, "d");
  return out;
}

namespace {

void adam_update(std::vector<double>& w, const std::vector<double>& g,
                 std::vector<double>& m, std::vector<double>& v, double lr, double beta1,
                 double beta2, double eps, double bc1, double bc2) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace

void adam_step(ModelParams& p, const ParamGrads& g, AdamState& st, double lr,
               double beta1, double beta2, double eps) {
  if (g.w_e.data.size() != p.w_e.data.size() || g.w_d.data.size() != p.w_d.data.size() ||
      g.d.data.size() != p.d.data.size() || g.theta.size() != p.theta.size())
    throw ShapeError("adam_step: gradient shapes do not match parameters");
  if (!all_finite(g.w_e.data) || !all_finite(g.w_d.data) || !all_finite(g.d.data) ||
      !all_finite(g.theta))
    throw NumericError("adam_step: non-finite gradient");

  st.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  adam_update(p.w_e.data, g.w_e.data, st.m_w_e.data, st.v_w_e.data, lr, beta1, beta2, eps,
              bc1, bc2);
  adam_update(p.w_d.data, g.w_d.data, st.m_w_d.data, st.v_w_d.data, lr, beta1, beta2, eps,
              bc1, bc2);
  adam_update(p.d.data, g.d.data, st.m_d.data, st.v_d.data, lr, beta1, beta2, eps, bc1, bc2);
  adam_update(p.theta, g.theta, st.m_theta, st.v_theta, lr, beta1, beta2, eps, bc1, bc2);
  for (double& t : p.theta) t = std::max(t, 0.0);  // projection onto theta >= 0
}

TrainResult train(const TrainConfig& cfg, const std::vector<Image>& corpus,
                  std::ostream* log) {
  cfg.validate();
  if (corpus.empty()) throw DataError("train: empty corpus");

  int undersized = 0;
  for (const Image& img : corpus)
    if (img.height < cfg.patch_size || img.width < cfg.patch_size) ++undersized;
  if (undersized == static_cast<int>(corpus.size()))
    throw DataError("train: no corpus image is at least patch_size in both dims");
  if (undersized > 0)
    std::cerr << "train: skipping " << undersized
              << " corpus image(s) smaller than the patch size\n";

  TrainResult result;
  if (cfg.warm_start.empty()) {
    result.params =
        init_params(cfg.seed, cfg.filter_size, cfg.maps, cfg.channels, cfg.unroll);
  } else {
    result.params = load_model(cfg.warm_start);
  }

  if (cfg.loss == LossKind::combined) {
    const int eff = effective_msssim_scales(cfg.patch_size, cfg.patch_size, 3);
    if (eff < 3)
      std::cerr << "train: ms_ssim reduced to " << eff << " scale(s) for "
                << cfg.patch_size << "px patches\n";
  }

  AdamState state = AdamState::zeros_like(result.params);
  Rng rng(cfg.seed);
  result.loss_history.reserve(cfg.steps);

  if (log) *log << "step,loss\n";
  for (int step = 0; step < cfg.steps; ++step) {
    const std::vector<Sample> batch = make_batch(corpus, cfg, rng);
    const BackwardResult br =
        backward(batch, result.params, cfg.loss, cfg.alpha, cfg.padding, cfg.threads);
    if (!std::isfinite(br.loss))
      throw NumericError("train: non-finite loss at step " + std::to_string(step));
    adam_step(result.params, br.grads, state, cfg.learning_rate);
    result.loss_history.push_back(br.loss);
    if (log) *log << step << ',' << br.loss << '\n';
  }
  return result;
}

GradCheckReport gradient_check(std::uint64_t seed, int nets, LossKind kind, double alpha) {
  GradCheckReport report;
  report.nets = nets;
  Rng rng(seed);

  for (int net = 0; net < nets; ++net) {
    const int h = 3 + static_cast<int>(rng.integer(2));
    const int w = 3 + static_cast<int>(rng.integer(2));
    ModelParams p = init_params(rng.bits(), 3, 2, 1, 2);
    for (double& v : p.w_e.data) v = 0.3 * rng.normal();
    for (double& v : p.w_d.data) v = 0.3 * rng.normal();
    for (double& v : p.d.data) v = 0.3 * rng.normal();
    for (double& t : p.theta) t = 0.05 + 0.1 * rng.uniform();

    Sample sample;
    sample.target = Image(h, w, 1);
    for (double& v : sample.target.data) v = rng.normal();
    sample.input = Image(h, w, 1);
    for (double& v : sample.input.data) v = rng.normal();
    if (net % 2 == 1) {
      sample.has_mask = true;
      sample.mask = Image(h, w, 1);
      for (double& v : sample.mask.data) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    const std::vector<Sample> batch = {sample};

    const BackwardResult br = backward(batch, p, kind, alpha);

    auto loss_at = [&](const ModelParams& q) {
      const Image* mask = sample.has_mask ? &sample.mask : nullptr;
      const Image xhat = decode(encode(sample.input, q, mask), q);
      if (kind == LossKind::combined) return combined_loss(sample.target, xhat, alpha);
      return pixel_loss(sample.target, xhat, kind);
    };

    auto check_entry = [&](double* slot, double analytic) {
      const double w0 = *slot;
      const double step = 1e-6 * std::max(1.0, std::abs(w0));
      *slot = w0 + step;
      const double fp = loss_at(p);
      *slot = w0 - step;
      const double fm = loss_at(p);
      *slot = w0;
      const double numeric = (fp - fm) / (2.0 * step);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
      report.max_rel_error =
          std::max(report.max_rel_error, std::abs(analytic - numeric) / denom);
    };

    for (std::size_t i = 0; i < p.w_e.data.size(); ++i)
      check_entry(&p.w_e.data[i], br.grads.w_e.data[i]);
    for (std::size_t i = 0; i < p.w_d.data.size(); ++i)
      check_entry(&p.w_d.data[i], br.grads.w_d.data[i]);
    for (std::size_t i = 0; i < p.d.data.size(); ++i)
      check_entry(&p.d.data[i], br.grads.d.data[i]);
    for (std::size_t i = 0; i < p.theta.size(); ++i)
      check_entry(&p.theta[i], br.grads.theta[i]);
  }
  return report;
}

}  // namespace acsc
