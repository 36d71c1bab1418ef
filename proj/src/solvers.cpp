#include "acsc/solvers.hpp"

#include <algorithm>
#include <cmath>

#include "acsc/rng.hpp"

namespace acsc {

namespace {

std::vector<double> matvec(const DenseDictionary& D, const std::vector<double>& v) {
  std::vector<double> out(D.rows, 0.0);
  for (int r = 0; r < D.rows; ++r) {
    const double* row = D.data.data() + static_cast<std::size_t>(r) * D.cols;
    double sum = 0.0;
    for (int c = 0; c < D.cols; ++c) sum += row[c] * v[c];
    out[r] = sum;
  }
  return out;
}

std::vector<double> matvec_t(const DenseDictionary& D, const std::vector<double>& v) {
  std::vector<double> out(D.cols, 0.0);
  for (int r = 0; r < D.rows; ++r) {
    const double* row = D.data.data() + static_cast<std::size_t>(r) * D.cols;
    const double vr = v[r];
    for (int c = 0; c < D.cols; ++c) out[c] += row[c] * vr;
  }
  return out;
}

double norm2(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

double dense_largest_eig(const DenseDictionary& D, int iters, double tol) {
  Rng rng(0x706f7765);  // fixed probe; the estimate must be reproducible
  std::vector<double> z(D.cols);
  for (double& v : z) v = rng.normal();
  double est = 0.0;
  for (int k = 0; k < iters; ++k) {
    const double nz = norm2(z);
    if (nz == 0.0) return 0.0;
    for (double& v : z) v /= nz;
    z = matvec_t(D, matvec(D, z));
    const double next = norm2(z);
    if (k > 0 && std::abs(next - est) <= tol * std::max(next, 1e-300)) return next;
    est = next;
  }
  return est;
}

void validate_mask(const Image& x, const Image& mask) {
  if (!mask.same_shape(x)) throw ShapeError("mask dims do not match image");
  for (double v : mask.data)
    if (v != 0.0 && v != 1.0) throw ValueError("mask entries must be exactly 0 or 1");
}

}  // namespace

std::vector<double> soft_threshold(const std::vector<double>& v, double theta) {
  if (theta < 0.0) throw ValueError("soft_threshold: negative threshold");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]) - theta;
    out[i] = a > 0.0 ? (v[i] > 0.0 ? a : -a) : 0.0;
  }
  return out;
}

FeatureMaps soft_threshold(const FeatureMaps& z, const std::vector<double>& theta) {
  FeatureMaps out = z;
  soft_threshold_inplace(out, theta);
  return out;
}

void soft_threshold_inplace(FeatureMaps& z, const std::vector<double>& theta) {
  if (static_cast<int>(theta.size()) != z.maps)
    throw ShapeError("soft_threshold: one threshold per map required");
  for (double t : theta)
    if (t < 0.0) throw ValueError("soft_threshold: negative threshold");
  const int m = z.maps;
  const std::size_t pixels = z.data.size() / m;
  double* p = z.data.data();
  for (std::size_t px = 0; px < pixels; ++px, p += m)
    for (int i = 0; i < m; ++i) {
      const double a = std::abs(p[i]) - theta[i];
      p[i] = a > 0.0 ? (p[i] > 0.0 ? a : -a) : 0.0;
    }
}

LipschitzEstimate lipschitz_upper_bound(const FilterBank& bank, int probe_h, int probe_w,
                                        int iters, double tol) {
  if (probe_h <= 0 || probe_w <= 0) throw ShapeError("lipschitz_upper_bound: bad probe dims");
  if (iters < 1) throw ValueError("lipschitz_upper_bound: iters must be >= 1");

  const FilterBank bank_t = transpose_bank(bank);
  Rng rng(0x4c697073);
  FeatureMaps z(probe_h, probe_w, bank.in_channels);
  for (double& v : z.data) v = rng.normal();

  LipschitzEstimate out;
  double est = 0.0;
  for (int k = 0; k < iters; ++k) {
    const double nz = norm2(z.data);
    if (nz == 0.0) {
      out.iterations = k;
      out.converged = true;  // operator annihilates the probe
      out.value = 0.0;
      return out;
    }
    for (double& v : z.data) v /= nz;
    z = analysis_transform(synthesis_transform(z, bank), bank_t);
    const double next = norm2(z.data);
    out.iterations = k + 1;
    if (k > 0 && std::abs(next - est) <= tol * std::max(next, 1e-300)) {
      out.converged = true;
      out.value = 1.01 * next;
      return out;
    }
    est = next;
  }
  out.value = 1.01 * est;
  return out;
}

DenseIstaReport ista_dense(const std::vector<double>& x, const DenseDictionary& D,
                           double lambda, int max_iters, std::optional<double> L) {
  if (lambda < 0.0) throw ValueError("ista_dense: negative lambda");
  if (static_cast<int>(x.size()) != D.rows) throw ShapeError("ista_dense: x length != rows");

  double step_bound = L ? *L : 1.01 * dense_largest_eig(D, 1000, 1e-12);
  if (!(step_bound > 0.0)) throw ValueError("ista_dense: step bound must be positive");
  const double inv_l = 1.0 / step_bound;
  const double theta = lambda * inv_l;

  DenseIstaReport report;
  std::vector<double> z(D.cols, 0.0);
  report.objective_history.push_back(dense_objective(x, D, z, lambda));

  for (int k = 0; k < max_iters; ++k) {
    std::vector<double> resid = matvec(D, z);
    for (int r = 0; r < D.rows; ++r) resid[r] = x[r] - resid[r];
    const std::vector<double> grad = matvec_t(D, resid);
    std::vector<double> pre(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) pre[i] = z[i] + inv_l * grad[i];
    std::vector<double> z_new = soft_threshold(pre, theta);

    double delta = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
      delta = std::max(delta, std::abs(z_new[i] - z[i]));
    z = std::move(z_new);
    report.iterations_run = k + 1;
    report.objective_history.push_back(dense_objective(x, D, z, lambda));
    if (delta < 1e-10) {
      report.converged = true;
      break;
    }
  }
  report.code = std::move(z);
  return report;
}

ConvIstaReport ista_conv(const Image& x, const FilterBank& bank, double lambda,
                         int max_iters, const Image* mask, std::optional<double> L,
                         PaddingMode mode) {
  if (lambda < 0.0) throw ValueError("ista_conv: negative lambda");
  if (x.channels != bank.out_channels)
    throw ShapeError("ista_conv: image channels do not match bank");
  if (mask) validate_mask(x, *mask);

  double step_bound = L ? *L : lipschitz_upper_bound(bank, x.height, x.width).value;
  if (!(step_bound > 0.0)) throw ValueError("ista_conv: step bound must be positive");
  const double inv_l = 1.0 / step_bound;
  const int m = bank.in_channels;
  const std::vector<double> theta(m, lambda * inv_l);
  const FilterBank bank_t = transpose_bank(bank);

  ConvIstaReport report;
  FeatureMaps z(x.height, x.width, m);
  Image xhat = synthesis_transform(z, bank, mode);
  report.objective_history.push_back(csc_objective(x, z, bank, lambda, mask, mode));

  for (int k = 0; k < max_iters; ++k) {
    Image resid(x.height, x.width, x.channels);
    for (std::size_t i = 0; i < resid.data.size(); ++i)
      resid.data[i] = x.data[i] - xhat.data[i];
    if (mask)
      for (std::size_t i = 0; i < resid.data.size(); ++i) resid.data[i] *= mask->data[i];

    const FeatureMaps grad = analysis_transform(resid, bank_t, mode);
    FeatureMaps z_new(z.height, z.width, m);
    for (std::size_t i = 0; i < z.data.size(); ++i)
      z_new.data[i] = z.data[i] + inv_l * grad.data[i];
    soft_threshold_inplace(z_new, theta);

    double delta = 0.0;
    for (std::size_t i = 0; i < z.data.size(); ++i)
      delta = std::max(delta, std::abs(z_new.data[i] - z.data[i]));
    z = std::move(z_new);
    xhat = synthesis_transform(z, bank, mode);

    report.iterations_run = k + 1;
    double obj = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      double r = x.data[i] - xhat.data[i];
      if (mask) r *= mask->data[i];
      obj += 0.5 * r * r;
    }
    for (double v : z.data) obj += lambda * std::abs(v);
    report.objective_history.push_back(obj);
    if (delta < 1e-10) {
      report.converged = true;
      break;
    }
  }
  report.code = std::move(z);
  return report;
}

double csc_objective(const Image& x, const FeatureMaps& z, const FilterBank& bank,
                     double lambda, const Image* mask, PaddingMode mode) {
  if (z.height != x.height || z.width != x.width)
    throw ShapeError("csc_objective: spatial dims do not match");
  if (mask) validate_mask(x, *mask);
  const Image xhat = synthesis_transform(z, bank, mode);
  if (!xhat.same_shape(x)) throw ShapeError("csc_objective: bank output does not match x");
  double obj = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    double r = x.data[i] - xhat.data[i];
    if (mask) r *= mask->data[i];
    obj += 0.5 * r * r;
  }
  for (double v : z.data) obj += lambda * std::abs(v);
  return obj;
}

double dense_objective(const std::vector<double>& x, const DenseDictionary& D,
                       const std::vector<double>& z, double lambda) {
  const std::vector<double> xhat = matvec(D, z);
  double obj = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x[i] - xhat[i];
    obj += 0.5 * r * r;
  }
  for (double v : z) obj += lambda * std::abs(v);
  return obj;
}

}  // namespace acsc
