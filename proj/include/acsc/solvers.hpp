#pragma once

#include <optional>
#include <vector>

#include "acsc/tensor.hpp"

namespace acsc {

// Result of an ISTA run. objective_history[0] is the objective at the zero
// start; one entry is appended after every iteration, so with a valid step
// bound the sequence is non-increasing end to end. iterations_run counts
// executed iterations, including the final one that triggers the stopping
// rule by leaving the code unchanged.
struct DenseIstaReport {
  std::vector<double> code;
  std::vector<double> objective_history;
  int iterations_run = 0;
  bool converged = false;
};

struct ConvIstaReport {
  FeatureMaps code;
  std::vector<double> objective_history;
  int iterations_run = 0;
  bool converged = false;
};

struct LipschitzEstimate {
  double value = 0.0;  // dominant-eigenvalue estimate times a 1.01 safety factor
  int iterations = 0;
  bool converged = false;
};

// Elementwise sign(v) * max(|v| - theta, 0). Ties |v| == theta map to exactly
// zero. theta must be nonnegative.
std::vector<double> soft_threshold(const std::vector<double>& v, double theta);

// Per-map thresholds, broadcast over each map's pixels.
FeatureMaps soft_threshold(const FeatureMaps& z, const std::vector<double>& theta);

// In-place per-map variant used by the solver and encoder inner loops.
void soft_threshold_inplace(FeatureMaps& z, const std::vector<double>& theta);

// Upper bound on the largest eigenvalue of the synthesis-then-analysis
// composition for the bank (the D^T D of the equivalent dense dictionary),
// estimated by power iteration on a probe_h x probe_w grid and inflated by
// 1.01 so it is a usable ISTA step bound. Non-convergence within iters
// returns the best estimate with converged == false.
LipschitzEstimate lipschitz_upper_bound(const FilterBank& bank, int probe_h, int probe_w,
                                        int iters = 200, double tol = 1e-10);

// Classical ISTA for 0.5*||x - D z||^2 + lambda*||z||_1 from z = 0.
// Stops when the code changes by less than 1e-10 in the infinity norm.
// When L is absent it is computed from D by power iteration.
DenseIstaReport ista_dense(const std::vector<double>& x, const DenseDictionary& D,
                           double lambda, int max_iters,
                           std::optional<double> L = std::nullopt);

// Convolutional ISTA over the bank (synthesis orientation: in = maps,
// out = image channels). With a mask, the residual is masked elementwise
// before the analysis step and inside the objective. Mask entries must be
// exactly 0 or 1.
ConvIstaReport ista_conv(const Image& x, const FilterBank& bank, double lambda,
                         int max_iters, const Image* mask = nullptr,
                         std::optional<double> L = std::nullopt,
                         PaddingMode mode = PaddingMode::zero);

// 0.5*||x - synthesis(z)||^2 + lambda * sum_i ||z_i||_1, residual masked
// elementwise when a mask is given.
double csc_objective(const Image& x, const FeatureMaps& z, const FilterBank& bank,
                     double lambda, const Image* mask = nullptr,
                     PaddingMode mode = PaddingMode::zero);

// 0.5*||x - D z||^2 + lambda*||z||_1.
double dense_objective(const std::vector<double>& x, const DenseDictionary& D,
                       const std::vector<double>& z, double lambda);

}  // namespace acsc
