#pragma once

#include "acsc/tensor.hpp"

namespace acsc {

enum class LossKind { l1, l2, combined };

// Mean over all entries of |x - xhat| (l1) or 0.5*(x - xhat)^2 (l2).
// Rejects LossKind::combined; that mix lives in combined_loss.
double pixel_loss(const Image& x, const Image& xhat, LossKind kind);

// Largest scale count <= requested that the image supports with the 11x11
// window (min dim >= 11 * 2^(scales-1)). Throws SizeError when even one
// scale does not fit.
int effective_msssim_scales(int height, int width, int requested);

// Multiscale SSIM with an 11x11 Gaussian window (sigma 1.5), stabilizers
// C1 = 0.01^2 and C2 = 0.03^2 for unit peak, contrast/structure at every
// scale and the luminance term at the coarsest. Scale weights are the
// standard five-scale vector truncated and renormalized. The requested
// scale count is silently reduced when the image is too small (callers that
// want to warn can compare against effective_msssim_scales). Multi-channel
// images score each channel independently and average.
double ms_ssim(const Image& x, const Image& y, int scales = 3);

// alpha * (1 - ms_ssim) + (1 - alpha) * mean |x - xhat|.
double combined_loss(const Image& x, const Image& xhat, double alpha, int scales = 3);

struct LossGrad {
  double value = 0.0;
  Image grad;  // d(loss)/d(xhat)
};

// Loss value together with its exact reverse-mode gradient in the
// reconstruction. The MS-SSIM part differentiates through the Gaussian
// pyramid; the l1 subgradient at zero is 0.
LossGrad loss_with_grad(const Image& target, const Image& xhat, LossKind kind,
                        double alpha, int msssim_scales = 3);

}  // namespace acsc
