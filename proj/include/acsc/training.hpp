#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "acsc/loss.hpp"
#include "acsc/model.hpp"
#include "acsc/rng.hpp"

namespace acsc {

// Gradient of the batch loss, one block per trainable group.
struct ParamGrads {
  FilterBank w_e, w_d, d;
  std::vector<double> theta;

  static ParamGrads zeros_like(const ModelParams& p);
  void accumulate(const ParamGrads& other);
  void scale(double a);
};

// Adam first/second moment accumulators plus the step counter.
struct AdamState {
  FilterBank m_w_e, v_w_e, m_w_d, v_w_d, m_d, v_d;
  std::vector<double> m_theta, v_theta;
  long long t = 0;

  static AdamState zeros_like(const ModelParams& p);
};

enum class Task { denoise, inpaint };

struct TrainConfig {
  Task task = Task::denoise;
  double sigma_n = 20.0;      // noise std in 0..255 units
  double mask_density = 0.5;  // Bernoulli keep probability for inpainting
  int patch_size = 64;
  int batch_size = 8;
  double learning_rate = 1e-3;
  int steps = 0;
  double alpha = 0.8;
  LossKind loss = LossKind::combined;
  std::uint64_t seed = 0;
  std::string warm_start;  // model file to resume from; empty = fresh init

  // fresh-init model shape
  int filter_size = 7;
  int maps = 64;
  int channels = 1;
  int unroll = 3;

  int threads = 1;  // batch samples processed in parallel
  PaddingMode padding = PaddingMode::zero;

  void validate() const;
};

// One training example. For inpainting the input is the masked target and
// the mask rides along for the encoder; for denoising there is no mask and
// the input carries additive Gaussian noise.
struct Sample {
  Image input;
  Image target;
  bool has_mask = false;
  Image mask;
};

// Random patch batch. Corpus images smaller than the patch are ignored;
// throws DataError when none qualify. Targets are crops of the corpus
// (expected to be normalized to [0,1] already); the draw order is fixed, so
// a given rng state fully determines the batch.
std::vector<Sample> make_batch(const std::vector<Image>& corpus, const TrainConfig& cfg,
                               Rng& rng);

struct BackwardResult {
  ParamGrads grads;
  double loss = 0.0;
};

// Exact reverse-mode gradient of the mean batch loss with respect to all
// four parameter groups, differentiating through the K unrolled iterations.
// The soft-threshold derivative is 1 strictly beyond the threshold and 0 at
// or inside it. threads > 1 spreads samples over workers; the reduction
// order is fixed, so results do not depend on the thread count.
BackwardResult backward(const std::vector<Sample>& batch, const ModelParams& p,
                        LossKind kind, double alpha,
                        PaddingMode mode = PaddingMode::zero, int threads = 1);

// Standard Adam with bias correction; thresholds are clamped to >= 0
// afterwards and the step counter advances.
void adam_step(ModelParams& p, const ParamGrads& g, AdamState& st, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_history;
};

// Full loop: init (or warm start), then cfg.steps batches through backward
// and adam_step. Emits "step,loss" CSV rows to log when given. Deterministic
// in (seed, config, corpus). A non-finite loss aborts with NumericError
// naming the step.
TrainResult train(const TrainConfig& cfg, const std::vector<Image>& corpus,
                  std::ostream* log = nullptr);

struct GradCheckReport {
  double max_rel_error = 0.0;
  int nets = 0;
};

// Compares backward against central finite differences of the forward loss
// on `nets` random tiny networks (images up to 4x4, s=3, m=2, K=2, half of
// them masked). Relative error uses max(|analytic|, |numeric|, 1e-4) as the
// denominator so round-off on near-zero entries is not amplified.
GradCheckReport gradient_check(std::uint64_t seed, int nets,
                               LossKind kind = LossKind::l2, double alpha = 0.8);

}  // namespace acsc
