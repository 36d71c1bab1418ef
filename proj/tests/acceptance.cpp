// Acceptance suite: prints one pass/fail line per criterion and exits
// nonzero if any fail. Usage:
//   acceptance <path-to-acsc-binary> <path-to-data-dir> [criteria]
// where [criteria] is an optional comma list like "1,2,8" (default: all).

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "acsc/evaluation.hpp"
#include "acsc/loss.hpp"
#include "acsc/model.hpp"
#include "acsc/pgm.hpp"
#include "acsc/rng.hpp"
#include "acsc/solvers.hpp"
#include "acsc/training.hpp"

namespace fs = std::filesystem;
using namespace acsc;

namespace {

std::string g_acsc;
std::string g_data;
const std::string g_ws = "/tmp/acsc_acceptance";

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

int run_cmd(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

Image crop(const Image& src, int top, int left, int n) {
  Image out(n, n, 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) = src.at(top + i, left + j);
  return out;
}

Image add_noise(const Image& x, double sigma255, std::uint64_t seed) {
  Image out = x;
  Rng rng(seed);
  for (double& v : out.data) v += rng.normal(0.0, sigma255 / 255.0);
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

FeatureMaps circshift(const FeatureMaps& z, int dr, int dc) {
  FeatureMaps out(z.height, z.width, z.maps);
  for (int i = 0; i < z.height; ++i)
    for (int j = 0; j < z.width; ++j)
      for (int k = 0; k < z.maps; ++k)
        out.at((i + dr) % z.height, (j + dc) % z.width, k) = z.at(i, j, k);
  return out;
}

int train_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::min(4u, std::max(1u, hw)));
}

std::vector<Image> load_corpus_dir() {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(g_data + "/corpus"))
    if (entry.path().extension() == ".pgm") files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  std::vector<Image> corpus;
  for (const std::string& f : files) corpus.push_back(read_pgm(f));
  return corpus;
}

// Criterion 6's trained model feeds criterion 7. ACSC_ACCEPT_CACHE=1 reuses
// a model file from an earlier run (development convenience only).
std::string denoise_model_path() { return g_ws + "/denoise.acsc"; }

ModelParams train_denoise_model(std::string& detail) {
  const bool cache = std::getenv("ACSC_ACCEPT_CACHE") != nullptr;
  if (cache && fs::exists(denoise_model_path())) {
    detail += "(cached) ";
    return load_model(denoise_model_path());
  }
  TrainConfig cfg;
  cfg.task = Task::denoise;
  cfg.sigma_n = 20.0;
  cfg.patch_size = 64;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-3;
  cfg.steps = 20000;
  cfg.loss = LossKind::combined;
  cfg.alpha = 0.8;
  cfg.seed = 2024;
  cfg.filter_size = 7;
  cfg.maps = 64;
  cfg.unroll = 3;
  cfg.threads = train_threads();
  const TrainResult result = train(cfg, load_corpus_dir());
  save_model(result.params, denoise_model_path());
  return result.params;
}

// --- criteria ---------------------------------------------------------------

bool criterion1(std::string& detail) {
  const double t0 = now_seconds();
  Rng rng(1001);
  Image x(8, 8, 1);
  for (double& v : x.data) v = rng.normal();
  FilterBank bank(3, 3, 1);
  for (double& v : bank.data) v = rng.normal();

  const double L = lipschitz_upper_bound(bank, 8, 8).value;
  const ConvIstaReport conv = ista_conv(x, bank, 0.1, 50, nullptr, L);
  const DenseDictionary D = toeplitz_from_bank(bank, 8, 8);
  const DenseIstaReport dense = ista_dense(x.data, D, 0.1, 50, L);

  const std::vector<double> flat = flatten_maps(conv.code);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < flat.size(); ++i)
    max_diff = std::max(max_diff, std::abs(flat[i] - dense.code[i]));
  const double elapsed = now_seconds() - t0;

  std::ostringstream os;
  os << "max |conv - dense| = " << max_diff << ", " << elapsed << " s";
  detail = os.str();
  return max_diff <= 1e-8 && elapsed < 1.0;
}

bool criterion2(std::string& detail) {
  int violations = 0;
  for (int seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    Image x(8, 8, 1);
    for (double& v : x.data) v = rng.normal();
    FilterBank bank(3, 3, 1);
    for (double& v : bank.data) v = rng.normal();
    const double L = lipschitz_upper_bound(bank, 8, 8).value;
    const ConvIstaReport report = ista_conv(x, bank, 0.1, 40, nullptr, L);
    for (std::size_t i = 1; i < report.objective_history.size(); ++i)
      if (report.objective_history[i] > report.objective_history[i - 1] + 1e-12)
        ++violations;
  }
  detail = "descent violations: " + std::to_string(violations) + " over 10 seeds";
  return violations == 0;
}

bool criterion3(std::string& detail) {
  const double t0 = now_seconds();
  const GradCheckReport report = gradient_check(424242, 20, LossKind::l2, 0.8);
  const double elapsed = now_seconds() - t0;
  std::ostringstream os;
  os << "max rel error " << report.max_rel_error << " over " << report.nets << " nets, "
     << elapsed << " s";
  detail = os.str();
  return report.max_rel_error <= 1e-4 && elapsed < 60.0;
}

bool criterion4(std::string& detail) {
  Rng rng(4004);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 4 + static_cast<int>(rng.integer(8));
    const int w = 4 + static_cast<int>(rng.integer(8));
    const int m = 1 + static_cast<int>(rng.integer(4));
    FilterBank bank(3, m, 1);
    for (double& v : bank.data) v = rng.normal();
    Image x(h, w, 1);
    for (double& v : x.data) v = rng.normal();
    FeatureMaps z(h, w, m);
    for (double& v : z.data) v = rng.normal();

    const FeatureMaps ax = analysis_transform(x, transpose_bank(bank), PaddingMode::zero);
    const Image sz = synthesis_transform(z, bank, PaddingMode::zero);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < z.data.size(); ++i) lhs += ax.data[i] * z.data[i];
    for (std::size_t i = 0; i < x.data.size(); ++i) rhs += x.data[i] * sz.data[i];
    const double rel = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1.0});
    worst = std::max(worst, rel);
  }
  std::ostringstream os;
  os << "worst relative mismatch " << worst << " over 100 pairs";
  detail = os.str();
  return worst <= 1e-10;
}

bool criterion5(std::string& detail) {
  const double t0 = now_seconds();
  const Image target = crop(read_pgm(g_data + "/corpus/moon.pgm"), 192, 192, 64);

  TrainConfig cfg;
  cfg.task = Task::denoise;
  cfg.sigma_n = 0.0;  // pure reconstruction of the single image
  cfg.patch_size = 64;
  cfg.batch_size = 1;
  cfg.learning_rate = 1e-3;
  cfg.steps = 2000;
  cfg.loss = LossKind::l2;
  cfg.seed = 5;
  cfg.threads = 1;
  const TrainResult result = train(cfg, {target});

  const ForwardResult fr = forward(target, result.params);
  const double db = psnr(target, fr.reconstruction);
  const double elapsed = now_seconds() - t0;

  // descent on average: last hundred steps below the first hundred
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 100; ++i) head += result.loss_history[i];
  for (int i = cfg.steps - 100; i < cfg.steps; ++i) tail += result.loss_history[i];

  std::ostringstream os;
  os << "overfit PSNR " << db << " dB, mean loss " << head / 100 << " -> " << tail / 100
     << ", " << elapsed << " s single-threaded";
  detail = os.str();
  return db >= 35.0 && tail < head && elapsed < 600.0;
}

bool criterion6(std::string& detail) {
  // the corpus must offer at least 200 distinct 64x64 crop positions
  long positions = 0;
  for (const Image& img : load_corpus_dir())
    if (img.height >= 64 && img.width >= 64)
      positions += static_cast<long>(img.height - 63) * (img.width - 63);
  if (positions < 200) {
    detail = "corpus offers only " + std::to_string(positions) + " crops";
    return false;
  }

  const ModelParams model = train_denoise_model(detail);

  const Image clean = read_pgm(g_data + "/camera.pgm");
  const Image noisy = add_noise(clean, 20.0, 606);
  const double noisy_db = psnr(clean, noisy);
  const ForwardResult fr = forward(noisy, model, nullptr, PaddingMode::zero, train_threads());
  const double out_db = psnr(clean, fr.reconstruction);

  std::ostringstream os;
  os << detail << "noisy " << noisy_db << " dB -> denoised " << out_db
     << " dB (needs >= 27 and >= noisy + 4)";
  detail = os.str();
  return out_db >= 27.0 && out_db >= noisy_db + 4.0;
}

bool criterion7(std::string& detail) {
  std::string train_note;
  if (!fs::exists(denoise_model_path())) train_denoise_model(train_note);

  TrainConfig cfg;
  cfg.task = Task::inpaint;
  cfg.mask_density = 0.5;
  cfg.patch_size = 64;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-3;
  cfg.steps = 6000;
  cfg.loss = LossKind::combined;
  cfg.alpha = 0.8;
  cfg.seed = 77;
  cfg.warm_start = denoise_model_path();
  cfg.threads = train_threads();

  const bool cache = std::getenv("ACSC_ACCEPT_CACHE") != nullptr;
  const std::string inpaint_path = g_ws + "/inpaint.acsc";
  ModelParams model;
  if (cache && fs::exists(inpaint_path)) {
    detail += "(cached) ";
    model = load_model(inpaint_path);
  } else {
    const TrainResult result = train(cfg, load_corpus_dir());
    model = result.params;
    save_model(model, inpaint_path);
  }

  const Image clean = read_pgm(g_data + "/camera.pgm");
  Image mask(clean.height, clean.width, 1);
  Rng rng(707);
  for (double& v : mask.data) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  Image observed = clean;
  for (std::size_t i = 0; i < observed.data.size(); ++i)
    observed.data[i] *= mask.data[i];

  const double zero_filled_db = psnr(clean, observed);
  const ForwardResult fr = forward(observed, model, &mask, PaddingMode::zero, train_threads());
  const double out_db = psnr(clean, fr.reconstruction);

  std::ostringstream os;
  os << detail << "zero-filled " << zero_filled_db << " dB -> inpainted " << out_db
     << " dB (needs >= zero-filled + 5)";
  detail = os.str();
  return out_db >= zero_filled_db + 5.0;
}

bool criterion8(std::string& detail) {
  const ModelParams p = init_params(808, 7, 64, 1, 3);
  // benchmark_forward itself verifies the outputs are identical across reps
  const BenchmarkStats stats = benchmark_forward(p, 512, 512, 3, 1);
  std::ostringstream os;
  os << "512x512 forward mean " << stats.mean_seconds << " s single-threaded over "
     << stats.reps << " reps";
  detail = os.str();
  return stats.mean_seconds <= 5.0;
}

bool criterion9(std::string& detail) {
  Rng rng(909);
  const ModelParams p = init_params(909, 7, 16, 1, 3);
  Image x(32, 48, 1);
  for (double& v : x.data) v = rng.uniform();

  const ForwardResult base = forward(x, p, nullptr, PaddingMode::circular);
  const ForwardResult shifted =
      forward(circshift(x, 5, 7), p, nullptr, PaddingMode::circular);
  const FeatureMaps want_code = circshift(base.code, 5, 7);
  const Image want_rec = circshift(base.reconstruction, 5, 7);

  double worst = 0.0;
  for (std::size_t i = 0; i < want_code.data.size(); ++i)
    worst = std::max(worst, std::abs(want_code.data[i] - shifted.code.data[i]));
  for (std::size_t i = 0; i < want_rec.data.size(); ++i)
    worst = std::max(worst, std::abs(want_rec.data[i] - shifted.reconstruction.data[i]));
  std::ostringstream os;
  os << "max |shifted - reference| = " << worst;
  detail = os.str();
  return worst <= 1e-10;
}

bool criterion10(std::string& detail) {
  Rng rng(1010);
  Image x(64, 64, 1);
  for (double& v : x.data) v = rng.uniform();

  const double self = ms_ssim(x, x);
  bool ok = std::abs(self - 1.0) <= 1e-12;
  for (double alpha : {0.0, 0.8, 1.0}) ok = ok && combined_loss(x, x, alpha) == 0.0;

  Image off = x;
  for (double& v : off.data) v += 20.0 / 255.0;
  const double db = psnr(x, off);
  ok = ok && std::abs(db - 22.11) <= 0.01;

  std::ostringstream os;
  os << "ms_ssim(x,x) = " << self << ", uniform-error PSNR = " << db;
  detail = os.str();
  return ok;
}

bool criterion11(std::string& detail) {
  const ModelParams p = init_params(1111, 5, 6, 1, 3);
  const std::string path = g_ws + "/persist.acsc";
  save_model(p, path);
  const ModelParams q = load_model(path);
  const bool ok = q.w_e.data == p.w_e.data && q.w_d.data == p.w_d.data &&
                  q.theta == p.theta && q.d.data == p.d.data && q.K == p.K;

  const std::string bytes = slurp(path);
  bool magic_ok = false;
  {
    std::string broken = bytes;
    broken[0] = 'X';
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(broken.data(), static_cast<std::streamsize>(broken.size()));
    f.close();
    try {
      (void)load_model(path);
    } catch (const FormatError&) {
      magic_ok = true;
    } catch (...) {
    }
  }
  bool trunc_ok = false;
  {
    const std::string broken = bytes.substr(0, bytes.size() - 64);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(broken.data(), static_cast<std::streamsize>(broken.size()));
    f.close();
    try {
      (void)load_model(path);
    } catch (const CorruptionError&) {
      trunc_ok = true;
    } catch (...) {
    }
  }
  detail = std::string("round trip ") + (ok ? "bit-exact" : "BROKEN") + ", bad magic " +
           (magic_ok ? "rejected" : "ACCEPTED") + ", truncation " +
           (trunc_ok ? "rejected" : "ACCEPTED");
  return ok && magic_ok && trunc_ok;
}

bool criterion12(std::string& detail) {
  const std::string flags =
      " --task denoise --steps 30 --seed 42 --patch 24 --batch 2 --loss l2"
      " --filter-size 5 --maps 8 --unroll 2 --sigma 20 --corpus " + g_data + "/corpus";
  const std::string m1 = g_ws + "/det1.acsc", m2 = g_ws + "/det2.acsc";
  const std::string l1 = g_ws + "/det1.csv", l2 = g_ws + "/det2.csv";
  const int r1 = run_cmd(g_acsc + " train --out " + m1 + " --log " + l1 + flags + " > /dev/null");
  const int r2 = run_cmd(g_acsc + " train --out " + m2 + " --log " + l2 + flags + " > /dev/null");
  const bool models_equal = slurp(m1) == slurp(m2) && !slurp(m1).empty();
  const bool logs_equal = slurp(l1) == slurp(l2) && !slurp(l1).empty();
  std::ostringstream os;
  os << "exit codes " << r1 << "/" << r2 << ", models "
     << (models_equal ? "identical" : "DIFFER") << ", logs "
     << (logs_equal ? "identical" : "DIFFER");
  detail = os.str();
  return r1 == 0 && r2 == 0 && models_equal && logs_equal;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance <acsc-binary> <data-dir> [criteria]\n");
    return 2;
  }
  g_acsc = argv[1];
  g_data = argv[2];
  fs::create_directories(g_ws);

  std::set<int> wanted;
  if (argc >= 4) {
    std::stringstream ss(argv[3]);
    std::string tok;
    while (std::getline(ss, tok, ',')) wanted.insert(std::atoi(tok.c_str()));
  }

  struct Criterion {
    int id;
    const char* name;
    std::function<bool(std::string&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "conv/dense ISTA oracle equivalence", criterion1},
      {2, "monotone objective descent", criterion2},
      {3, "gradient correctness vs finite differences", criterion3},
      {4, "analysis/synthesis adjointness", criterion4},
      {5, "single-image overfit to 35 dB", criterion5},
      {6, "desk-scale denoising on the held-out image", criterion6},
      {7, "desk-scale inpainting with a warm start", criterion7},
      {8, "512x512 single-thread forward runtime", criterion8},
      {9, "circular-mode shift equivariance", criterion9},
      {10, "metric sanity", criterion10},
      {11, "model persistence and corruption handling", criterion11},
      {12, "bit-identical training runs via the CLI", criterion12},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %2d: %s — %s\n", ok ? "PASS" : "FAIL", c.id, c.name,
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
