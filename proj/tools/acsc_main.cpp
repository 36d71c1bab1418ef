// Command-line front end: training, inference, and reporting for the
// convolutional sparse coding toolkit. Exit codes: 0 success, 2 usage or
// missing/unreadable input, 3 numeric failure, 4 shape mismatch.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "acsc/evaluation.hpp"
#include "acsc/model.hpp"
#include "acsc/pgm.hpp"
#include "acsc/rng.hpp"
#include "acsc/solvers.hpp"
#include "acsc/training.hpp"

namespace fs = std::filesystem;
using namespace acsc;

namespace {

PaddingMode parse_padding(const std::string& name) {
  if (name == "zero") return PaddingMode::zero;
  if (name == "circular") return PaddingMode::circular;
  throw ValueError("unknown padding mode: " + name);
}

LossKind parse_loss(const std::string& name) {
  if (name == "l1") return LossKind::l1;
  if (name == "l2") return LossKind::l2;
  if (name == "combined") return LossKind::combined;
  throw ValueError("unknown loss kind: " + name);
}

std::vector<std::string> list_pgms(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<Image> load_corpus(const std::string& dir) {
  std::vector<Image> corpus;
  for (const std::string& f : list_pgms(dir)) corpus.push_back(read_pgm(f));
  if (corpus.empty()) throw DataError("no .pgm images in " + dir);
  return corpus;
}

Image bernoulli_mask(int height, int width, std::uint64_t seed, double density) {
  Image mask(height, width, 1);
  Rng rng(seed);
  for (double& v : mask.data) v = rng.bernoulli(density) ? 1.0 : 0.0;
  return mask;
}

Image binarize_mask(const Image& raw) {
  Image mask = raw;
  for (double& v : mask.data) v = v >= 0.5 ? 1.0 : 0.0;
  return mask;
}

struct TrainArgs {
  TrainConfig cfg;
  std::string task = "denoise";
  std::string loss = "combined";
  std::string padding = "zero";
  std::string corpus_dir;
  std::string out_path;
  std::string log_path;
};

int run_train(TrainArgs& args) {
  args.cfg.task = args.task == "inpaint" ? Task::inpaint : Task::denoise;
  args.cfg.loss = parse_loss(args.loss);
  args.cfg.padding = parse_padding(args.padding);

  const std::vector<Image> corpus = load_corpus(args.corpus_dir);

  std::ofstream log;
  if (!args.log_path.empty()) {
    log.open(args.log_path, std::ios::trunc);
    if (!log) throw IoError("cannot open log file " + args.log_path);
  }
  const TrainResult result = train(args.cfg, corpus, log.is_open() ? &log : nullptr);
  save_model(result.params, args.out_path);
  std::cout << "trained " << args.cfg.steps << " steps; model written to "
            << args.out_path << "\n";
  return 0;
}

struct ApplyArgs {
  std::string mode = "denoise";
  std::string model_path, in_path, out_path, ref_path, mask_path;
  std::string padding = "zero";
  std::uint64_t mask_seed = 0;
  bool has_mask_seed = false;
  double density = 0.5;
  int threads = 1;
};

int run_apply(ApplyArgs& args) {
  const ModelParams params = load_model(args.model_path);
  Image input = read_pgm(args.in_path);
  const PaddingMode mode = parse_padding(args.padding);

  Image mask;
  bool use_mask = false;
  if (args.mode == "inpaint") {
    if (!args.mask_path.empty()) {
      mask = binarize_mask(read_pgm(args.mask_path));
    } else if (args.has_mask_seed) {
      mask = bernoulli_mask(input.height, input.width, args.mask_seed, args.density);
    } else {
      throw ValueError("inpaint mode needs --mask or --mask-seed");
    }
    if (!mask.same_shape(input)) throw ShapeError("mask dims do not match input image");
    use_mask = true;
    // zero out unobserved pixels; a no-op when the input is already masked
    for (std::size_t i = 0; i < input.data.size(); ++i) input.data[i] *= mask.data[i];
  } else if (args.mode != "denoise") {
    throw ValueError("unknown apply mode: " + args.mode);
  }

  const ForwardResult fr =
      forward(input, params, use_mask ? &mask : nullptr, mode, args.threads);
  write_pgm(fr.reconstruction, args.out_path);

  if (!args.ref_path.empty()) {
    const Image ref = read_pgm(args.ref_path);
    std::printf("input_psnr,output_psnr\n%.4f,%.4f\n", psnr(ref, input),
                psnr(ref, fr.reconstruction));
  }
  return 0;
}

struct ReportArgs {
  std::string model_path, dir, out_path, in_path, ref_path;
  std::string task = "denoise";
  double sigma = 20.0;
  double density = 0.5;
  std::uint64_t seed = 0;
  int size = 512;
  int reps = 5;
  int threads = 1;
  int separator = 1;
  int nets = 20;
  double lambda = 0.1;
  int iters = 100;
};

int run_report_eval(ReportArgs& args) {
  const ModelParams params = load_model(args.model_path);
  const std::vector<std::string> files = list_pgms(args.dir);
  if (files.empty()) throw DataError("no .pgm images in " + args.dir);

  std::printf("image,input_psnr,output_psnr\n");
  std::uint64_t file_index = 0;
  for (const std::string& file : files) {
    const Image clean = read_pgm(file);
    Image degraded = clean;
    const Image* mask_ptr = nullptr;
    Image mask;
    if (args.task == "denoise") {
      Rng rng(args.seed + file_index);
      for (double& v : degraded.data) v += rng.normal(0.0, args.sigma / 255.0);
    } else if (args.task == "inpaint") {
      mask = bernoulli_mask(clean.height, clean.width, args.seed + file_index,
                            args.density);
      for (std::size_t i = 0; i < degraded.data.size(); ++i)
        degraded.data[i] *= mask.data[i];
      mask_ptr = &mask;
    } else {
      throw ValueError("unknown eval task: " + args.task);
    }
    const ForwardResult fr =
        forward(degraded, params, mask_ptr, PaddingMode::zero, args.threads);
    std::printf("%s,%.4f,%.4f\n", fs::path(file).filename().string().c_str(),
                psnr(clean, degraded), psnr(clean, fr.reconstruction));
    ++file_index;
  }
  return 0;
}

int run_report_bench(ReportArgs& args) {
  const ModelParams params = load_model(args.model_path);
  const BenchmarkStats stats =
      benchmark_forward(params, args.size, args.size, args.reps, args.threads);
  std::cout << stats.csv_header() << "\n" << stats.csv_line() << "\n";
  return 0;
}

int run_report_mosaic(ReportArgs& args) {
  const ModelParams params = load_model(args.model_path);
  write_pgm(dictionary_mosaic(params, args.separator), args.out_path);
  return 0;
}

int run_report_gradcheck(ReportArgs& args) {
  const GradCheckReport report = gradient_check(args.seed, args.nets);
  std::printf("nets,max_rel_error\n%d,%.3e\n", report.nets, report.max_rel_error);
  return report.max_rel_error <= 1e-4 ? 0 : 1;
}

// Classical convolutional ISTA baseline over a trained model's decoder
// dictionary; lambda is free here.
int run_report_ista(ReportArgs& args) {
  const ModelParams params = load_model(args.model_path);
  Image input = read_pgm(args.in_path);

  Image mask;
  const Image* mask_ptr = nullptr;
  if (args.task == "inpaint") {
    mask = bernoulli_mask(input.height, input.width, args.seed, args.density);
    for (std::size_t i = 0; i < input.data.size(); ++i) input.data[i] *= mask.data[i];
    mask_ptr = &mask;
  }

  const ConvIstaReport report = ista_conv(input, params.d, args.lambda, args.iters, mask_ptr);
  const Image rec = synthesis_transform(report.code, params.d);
  if (!args.out_path.empty()) write_pgm(rec, args.out_path);

  std::printf("iterations,converged,final_objective");
  if (!args.ref_path.empty()) std::printf(",input_psnr,output_psnr");
  std::printf("\n%d,%d,%.8e", report.iterations_run, report.converged ? 1 : 0,
              report.objective_history.back());
  if (!args.ref_path.empty()) {
    const Image ref = read_pgm(args.ref_path);
    std::printf(",%.4f,%.4f", psnr(ref, input), psnr(ref, rec));
  }
  std::printf("\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convolutional sparse coding toolkit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* cmd_train = app.add_subcommand("train", "train a model on a corpus directory");
  cmd_train->add_option("--task", train_args.task, "denoise or inpaint")
      ->check(CLI::IsMember({"denoise", "inpaint"}));
  cmd_train->add_option("--corpus", train_args.corpus_dir, "directory of .pgm images")
      ->required();
  cmd_train->add_option("--out", train_args.out_path, "output model path")->required();
  cmd_train->add_option("--steps", train_args.cfg.steps, "training steps")->required();
  cmd_train->add_option("--seed", train_args.cfg.seed, "rng seed");
  cmd_train->add_option("--lr", train_args.cfg.learning_rate, "Adam learning rate");
  cmd_train->add_option("--batch", train_args.cfg.batch_size, "batch size");
  cmd_train->add_option("--patch", train_args.cfg.patch_size, "square patch size");
  cmd_train->add_option("--sigma", train_args.cfg.sigma_n, "noise std in 0..255 units");
  cmd_train->add_option("--density", train_args.cfg.mask_density, "mask keep probability");
  cmd_train->add_option("--alpha", train_args.cfg.alpha, "ms_ssim weight in the loss");
  cmd_train->add_option("--loss", train_args.loss, "l1, l2 or combined")
      ->check(CLI::IsMember({"l1", "l2", "combined"}));
  cmd_train->add_option("--warm-start", train_args.cfg.warm_start, "model file to resume");
  cmd_train->add_option("--log", train_args.log_path, "write step,loss CSV here");
  cmd_train->add_option("--threads", train_args.cfg.threads, "batch worker threads");
  cmd_train->add_option("--padding", train_args.padding, "zero or circular")
      ->check(CLI::IsMember({"zero", "circular"}));
  cmd_train->add_option("--filter-size", train_args.cfg.filter_size, "filter side s");
  cmd_train->add_option("--maps", train_args.cfg.maps, "dictionary atom count m");
  cmd_train->add_option("--unroll", train_args.cfg.unroll, "encoder iterations K");

  ApplyArgs apply_args;
  CLI::App* cmd_apply = app.add_subcommand("apply", "run a model on one image");
  cmd_apply->add_option("--mode", apply_args.mode, "denoise or inpaint")
      ->check(CLI::IsMember({"denoise", "inpaint"}));
  cmd_apply->add_option("--model", apply_args.model_path)->required();
  cmd_apply->add_option("--in", apply_args.in_path, "input image (pgm)")->required();
  cmd_apply->add_option("--out", apply_args.out_path, "output image (pgm)")->required();
  cmd_apply->add_option("--ref", apply_args.ref_path, "clean reference for PSNR");
  cmd_apply->add_option("--mask", apply_args.mask_path, "observation mask (pgm)");
  cmd_apply->add_option("--mask-seed", apply_args.mask_seed, "generate a Bernoulli mask")
      ->each([&](const std::string&) { apply_args.has_mask_seed = true; });
  cmd_apply->add_option("--density", apply_args.density, "mask keep probability");
  cmd_apply->add_option("--threads", apply_args.threads);
  cmd_apply->add_option("--padding", apply_args.padding)
      ->check(CLI::IsMember({"zero", "circular"}));

  ReportArgs report_args;
  CLI::App* cmd_report = app.add_subcommand("report", "evaluation and developer checks");
  cmd_report->require_subcommand(1);

  CLI::App* rep_eval = cmd_report->add_subcommand("eval", "PSNR table over a directory");
  rep_eval->add_option("--model", report_args.model_path)->required();
  rep_eval->add_option("--dir", report_args.dir, "directory of clean .pgm images")
      ->required();
  rep_eval->add_option("--task", report_args.task)
      ->check(CLI::IsMember({"denoise", "inpaint"}));
  rep_eval->add_option("--sigma", report_args.sigma);
  rep_eval->add_option("--density", report_args.density);
  rep_eval->add_option("--seed", report_args.seed, "degradation seed");
  rep_eval->add_option("--threads", report_args.threads);

  CLI::App* rep_bench = cmd_report->add_subcommand("bench", "forward-pass timing");
  rep_bench->add_option("--model", report_args.model_path)->required();
  rep_bench->add_option("--size", report_args.size, "square image side");
  rep_bench->add_option("--reps", report_args.reps);
  rep_bench->add_option("--threads", report_args.threads);

  CLI::App* rep_mosaic = cmd_report->add_subcommand("mosaic", "dictionary atom mosaic");
  rep_mosaic->add_option("--model", report_args.model_path)->required();
  rep_mosaic->add_option("--out", report_args.out_path)->required();
  rep_mosaic->add_option("--separator", report_args.separator);

  CLI::App* rep_grad = cmd_report->add_subcommand("gradcheck", "finite-difference suite");
  rep_grad->add_option("--seed", report_args.seed);
  rep_grad->add_option("--nets", report_args.nets);

  CLI::App* rep_ista = cmd_report->add_subcommand("ista", "classical ISTA baseline");
  rep_ista->add_option("--model", report_args.model_path, "model supplying the dictionary")
      ->required();
  rep_ista->add_option("--in", report_args.in_path)->required();
  rep_ista->add_option("--out", report_args.out_path);
  rep_ista->add_option("--ref", report_args.ref_path);
  rep_ista->add_option("--lambda", report_args.lambda);
  rep_ista->add_option("--iters", report_args.iters);
  rep_ista->add_option("--task", report_args.task)
      ->check(CLI::IsMember({"denoise", "inpaint"}));
  rep_ista->add_option("--seed", report_args.seed);
  rep_ista->add_option("--density", report_args.density);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_train->parsed()) return run_train(train_args);
    if (cmd_apply->parsed()) return run_apply(apply_args);
    if (cmd_report->parsed()) {
      if (rep_eval->parsed()) return run_report_eval(report_args);
      if (rep_bench->parsed()) return run_report_bench(report_args);
      if (rep_mosaic->parsed()) return run_report_mosaic(report_args);
      if (rep_grad->parsed()) return run_report_gradcheck(report_args);
      if (rep_ista->parsed()) return run_report_ista(report_args);
    }
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
