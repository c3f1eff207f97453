// lfbm command-line tool. Diagnostics go to stderr; stdout lists the paths of
// the files each command writes, one per line.
//
// exit codes: 0 ok, 1 internal error, 2 config error, 3 data error,
//             4 numeric failure

#include "lfbm/checkpoint.hpp"
#include "lfbm/config.hpp"
#include "lfbm/error.hpp"
#include "lfbm/tasks.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace lfbm;

namespace {

constexpr std::uint64_t kDataStream = 0xda7a;

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

void emit(const std::string& path) { std::cout << path << '\n'; }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

// Square images are exported as PGM grids, anything else as CSV points.
std::optional<int> image_side(int dim) {
  const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
  if (s > 1 && s * s == dim) return s;
  return std::nullopt;
}

Dataset run_dataset(const RunConfig& cfg) { return build_dataset(cfg.dataset, stream_seed(cfg.train.seed, kDataStream)); }

RunConfig config_from_checkpoint(const LoadedCheckpoint& ck) {
  try {
    return parse_config(ck.info.config);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint carries an unusable config: ") + e.what());
  }
}

LoadedCheckpoint load_ckpt(const std::string& path) {
  LoadedCheckpoint ck = load_checkpoint(path);
  for (const auto& w : ck.warnings) std::cerr << "warning: " << w << '\n';
  return ck;
}

void export_images_or_points(const Matrix& x, const std::string& stem, int cols) {
  if (auto side = image_side(static_cast<int>(x.cols()))) {
    export_grid(x, *side, *side, cols, stem + ".pgm");
    emit(stem + ".pgm");
  } else {
    write_points_csv(stem + ".csv", x);
    emit(stem + ".csv");
  }
}

Dataset eval_dataset(const RunConfig& cfg, const std::string& images, const std::string& labels, int limit) {
  DatasetConfig dc = cfg.dataset;
  if (!images.empty()) {
    dc.kind = "idx";
    dc.images = images;
    dc.labels = labels;
    dc.exclude_labels.clear();
  }
  if (limit > 0) {
    if (dc.kind == "idx") {
      dc.limit = limit;
    } else {
      dc.n = limit;
    }
  }
  return build_dataset(dc, stream_seed(cfg.train.seed, kDataStream));
}

LangevinConfig test_langevin(const RunConfig& cfg, std::uint64_t seed) {
  LangevinConfig lc = cfg.train.langevin;
  lc.steps = cfg.test_steps;
  lc.seed = seed;
  return lc;
}

void write_metrics(const std::string& path, const std::vector<MetricRow>& rows) {
  auto out = open_out(path);
  write_metrics_csv(out, rows);
  emit(path);
}

// --- train ---------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = load_config(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  if (!a.out.empty()) cfg.out_dir = a.out;
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);

  const std::string hash = config_hash(cfg);
  cfg.train.provenance = {mode_name(cfg.train.mode), hash, to_json(cfg)};
  cfg.train.checkpoint_dir = cfg.out_dir;
  {
    auto out = open_out(join(dir, "config.json"));
    out << to_json(cfg).dump(2) << '\n';
  }
  emit(join(dir, "config.json"));

  const Dataset data = run_dataset(cfg);
  std::cerr << "training " << mode_name(cfg.train.mode) << " on " << data.size() << " x " << data.dim()
            << " examples, config " << hash << '\n';
  const TrainResult r = train(data, cfg.train);

  save_checkpoint(join(dir, "model.ckpt"), r.state, cfg.train.provenance);
  emit(join(dir, "model.ckpt"));
  {
    auto out = open_out(join(dir, "runlog.csv"));
    r.log.write_csv(out);
  }
  emit(join(dir, "runlog.csv"));
  const Matrix samples = ancestral_sample(r.state.prior, r.state.gen, 64, stream_seed(cfg.train.seed, 0x5a));
  export_images_or_points(samples, join(dir, "samples"), 8);
  if (cfg.train.mode == TrainMode::Recovery) export_images_or_points(r.recovered.topRows(std::min<Eigen::Index>(64, r.recovered.rows())), join(dir, "recovered"), 8);
  return 0;
}

// --- sample --------------------------------------------------------------

struct SampleArgs {
  std::string ckpt;
  int n = 64;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_sample(const SampleArgs& a) {
  if (a.n < 2) throw ConfigError("-n must be >= 2");
  const LoadedCheckpoint ck = load_ckpt(a.ckpt);
  const Matrix x = ancestral_sample(ck.state.prior, ck.state.gen, a.n, a.seed);
  if (image_side(ck.state.gen.data_dim()) && fs::path(a.out).extension() != ".csv") {
    const int side = *image_side(ck.state.gen.data_dim());
    export_grid(x, side, side, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(a.n)))), a.out);
  } else {
    write_points_csv(a.out, x);
  }
  emit(a.out);

  const RunConfig cfg = config_from_checkpoint(ck);
  const Dataset data = run_dataset(cfg);
  const Matrix ref = data.x.topRows(std::min<Eigen::Index>(data.size(), a.n));
  write_metrics(a.out + ".mmd.csv", {{"mmd_to_training_data", mmd(x, ref), a.seed, ck.info.config_hash}});
  return 0;
}

// --- reconstruct / inpaint -----------------------------------------------

struct EvalArgs {
  std::string ckpt;
  std::string out;
  std::string images;
  std::string labels;
  int limit = 100;
  std::uint64_t seed = 0;
  std::optional<int> steps;
};

int cmd_reconstruct(const EvalArgs& a) {
  const LoadedCheckpoint ck = load_ckpt(a.ckpt);
  RunConfig cfg = config_from_checkpoint(ck);
  if (a.steps) cfg.test_steps = *a.steps;
  const Dataset data = eval_dataset(cfg, a.images, a.labels, a.limit);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  const ReconstructResult r = reconstruct(ck.state.prior, ck.state.gen, data.x, test_langevin(cfg, a.seed));
  {
    auto out = open_out(join(dir, "reconstruct_per_example.csv"));
    out << "example,mse\n";
    out.precision(17);
    for (Eigen::Index i = 0; i < r.per_example_mse.size(); ++i) out << i << ',' << r.per_example_mse(i) << '\n';
  }
  emit(join(dir, "reconstruct_per_example.csv"));
  write_metrics(join(dir, "reconstruct_metrics.csv"), {{"mean_mse", r.mean_mse, a.seed, ck.info.config_hash}});
  if (auto side = image_side(data.dim())) {
    const Eigen::Index k = std::min<Eigen::Index>(data.size(), 32);
    Matrix grid(2 * k, data.dim());
    grid << data.x.topRows(k), r.recon.topRows(k);
    export_grid(grid, *side, *side, static_cast<int>(k), join(dir, "reconstruct.pgm"));
    emit(join(dir, "reconstruct.pgm"));
  }
  std::cerr << "mean reconstruction MSE " << r.mean_mse << '\n';
  return 0;
}

struct InpaintArgs {
  EvalArgs eval;
  std::string mask_kind = "region";
  int side = 10;
  std::string placement = "center";
  double fraction = 0.5;
  int completions = 10;
};

int cmd_inpaint(const InpaintArgs& a) {
  const LoadedCheckpoint ck = load_ckpt(a.eval.ckpt);
  RunConfig cfg = config_from_checkpoint(ck);
  if (a.eval.steps) cfg.test_steps = *a.eval.steps;
  Dataset data = eval_dataset(cfg, a.eval.images, a.eval.labels, a.eval.limit);
  if (auto s = image_side(data.dim()); s && !data.is_image()) data.height = data.width = *s;

  MaskSpec spec;
  spec.seed = a.eval.seed;
  if (a.mask_kind == "region") {
    spec.kind = MaskSpec::Kind::Region;
    spec.side = a.side;
    if (a.placement == "center") {
      spec.placement = MaskSpec::Placement::Center;
    } else if (a.placement == "random") {
      spec.placement = MaskSpec::Placement::Random;
    } else {
      throw ConfigError("--placement must be center or random");
    }
  } else if (a.mask_kind == "salt_pepper") {
    spec.kind = MaskSpec::Kind::SaltPepper;
    spec.fraction = a.fraction;
  } else if (a.mask_kind == "none") {
    spec.kind = MaskSpec::Kind::SaltPepper;
  } else {
    throw ConfigError("--mask must be region, salt_pepper or none");
  }
  const MaskedDataset md = a.mask_kind == "none" ? MaskedDataset{data, Matrix::Ones(data.size(), data.dim())}
                                                 : apply_mask(data, spec);
  const Eigen::Index bad = first_fully_occluded(md.mask);
  if (bad >= 0) throw DataError("example " + std::to_string(bad) + " is fully occluded");

  const InpaintResult r = inpaint(ck.state.prior, ck.state.gen, data.x, md.mask, a.completions,
                                  test_langevin(cfg, a.eval.seed));
  const fs::path dir(a.eval.out);
  fs::create_directories(dir);
  std::vector<MetricRow> rows;
  for (std::size_t k = 0; k < r.masked_mse.size(); ++k) {
    rows.push_back({"masked_mse_completion_" + std::to_string(k), r.masked_mse[k], a.eval.seed, ck.info.config_hash});
  }
  if (!r.masked_mse.empty()) rows.push_back({"masked_mse_mean", mean_of(r.masked_mse), a.eval.seed, ck.info.config_hash});
  write_metrics(join(dir, "inpaint_metrics.csv"), rows);

  if (auto side = image_side(data.dim())) {
    // one row per image: original | masked | completions
    const Eigen::Index k = std::min<Eigen::Index>(data.size(), 16);
    const int cols = 2 + a.completions;
    Matrix grid(k * cols, data.dim());
    for (Eigen::Index i = 0; i < k; ++i) {
      grid.row(i * cols) = data.x.row(i);
      grid.row(i * cols + 1) = md.occluded.x.row(i);
      for (int c = 0; c < a.completions; ++c) grid.row(i * cols + 2 + c) = r.completions[static_cast<std::size_t>(c)].row(i);
    }
    export_grid(grid, *side, *side, cols, join(dir, "inpaint.pgm"));
    emit(join(dir, "inpaint.pgm"));
  } else {
    for (int c = 0; c < a.completions; ++c) {
      const std::string p = join(dir, "completion_" + std::to_string(c) + ".csv");
      write_points_csv(p, r.completions[static_cast<std::size_t>(c)]);
      emit(p);
    }
  }
  return 0;
}

// --- anomaly -------------------------------------------------------------

struct AnomalyArgs {
  std::string config;
  std::string test_images;
  std::string test_labels;
  int heldout = 1;
  int repeats = 10;
  int test_limit = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_anomaly(const AnomalyArgs& a) {
  RunConfig cfg = load_config(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (cfg.dataset.kind != "idx" || cfg.dataset.labels.empty()) {
    throw ConfigError("anomaly needs an idx dataset with labels");
  }
  cfg.dataset.exclude_labels.clear();
  const Dataset train_set = run_dataset(cfg);
  DatasetConfig tc = cfg.dataset;
  tc.images = a.test_images;
  tc.labels = a.test_labels;
  tc.limit = a.test_limit;
  const Dataset test = build_dataset(tc, 0);

  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  const std::string hash = config_hash(cfg);
  const AnomalyResult r = anomaly_protocol(train_set, test, a.heldout, cfg.train, test_langevin(cfg, 0), a.repeats);
  std::vector<MetricRow> rows;
  for (const auto& run : r.runs) rows.push_back({"auprc", run.auprc, run.seed, hash});
  rows.push_back({"auprc_mean", r.mean, cfg.train.seed, hash});
  rows.push_back({"auprc_sd", r.sd, cfg.train.seed, hash});
  write_metrics(join(dir, "anomaly_metrics.csv"), rows);
  std::cerr << "AUPRC " << r.mean << " +- " << r.sd << " over " << a.repeats << " runs (held-out class " << a.heldout
            << ")\n";
  return 0;
}

// --- recover-eval ----------------------------------------------------------

int cmd_recover_eval(const EvalArgs& a) {
  const LoadedCheckpoint ck = load_ckpt(a.ckpt);
  RunConfig cfg = config_from_checkpoint(ck);
  if (a.steps) cfg.test_steps = *a.steps;
  if (!cfg.train.mask) throw ConfigError("recover-eval needs a checkpoint trained in recovery mode");
  const Dataset data = run_dataset(cfg);
  const MaskedDataset md = apply_mask(data, *cfg.train.mask);
  const LangevinConfig lc = test_langevin(cfg, a.seed);
  const Matrix z = sample_posterior(ck.state.prior, ck.state.gen, md.occluded.x, lc, &md.mask).z;
  const Matrix recovered = decode(ck.state.gen, z);
  const Matrix occluded = Matrix::Ones(md.mask.rows(), md.mask.cols()) - md.mask;
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_metrics(join(dir, "recover_metrics.csv"),
                {{"masked_mse", mse(recovered, data.x, &occluded), a.seed, ck.info.config_hash}});
  return 0;
}

// --- sweep ---------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::string param;
  std::vector<double> values;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_sweep(const SweepArgs& a) {
  RunConfig cfg = load_config(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  if (!a.out.empty()) cfg.out_dir = a.out;
  const SweepParam p = parse_sweep_param(a.param);
  const Dataset data = run_dataset(cfg);
  const std::vector<SweepRow> rows = sweep(cfg, data, p, a.values);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  const std::string path = join(dir, std::string("sweep_") + sweep_param_name(p) + ".csv");
  auto out = open_out(path);
  write_sweep_csv(out, p, rows);
  emit(path);
  return 0;
}

void add_eval_options(CLI::App* sub, EvalArgs& a) {
  sub->add_option("--ckpt", a.ckpt, "checkpoint file")->required();
  sub->add_option("--out", a.out, "output directory")->required();
  sub->add_option("--images", a.images, "IDX image file (default: the checkpoint's dataset)");
  sub->add_option("--labels", a.labels, "IDX label file");
  sub->add_option("--limit", a.limit, "number of examples (0 = all)");
  sub->add_option("--seed", a.seed, "chain seed");
  sub->add_option("--steps", a.steps, "Langevin steps (default: the config's test_steps)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-space flow prior models: training, sampling and evaluation"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a model from a JSON config");
  train_cmd->add_option("--config", ta.config, "config file")->required();
  train_cmd->add_option("--seed", ta.seed, "override the config seed");
  train_cmd->add_option("--out", ta.out, "override the output directory");

  SampleArgs sa;
  auto* sample_cmd = app.add_subcommand("sample", "ancestral samples from a checkpoint");
  sample_cmd->add_option("--ckpt", sa.ckpt, "checkpoint file")->required();
  sample_cmd->add_option("-n", sa.n, "number of samples");
  sample_cmd->add_option("--out", sa.out, "output file (.pgm for images, .csv for points)")->required();
  sample_cmd->add_option("--seed", sa.seed, "sampling seed");

  EvalArgs ra;
  auto* recon_cmd = app.add_subcommand("reconstruct", "reconstruct examples through inferred latents");
  add_eval_options(recon_cmd, ra);

  InpaintArgs ia;
  auto* inpaint_cmd = app.add_subcommand("inpaint", "fill occluded pixels from the masked posterior");
  add_eval_options(inpaint_cmd, ia.eval);
  inpaint_cmd->add_option("--mask", ia.mask_kind, "region, salt_pepper or none");
  inpaint_cmd->add_option("--side", ia.side, "region side length");
  inpaint_cmd->add_option("--placement", ia.placement, "center or random");
  inpaint_cmd->add_option("--fraction", ia.fraction, "salt-and-pepper occlusion fraction");
  inpaint_cmd->add_option("--samples-per-image", ia.completions, "completions per image (chain seeds)");

  AnomalyArgs aa;
  auto* anomaly_cmd = app.add_subcommand("anomaly", "held-out-class anomaly detection AUPRC");
  anomaly_cmd->add_option("--config", aa.config, "training config (idx dataset with labels)")->required();
  anomaly_cmd->add_option("--test-images", aa.test_images, "IDX test images")->required();
  anomaly_cmd->add_option("--test-labels", aa.test_labels, "IDX test labels")->required();
  anomaly_cmd->add_option("--heldout", aa.heldout, "anomalous class");
  anomaly_cmd->add_option("--repeats", aa.repeats, "training seeds");
  anomaly_cmd->add_option("--test-limit", aa.test_limit, "number of test examples (0 = all)");
  anomaly_cmd->add_option("--seed", aa.seed, "base seed");
  anomaly_cmd->add_option("--out", aa.out, "output directory");

  EvalArgs va;
  auto* recover_cmd = app.add_subcommand("recover-eval", "masked MSE of recovered training images");
  add_eval_options(recover_cmd, va);

  SweepArgs wa;
  auto* sweep_cmd = app.add_subcommand("sweep", "one training run per hyperparameter value");
  sweep_cmd->add_option("--config", wa.config, "config file")->required();
  sweep_cmd->add_option("--param", wa.param, "steps, step_size, latent_dim or flow_depth")->required();
  sweep_cmd->add_option("--values", wa.values, "values to try")->required()->delimiter(',');
  sweep_cmd->add_option("--seed", wa.seed, "override the config seed");
  sweep_cmd->add_option("--out", wa.out, "override the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) return cmd_train(ta);
    if (*sample_cmd) return cmd_sample(sa);
    if (*recon_cmd) return cmd_reconstruct(ra);
    if (*inpaint_cmd) return cmd_inpaint(ia);
    if (*anomaly_cmd) return cmd_anomaly(aa);
    if (*recover_cmd) return cmd_recover_eval(va);
    if (*sweep_cmd) return cmd_sweep(wa);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
