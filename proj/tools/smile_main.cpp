// Command-line front end: synthetic data generation, training, evaluation,
// affinity diagnostics, and scalarization-weight sweeps.
//
// Exit codes: 0 success, 2 usage/configuration/IO problems, 3 numerical
// divergence (partial history is still written).

#include <CLI11.hpp>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "smile/datagen.hpp"
#include "smile/diagnostics.hpp"
#include "smile/errors.hpp"
#include "smile/io.hpp"
#include "smile/metrics.hpp"
#include "smile/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;

// --config FILE provides defaults for any long flag (keys without the "--");
// explicit flags override it, and SMILE_SEED is the last-resort seed source.
json preload_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    std::string path;
    if (arg == "--config" && i + 1 < argc) {
      path = argv[i + 1];
    } else if (arg.rfind("--config=", 0) == 0) {
      path = arg.substr(9);
    }
    if (!path.empty()) {
      std::ifstream in(path);
      if (!in) throw smile::ConfigError("cannot open config file " + path);
      return json::parse(in);
    }
  }
  return json::object();
}

template <class T>
void config_default(const json& cfg, const std::string& key, T& var) {
  if (cfg.contains(key)) var = cfg.at(key).get<T>();
}

std::optional<std::uint64_t> env_seed() {
  if (const char* v = std::getenv("SMILE_SEED")) {
    return static_cast<std::uint64_t>(std::stoull(v));
  }
  return std::nullopt;
}

struct SeedOption {
  std::uint64_t value = 0;
  bool given = false;
};

void resolve_seed(SeedOption& seed, const json& cfg) {
  if (seed.given) return;
  if (cfg.contains("seed")) {
    seed.value = cfg.at("seed").get<std::uint64_t>();
    return;
  }
  if (auto env = env_seed()) seed.value = *env;
}

void add_seed_option(CLI::App* cmd, SeedOption& seed) {
  cmd->add_option("--seed", seed.value, "Run seed")->each([&seed](const std::string&) {
    seed.given = true;
  });
}

struct TrainFlags {
  std::string data_dir;
  std::string out_dir = "out";
  std::string mode = "smile";
  std::string optimizer = "adam";
  std::string config_path;
  int iters = 4000;
  double lr = 1e-3;
  double a1 = 0.4, a2 = 0.4, a3 = 0.1, a4 = 0.1;
  int scale = 2, kernel_size = 5, noise_channels = 8, gen_width = 32, hidden = 64;
  int endmembers = 0;  // 0: take p from the truth files
  bool no_project = false;
  bool raw_sums = false;
  bool no_emit_hr = false;
  SeedOption seed;
};

void add_train_options(CLI::App* cmd, TrainFlags& f, const json& cfg) {
  config_default(cfg, "data", f.data_dir);
  config_default(cfg, "out", f.out_dir);
  config_default(cfg, "mode", f.mode);
  config_default(cfg, "optimizer", f.optimizer);
  config_default(cfg, "iters", f.iters);
  config_default(cfg, "lr", f.lr);
  config_default(cfg, "alpha1", f.a1);
  config_default(cfg, "alpha2", f.a2);
  config_default(cfg, "alpha3", f.a3);
  config_default(cfg, "alpha4", f.a4);
  config_default(cfg, "scale", f.scale);
  config_default(cfg, "kernel-size", f.kernel_size);
  config_default(cfg, "noise-channels", f.noise_channels);
  config_default(cfg, "gen-width", f.gen_width);
  config_default(cfg, "hidden", f.hidden);
  config_default(cfg, "endmembers", f.endmembers);
  config_default(cfg, "no-project", f.no_project);
  config_default(cfg, "raw-sums", f.raw_sums);
  config_default(cfg, "no-emit-hr", f.no_emit_hr);

  cmd->add_option("--data", f.data_dir, "Dataset directory produced by `gen`")->required();
  cmd->add_option("--out", f.out_dir, "Output directory");
  cmd->add_option("--mode", f.mode, "smile | single_task")
      ->check(CLI::IsMember({"smile", "single_task"}));
  cmd->add_option("--optimizer", f.optimizer, "adam | sgd")
      ->check(CLI::IsMember({"adam", "sgd"}));
  cmd->add_option("--iters", f.iters, "Training iterations");
  cmd->add_option("--lr", f.lr, "Learning rate");
  cmd->add_option("--alpha1", f.a1, "Weight of the unmixing reconstruction loss");
  cmd->add_option("--alpha2", f.a2, "Weight of the SR reconstruction loss");
  cmd->add_option("--alpha3", f.a3, "Weight of the nuclear-norm loss");
  cmd->add_option("--alpha4", f.a4, "Weight of the sum-to-one loss");
  cmd->add_option("--scale", f.scale, "SR scale factor");
  cmd->add_option("--kernel-size", f.kernel_size, "Downsampling kernel size (odd)");
  cmd->add_option("--noise-channels", f.noise_channels, "DIP noise channels");
  cmd->add_option("--gen-width", f.gen_width, "DIP conv feature width");
  cmd->add_option("--hidden", f.hidden, "Unmixing encoder hidden width");
  cmd->add_option("--endmembers", f.endmembers, "Endmember count (default: from truth files)");
  cmd->add_flag("--no-project", f.no_project, "Disable the decoder nonnegativity clamp");
  cmd->add_flag("--raw-sums", f.raw_sums, "Raw-sum losses instead of means");
  cmd->add_flag("--no-emit-hr", f.no_emit_hr, "Skip HR abundance/cube dumps");
  cmd->add_option("--config", f.config_path, "JSON config file mirroring the flags");
  add_seed_option(cmd, f.seed);
}

smile::TrainConfig to_train_config(const TrainFlags& f) {
  smile::TrainConfig cfg;
  cfg.learning_rate = f.lr;
  cfg.iterations = f.iters;
  cfg.optimizer = f.optimizer == "sgd" ? smile::Optimizer::Sgd : smile::Optimizer::Adam;
  cfg.weights = {f.a1, f.a2, f.a3, f.a4};
  cfg.sr.scale = f.scale;
  cfg.sr.kernel_size = f.kernel_size;
  cfg.sr.noise_channels = f.noise_channels;
  cfg.sr.width = f.gen_width;
  cfg.seed = f.seed.value;
  cfg.project_endmembers = !f.no_project;
  cfg.mode = f.mode == "single_task" ? smile::TrainMode::SingleTask : smile::TrainMode::Smile;
  cfg.hidden = f.hidden;
  cfg.raw_loss_sums = f.raw_sums;
  return cfg;
}

struct LoadedData {
  smile::HsiCube cube;
  std::optional<smile::AbundanceMap> truth_abundance;
  std::optional<smile::EndmemberMatrix> truth_endmembers;
};

LoadedData load_data_dir(const std::string& dir) {
  LoadedData d{smile::read_cube(fs::path(dir) / "cube"), std::nullopt, std::nullopt};
  if (fs::exists(fs::path(dir) / "abundance_true.json")) {
    d.truth_abundance = smile::read_abundance(fs::path(dir) / "abundance_true");
  }
  if (fs::exists(fs::path(dir) / "endmembers_true.csv")) {
    d.truth_endmembers =
        smile::load_endmember_library((fs::path(dir) / "endmembers_true.csv").string());
  }
  return d;
}

int resolve_endmember_count(const TrainFlags& f, const LoadedData& data) {
  if (f.endmembers > 0) return f.endmembers;
  if (data.truth_endmembers) return data.truth_endmembers->count();
  throw smile::ConfigError("--endmembers is required when the dataset carries no truth files");
}

struct GenFlags {
  std::string preset;
  std::string config_path;
  int height = 0, width = 0, channels = 0, endmembers = 0;
  double snr_db = 30.0;
  double alpha = 1.0;
  bool pure_pixels = false;
  std::string out_dir = "data";
  SeedOption seed;
};

int run_gen(GenFlags& f, const json& cfg) {
  resolve_seed(f.seed, cfg);
  smile::DatasetSpec spec;
  if (f.preset == "dataset1") {
    spec = smile::DatasetSpec::dataset1();
  } else if (f.preset == "dataset2") {
    spec = smile::DatasetSpec::dataset2();
  } else if (!f.preset.empty()) {
    throw smile::ConfigError("unknown preset " + f.preset);
  }
  if (f.height > 0) spec.height = f.height;
  if (f.width > 0) spec.width = f.width;
  if (f.channels > 0) spec.channels = f.channels;
  if (f.endmembers > 0) spec.endmembers = f.endmembers;
  spec.snr_db = f.snr_db;
  spec.dirichlet_alpha = f.alpha;
  spec.pure_pixel_injection = f.pure_pixels;
  spec.seed = f.seed.value;
  spec.validate();

  smile::Dataset ds = smile::build_dataset(spec);
  fs::create_directories(f.out_dir);
  smile::write_cube(fs::path(f.out_dir) / "cube", ds.cube);
  smile::write_abundance(fs::path(f.out_dir) / "abundance_true", ds.truth_abundance);
  smile::write_endmembers_csv(fs::path(f.out_dir) / "endmembers_true.csv", ds.truth_endmembers);

  json manifest;
  manifest["command"] = "gen";
  manifest["preset"] = f.preset;
  manifest["height"] = spec.height;
  manifest["width"] = spec.width;
  manifest["channels"] = spec.channels;
  manifest["endmembers"] = spec.endmembers;
  manifest["snr_db"] = std::isinf(spec.snr_db) ? json("inf") : json(spec.snr_db);
  manifest["dirichlet_alpha"] = spec.dirichlet_alpha;
  manifest["pure_pixel_injection"] = spec.pure_pixel_injection;
  manifest["seed"] = spec.seed;
  manifest["realized_snr_db"] =
      std::isinf(spec.snr_db) ? json("inf") : json(smile::snr_realized(ds.clean, ds.cube));
  smile::write_text_file(fs::path(f.out_dir) / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "wrote " << f.out_dir << " (" << spec.height << "x" << spec.width << "x"
            << spec.channels << ", p=" << spec.endmembers << ", seed=" << spec.seed << ")\n";
  return 0;
}

void write_train_outputs(const std::string& out_dir, const smile::TrainResult& result,
                         const LoadedData& data, const smile::TrainConfig& cfg, bool emit_hr) {
  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  smile::write_endmembers_csv(out / "endmembers.csv", result.endmembers);
  smile::write_abundance(out / "abundance", result.abundance);
  smile::write_history_csv(out / "history.csv", result.history);
  smile::write_cube(out / "y1", result.reconstruction);
  for (int j = 0; j < result.abundance.count; ++j) {
    smile::write_pgm(out / ("abundance_" + std::to_string(j) + ".pgm"), result.abundance, j);
  }
  if (emit_hr && result.hr_abundance) {
    smile::write_abundance(out / "hr_abundance", *result.hr_abundance);
    smile::write_cube(out / "hr_cube", *result.hr_cube);
    smile::write_kernel_csv(out / "kernel.csv", *result.kernel);
  }
  if (data.truth_abundance && data.truth_endmembers) {
    smile::MetricsReport report = smile::evaluate(result.abundance, result.endmembers,
                                                  *data.truth_abundance, *data.truth_endmembers);
    smile::write_text_file(out / "metrics.json", smile::to_json_string(report) + "\n");
  }

  json manifest;
  manifest["command"] = "train";
  manifest["mode"] = cfg.mode == smile::TrainMode::SingleTask ? "single_task" : "smile";
  manifest["ablation"] = cfg.mode == smile::TrainMode::SingleTask;
  manifest["optimizer"] = cfg.optimizer == smile::Optimizer::Sgd ? "sgd" : "adam";
  manifest["iterations"] = cfg.iterations;
  manifest["learning_rate"] = cfg.learning_rate;
  manifest["alpha"] = {cfg.weights.a1, cfg.weights.a2, cfg.weights.a3, cfg.weights.a4};
  manifest["seed"] = cfg.seed;
  manifest["project_endmembers"] = cfg.project_endmembers;
  smile::write_text_file(out / "manifest.json", manifest.dump(2) + "\n");
}

int run_train(TrainFlags& f, const json& cfg_json) {
  resolve_seed(f.seed, cfg_json);
  LoadedData data = load_data_dir(f.data_dir);
  const int p = resolve_endmember_count(f, data);
  smile::TrainConfig cfg = to_train_config(f);
  cfg.validate();

  std::vector<smile::StepLog> history;
  try {
    smile::TrainResult result = smile::train(data.cube, p, cfg, &history);
    write_train_outputs(f.out_dir, result, data, cfg, !f.no_emit_hr);
  } catch (const smile::DivergenceError& err) {
    fs::create_directories(f.out_dir);
    smile::write_history_csv(fs::path(f.out_dir) / "history.csv", history);
    std::cerr << "error: " << err.what() << " (partial history written)\n";
    return kExitDivergence;
  }
  std::cout << "trained " << cfg.iterations << " iterations -> " << f.out_dir << "\n";
  return 0;
}

struct EvalFlags {
  std::string pred_abundance, pred_endmembers, truth_abundance, truth_endmembers;
  std::string clean_cube, noisy_cube;
  std::string config_path;
};

int run_eval(const EvalFlags& f) {
  smile::AbundanceMap pred_a = smile::read_abundance(f.pred_abundance);
  smile::EndmemberMatrix pred_e = smile::load_endmember_library(f.pred_endmembers);
  smile::AbundanceMap truth_a = smile::read_abundance(f.truth_abundance);
  smile::EndmemberMatrix truth_e = smile::load_endmember_library(f.truth_endmembers);
  smile::MetricsReport report = smile::evaluate(pred_a, pred_e, truth_a, truth_e);
  if (!f.clean_cube.empty() && !f.noisy_cube.empty()) {
    report.snr_realized_db =
        smile::snr_realized(smile::read_cube(f.clean_cube), smile::read_cube(f.noisy_cube));
  }
  std::cout << smile::to_json_string(report) << "\n";
  return 0;
}

struct AffinityFlags {
  TrainFlags train;
  double eta = -1.0;  // probe step for Λ; defaults to the learning rate
  int t2_samples = 50;
  double t2_eta = 1e-4;
};

int run_affinity(AffinityFlags& f, const json& cfg_json) {
  resolve_seed(f.train.seed, cfg_json);
  LoadedData data = load_data_dir(f.train.data_dir);
  const int p = resolve_endmember_count(f.train, data);
  smile::TrainConfig cfg = to_train_config(f.train);
  if (cfg.optimizer != smile::Optimizer::Sgd || cfg.project_endmembers ||
      cfg.mode != smile::TrainMode::Smile) {
    std::cerr << "warning: affinity diagnostics force sgd, projection off, smile mode\n";
  }
  const double eta = f.eta >= 0.0 ? f.eta : cfg.learning_rate;

  smile::AffinityRunResult run =
      smile::run_affinity_trace(data.cube, p, cfg, eta, f.t2_samples, f.t2_eta);

  fs::create_directories(f.train.out_dir);
  smile::write_affinity_csv(fs::path(f.train.out_dir) / "affinity.csv", run.records);
  smile::write_history_csv(fs::path(f.train.out_dir) / "history.csv", run.history);

  json summary;
  summary["iterations"] = cfg.iterations;
  summary["eta"] = eta;
  summary["mean_cos"] = run.summary.mean_cosine;
  summary["conflict_free_fraction"] = run.summary.conflict_free_fraction;
  summary["theorem2_samples"] = run.summary.theorem2_samples;
  summary["theorem2_violations"] = run.summary.theorem2_violations;
  summary["min_theorem2_margin"] = run.summary.min_theorem2_margin;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

struct SweepFlags {
  TrainFlags train;
  double step = 0.1;
  int jobs = 1;
};

int run_sweep(SweepFlags& f, const json& cfg_json) {
  resolve_seed(f.train.seed, cfg_json);
  LoadedData data = load_data_dir(f.train.data_dir);
  const int p = resolve_endmember_count(f.train, data);
  const int n = static_cast<int>(std::lround(1.0 / f.step));
  if (n < 1 || std::abs(n * f.step - 1.0) > 1e-9) {
    throw smile::ConfigError("sweep step must divide 1 evenly");
  }

  struct Point {
    smile::ScalarizationWeights w;
    smile::LossBreakdown final_losses;
    std::optional<double> rmse;
  };
  std::vector<smile::ScalarizationWeights> grid;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j + i <= n; ++j) {
      for (int k = 0; k + j + i <= n; ++k) {
        const int l = n - i - j - k;
        grid.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n,
                        static_cast<double>(k) / n, static_cast<double>(l) / n});
      }
    }
  }

  auto run_point = [&](const smile::ScalarizationWeights& w) {
    smile::TrainConfig cfg = to_train_config(f.train);
    cfg.weights = w;
    cfg.validate();
    Point pt;
    pt.w = w;
    smile::TrainResult result = smile::train(data.cube, p, cfg);
    pt.final_losses = result.history.back().losses;
    if (data.truth_abundance && data.truth_endmembers) {
      pt.rmse = smile::evaluate(result.abundance, result.endmembers, *data.truth_abundance,
                                *data.truth_endmembers)
                    .rmse;
    }
    return pt;
  };

  std::vector<Point> points(grid.size());
  const int jobs = std::max(1, f.jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= grid.size()) return;
      points[i] = run_point(grid[i]);
    }
  };
  std::vector<std::future<void>> futures;
  futures.reserve(static_cast<std::size_t>(jobs));
  for (int j = 0; j < jobs; ++j) futures.push_back(std::async(std::launch::async, worker));
  for (auto& fut : futures) fut.get();

  fs::create_directories(f.train.out_dir);
  std::ofstream csv(fs::path(f.train.out_dir) / "sweep.csv");
  csv << std::setprecision(17);
  csv << "alpha1,alpha2,alpha3,alpha4,l1,l2,l3,l4,total,rmse\n";
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& pt = points[i];
    csv << pt.w.a1 << ',' << pt.w.a2 << ',' << pt.w.a3 << ',' << pt.w.a4 << ','
        << pt.final_losses.l1 << ',' << pt.final_losses.l2 << ',' << pt.final_losses.l3 << ','
        << pt.final_losses.l4 << ',' << pt.final_losses.total << ','
        << (pt.rmse ? std::to_string(*pt.rmse) : "") << '\n';
    const double score = pt.rmse ? *pt.rmse : pt.final_losses.l1;
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }

  json out;
  out["points"] = points.size();
  out["best_alpha"] = {points[best].w.a1, points[best].w.a2, points[best].w.a3, points[best].w.a4};
  out["best_score"] = best_score;
  out["scored_by"] = points[best].rmse ? "rmse" : "final_l1";
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    json cfg_json = preload_config(argc, argv);

    CLI::App app{"SMILE: super-resolution guided multitask hyperspectral unmixing"};
    app.require_subcommand(1);

    GenFlags gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset");
    config_default(cfg_json, "preset", gen.preset);
    config_default(cfg_json, "height", gen.height);
    config_default(cfg_json, "width", gen.width);
    config_default(cfg_json, "channels", gen.channels);
    config_default(cfg_json, "endmembers", gen.endmembers);
    config_default(cfg_json, "snr-db", gen.snr_db);
    config_default(cfg_json, "alpha", gen.alpha);
    config_default(cfg_json, "pure-pixels", gen.pure_pixels);
    config_default(cfg_json, "out", gen.out_dir);
    gen_cmd->add_option("--preset", gen.preset, "dataset1 | dataset2");
    gen_cmd->add_option("--height", gen.height, "Pixels");
    gen_cmd->add_option("--width", gen.width, "Pixels");
    gen_cmd->add_option("--channels", gen.channels, "Spectral bands");
    gen_cmd->add_option("--endmembers", gen.endmembers, "Endmember count p");
    gen_cmd->add_option("--snr-db", gen.snr_db, "Noise level in dB; inf disables noise");
    gen_cmd->add_option("--alpha", gen.alpha, "Dirichlet concentration");
    gen_cmd->add_flag("--pure-pixels", gen.pure_pixels, "Inject one pure pixel per endmember");
    gen_cmd->add_option("--out", gen.out_dir, "Output directory");
    gen_cmd->add_option("--config", gen.config_path, "JSON config file mirroring the flags");
    add_seed_option(gen_cmd, gen.seed);

    TrainFlags train_flags;
    CLI::App* train_cmd = app.add_subcommand("train", "Train the unmixing model");
    add_train_options(train_cmd, train_flags, cfg_json);

    EvalFlags eval_flags;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Score predictions against the truth");
    config_default(cfg_json, "pred-abundance", eval_flags.pred_abundance);
    config_default(cfg_json, "pred-endmembers", eval_flags.pred_endmembers);
    config_default(cfg_json, "truth-abundance", eval_flags.truth_abundance);
    config_default(cfg_json, "truth-endmembers", eval_flags.truth_endmembers);
    eval_cmd->add_option("--pred-abundance", eval_flags.pred_abundance, "Predicted abundance stem")
        ->required();
    eval_cmd->add_option("--pred-endmembers", eval_flags.pred_endmembers, "Predicted CSV")
        ->required();
    eval_cmd->add_option("--truth-abundance", eval_flags.truth_abundance, "Truth abundance stem")
        ->required();
    eval_cmd->add_option("--truth-endmembers", eval_flags.truth_endmembers, "Truth CSV")
        ->required();
    eval_cmd->add_option("--clean-cube", eval_flags.clean_cube, "Clean cube stem (for SNR)");
    eval_cmd->add_option("--noisy-cube", eval_flags.noisy_cube, "Noisy cube stem (for SNR)");
    eval_cmd->add_option("--config", eval_flags.config_path, "JSON config file");

    AffinityFlags aff;
    CLI::App* aff_cmd = app.add_subcommand("affinity", "Task-affinity diagnostics trace");
    add_train_options(aff_cmd, aff.train, cfg_json);
    config_default(cfg_json, "eta", aff.eta);
    config_default(cfg_json, "t2-samples", aff.t2_samples);
    config_default(cfg_json, "t2-eta", aff.t2_eta);
    aff_cmd->add_option("--eta", aff.eta, "Probe step for the affinity (default: --lr)");
    aff_cmd->add_option("--t2-samples", aff.t2_samples, "Step-dominance sample count");
    aff_cmd->add_option("--t2-eta", aff.t2_eta, "Step-dominance probe step");

    SweepFlags sweep;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Grid search the loss weights");
    add_train_options(sweep_cmd, sweep.train, cfg_json);
    config_default(cfg_json, "step", sweep.step);
    config_default(cfg_json, "jobs", sweep.jobs);
    sweep_cmd->add_option("--step", sweep.step, "Simplex grid step (must divide 1)");
    sweep_cmd->add_option("--jobs", sweep.jobs, "Concurrent training runs");

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : kExitUsage;
    }

    if (gen_cmd->parsed()) return run_gen(gen, cfg_json);
    if (train_cmd->parsed()) return run_train(train_flags, cfg_json);
    if (eval_cmd->parsed()) return run_eval(eval_flags);
    if (aff_cmd->parsed()) return run_affinity(aff, cfg_json);
    if (sweep_cmd->parsed()) return run_sweep(sweep, cfg_json);
    return kExitUsage;
  } catch (const smile::DivergenceError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  }
}
