// Command line front end: dataset synthesis, training, evaluation,
// inference, gradient checking and the ablation grid.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "grt/ablation.hpp"
#include "grt/gradcheck_suite.hpp"
#include "grt/run_config.hpp"
#include "grt/trainer.hpp"

namespace fs = std::filesystem;
using namespace grt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheck = 3;

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t threads = 0;  // 0 = take from config
  bool use_double = false;
};

RunConfig effective_config(const CommonArgs& args) {
  RunConfig cfg = load_run_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  if (args.threads > 0) cfg.threads = args.threads;
  return cfg;
}

std::string scene_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04zu.tsv", index);
  return buf;
}

int cmd_synth(const CommonArgs& args, const std::string& out_dir) {
  RunConfig cfg = effective_config(args);
  fs::create_directories(out_dir);
  auto scenes = synth_generate(cfg.synth, cfg.synth_scenes, cfg.seed);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    names.push_back(scene_filename(i));
    write_scene_cloud(out_dir + "/" + names.back(), scenes[i]);
  }
  write_manifest(out_dir + "/manifest.tsv", echo_run_config(cfg), names);
  std::cout << "wrote " << scenes.size() << " scenes to " << out_dir << "\n";
  return kExitOk;
}

template <typename T>
int cmd_train(const CommonArgs& args, const std::string& out_dir,
              const std::string& resume) {
  RunConfig cfg = effective_config(args);
  if (cfg.train_manifest.empty()) {
    throw std::invalid_argument("config: [data] train_manifest is required");
  }
  auto train_scenes = load_dataset(cfg.train_manifest);
  std::vector<RadarPointCloud> val_scenes;
  if (!cfg.val_manifest.empty()) val_scenes = load_dataset(cfg.val_manifest);

  fs::create_directories(out_dir);

  ParamStore<T> store;
  auto net = GaussianRadarTransformer<T>::build(cfg.model, store, cfg.seed);
  FeatureStats stats = cfg.feature_scaling_auto
                           ? FeatureStats::estimate(train_scenes,
                                                    cfg.model.features)
                           : FeatureStats::identity(cfg.model.input_dim());

  TrainConfig tcfg;
  tcfg.optim = cfg.optim;
  tcfg.loss = cfg.loss_config();
  tcfg.augment = cfg.augment;
  tcfg.threads = cfg.threads;
  tcfg.seed = cfg.seed;

  if (!resume.empty()) {
    auto loaded = load_model<T>(resume);
    if (!(loaded.config == cfg.model)) {
      throw DataError("resume: checkpoint model config differs from " +
                      args.config_path);
    }
    for (auto& [name, p] : loaded.store) store.at(name).value = p.value;
    if (auto it = loaded.metadata.find(kMetaEpoch); it != loaded.metadata.end()) {
      tcfg.start_epoch = std::stoul(it->second) + 1;
    }
    if (auto it = loaded.metadata.find(kMetaFeatureStats);
        it != loaded.metadata.end()) {
      stats = FeatureStats::deserialize(it->second);
    }
  }

  std::ofstream trace(out_dir + "/trace.tsv");
  {
    std::istringstream echo(echo_run_config(cfg));
    std::string line;
    while (std::getline(echo, line)) trace << "# " << line << "\n";
  }
  trace << "epoch\tlr\ttrain_loss\ttrain_acc\tval_miou\tval_macro_f1\n";

  auto result =
      train(net, store, train_scenes, val_scenes, tcfg, stats,
            [&](const EpochRecord& r) {
              char buf[200];
              std::snprintf(buf, sizeof(buf),
                            "%zu\t%.8f\t%.6f\t%.6f\t%.6f\t%.6f", r.epoch, r.lr,
                            r.train_loss, r.train_acc, r.val_miou,
                            r.val_macro_f1);
              trace << buf << "\n";
              trace.flush();
              std::cout << "epoch " << r.epoch << " lr " << r.lr << " loss "
                        << r.train_loss << " acc " << r.train_acc << " val mIoU "
                        << r.val_miou << "\n";
            });

  std::map<std::string, std::string> meta = {
      {kMetaFeatureStats, stats.serialize()},
      {kMetaEpoch, std::to_string(cfg.optim.epochs - 1)},
      {kMetaBestMiou, std::to_string(result.best_val_miou)}};
  save_model(out_dir + "/checkpoint_last.bin", cfg.model, store, meta);

  restore_best(store, result);
  meta[kMetaEpoch] = std::to_string(result.best_epoch);
  save_model(out_dir + "/checkpoint_best.bin", cfg.model, store, meta);

  std::cout << "best epoch " << result.best_epoch << " val mIoU "
            << result.best_val_miou << "\n";
  return kExitOk;
}

FeatureStats stats_from_metadata(const std::map<std::string, std::string>& meta,
                                 std::size_t dim) {
  if (auto it = meta.find(kMetaFeatureStats); it != meta.end()) {
    return FeatureStats::deserialize(it->second);
  }
  return FeatureStats::identity(dim);
}

template <typename T>
int cmd_eval(const CommonArgs& args, const std::string& checkpoint,
             const std::string& manifest, const std::string& out_path,
             bool all_classes) {
  auto model = load_model<T>(checkpoint);
  auto scenes = load_dataset(manifest);
  auto stats =
      stats_from_metadata(model.metadata, model.config.input_dim());
  const std::size_t threads = args.threads > 0 ? args.threads : 1;
  auto cm = evaluate(model.net, model.store, scenes, stats, threads);
  std::string report = format_report(cm, radar_class_names());
  if (all_classes) {
    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "all_class_mIoU\t%.6f\nall_class_macro_F1\t%.6f\n",
                  iou(cm, true).mean, f1(cm, true).mean);
    report += buf;
  }
  std::cout << report;
  if (!out_path.empty()) {
    std::ofstream os(out_path);
    os << report;
  }
  return kExitOk;
}

template <typename T>
int cmd_predict(const CommonArgs& args, const std::string& checkpoint,
                const std::vector<std::string>& scan_files,
                const std::string& pose_file, const std::string& out_dir,
                bool colored) {
  auto model = load_model<T>(checkpoint);
  auto stats =
      stats_from_metadata(model.metadata, model.config.input_dim());
  if (!out_dir.empty()) fs::create_directories(out_dir);
  (void)args;

  for (const auto& file : scan_files) {
    RadarPointCloud cloud;
    if (!pose_file.empty()) {
      cloud = merge_latest_scans(load_scans(file), load_pose_file(pose_file));
    } else {
      cloud = load_scene_cloud(file);
    }
    const std::size_t n_real = cloud.real_count;
    auto padded = pad_to_min(cloud, GRTConfig::kMinCloudSize);
    auto prep_features =
        feature_grid<T>(padded, model.config.features, stats);

    Tape<T> tape;
    tape.record = false;
    auto logits = model.net.forward(tape, model.store, prep_features,
                                    padded.geometry());
    auto preds = predict(tape.value(logits));

    const std::string stem = fs::path(file).stem().string();
    const std::string base =
        out_dir.empty() ? fs::path(file).parent_path().string() : out_dir;
    const std::string label_path =
        (base.empty() ? std::string(".") : base) + "/" + stem + ".labels";
    std::ofstream os(label_path);
    for (std::size_t i = 0; i < n_real; ++i) os << preds[i] << "\n";
    std::cout << label_path << ": " << n_real << " labels\n";

    if (colored) {
      static const int palette[6][3] = {{128, 128, 128}, {230, 60, 60},
                                        {60, 160, 230},  {60, 90, 200},
                                        {80, 200, 90},   {240, 170, 40}};
      const std::string dump_path =
          (base.empty() ? std::string(".") : base) + "/" + stem + ".xyzrgb";
      std::ofstream dump(dump_path);
      for (std::size_t i = 0; i < n_real; ++i) {
        const auto& d = padded.detections[i];
        const auto* c = palette[preds[i] % 6];
        dump << d.x << " " << d.y << " 0 " << c[0] << " " << c[1] << " "
             << c[2] << "\n";
      }
    }
  }
  return kExitOk;
}

int cmd_gradcheck(const std::string& scope, double tolerance, std::size_t seeds,
                  bool inject_fault) {
  auto suite = run_gradcheck_suite(scope, seeds, tolerance, inject_fault);
  std::cout << format_suite_report(suite);
  if (!suite.pass) {
    throw CheckError("gradient check failed (max_err " +
                     std::to_string(suite.max_err) + ")");
  }
  return kExitOk;
}

int cmd_ablate(const CommonArgs& args, const std::string& out_dir,
               std::size_t num_seeds, std::size_t train_scenes,
               std::size_t val_scenes) {
  RunConfig cfg = effective_config(args);
  AblationSettings settings = AblationSettings::desk_default();
  settings.scene = cfg.synth;
  settings.base_model = cfg.model;
  settings.optim = cfg.optim;
  settings.loss = cfg.loss_config();
  settings.augment = cfg.augment;
  settings.threads = cfg.threads;
  settings.base_seed = cfg.seed + 1;
  if (num_seeds > 0) settings.num_seeds = num_seeds;
  if (train_scenes > 0) settings.train_scenes = train_scenes;
  if (val_scenes > 0) settings.val_scenes = val_scenes;

  auto tables = run_full_ablation(
      settings, [](const std::string& line) { std::cout << line << "\n"; });
  std::string report = format_ablation_report(tables.components, tables.features);
  std::cout << report;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream os(out_dir + "/ablation_report.tsv");
    std::istringstream echo(echo_run_config(cfg));
    std::string line;
    while (std::getline(echo, line)) os << "# " << line << "\n";
    os << report;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian radar transformer: moving-object semantic "
               "segmentation on sparse radar point clouds"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string out_dir, checkpoint, manifest, resume, pose_file, report_out;
  std::vector<std::string> scan_files;
  bool all_classes = false, colored = false, inject_fault = false;
  std::string scope = "all";
  double tolerance = 1e-4;
  std::size_t gc_seeds = 10;
  std::size_t ab_seeds = 0, ab_train = 0, ab_val = 0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config) {
      sub->add_option("--config", common.config_path, "run configuration file")
          ->required();
    }
    sub->add_option("--seed", common.seed, "seed override")
        ->each([&](const std::string&) { common.seed_set = true; });
    sub->add_option("--threads", common.threads, "worker thread count");
    sub->add_flag("--double", common.use_double,
                  "double precision (default single)");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth, true);
  synth->add_option("--out", out_dir, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd, true);
  train_cmd->add_option("--out", out_dir, "output directory")->required();
  train_cmd->add_option("--resume", resume, "checkpoint to resume from");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, false);
  eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")
      ->required();
  eval_cmd->add_option("--data", manifest, "dataset manifest")->required();
  eval_cmd->add_option("--out", report_out, "write the report here too");
  eval_cmd->add_flag("--all-classes", all_classes,
                     "also report means that count absent classes as zero");

  auto* predict_cmd = app.add_subcommand("predict", "label scan files");
  add_common(predict_cmd, false);
  predict_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")
      ->required();
  predict_cmd->add_option("--scans", scan_files, "scan files")->required();
  predict_cmd->add_option("--poses", pose_file,
                          "pose file; merges the four per-sensor scans");
  predict_cmd->add_option("--out", out_dir, "output directory");
  predict_cmd->add_flag("--colored", colored, "also write .xyzrgb dumps");

  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gradcheck_cmd->add_option("--scope", scope,
                            "primitives|attention|sampling|losses|backbone|all");
  gradcheck_cmd->add_option("--tolerance", tolerance, "max relative error");
  gradcheck_cmd->add_option("--seeds", gc_seeds, "random seeds per check");
  gradcheck_cmd->add_flag("--inject-fault", inject_fault,
                          "add a corrupted adjoint that must fail");

  auto* ablate_cmd =
      app.add_subcommand("ablate", "component and feature ablation grid");
  add_common(ablate_cmd, true);
  ablate_cmd->add_option("--out", out_dir, "output directory");
  ablate_cmd->add_option("--ablation-seeds", ab_seeds, "seeds per variant");
  ablate_cmd->add_option("--train-scenes", ab_train, "train scene count");
  ablate_cmd->add_option("--val-scenes", ab_val, "validation scene count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(common, out_dir);
    if (train_cmd->parsed()) {
      return common.use_double ? cmd_train<double>(common, out_dir, resume)
                               : cmd_train<float>(common, out_dir, resume);
    }
    if (eval_cmd->parsed()) {
      return common.use_double
                 ? cmd_eval<double>(common, checkpoint, manifest, report_out,
                                    all_classes)
                 : cmd_eval<float>(common, checkpoint, manifest, report_out,
                                   all_classes);
    }
    if (predict_cmd->parsed()) {
      return common.use_double
                 ? cmd_predict<double>(common, checkpoint, scan_files, pose_file,
                                       out_dir, colored)
                 : cmd_predict<float>(common, checkpoint, scan_files, pose_file,
                                      out_dir, colored);
    }
    if (gradcheck_cmd->parsed()) {
      return cmd_gradcheck(scope, tolerance, gc_seeds, inject_fault);
    }
    if (ablate_cmd->parsed()) {
      return cmd_ablate(common, out_dir, ab_seeds, ab_train, ab_val);
    }
  } catch (const CheckError& e) {
    std::cerr << "check failure: " << e.what() << "\n";
    return kExitCheck;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
