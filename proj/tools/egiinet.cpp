// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "egiinet/checkpoint.hpp"
#include "egiinet/config.hpp"
#include "egiinet/model.hpp"
#include "egiinet/synth.hpp"
#include "egiinet/train.hpp"
#include "egiinet/visualize.hpp"

namespace {

using namespace egiinet;

struct CommonArgs {
  std::string config_path;
  int64_t seed = -1;  // -1 = not given
  std::string out;
};

RunConfig resolve_config(const CommonArgs& common) {
  RunConfig cfg;
  if (!common.config_path.empty()) cfg = load_run_config(common.config_path);
  if (common.seed >= 0) cfg.seed = static_cast<uint64_t>(common.seed);
  apply_env_seed_override(cfg);
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& common, bool out_required) {
  cmd->add_option("--config", common.config_path, "key = value configuration file");
  cmd->add_option("--seed", common.seed, "seed override (EGIINET_SEED wins over this)");
  auto* out = cmd->add_option("--out", common.out, "output path");
  if (out_required) out->required();
}

int cmd_generate_data(const CommonArgs& common, int samples) {
  RunConfig cfg = resolve_config(common);
  cfg.validate();
  const int n = samples > 0 ? samples : cfg.train_samples + cfg.val_samples;
  const auto records = build_dataset(dataset_config_from(cfg, n), common.out);
  std::cout << "wrote " << records.size() << " samples to " << common.out << "\n";
  return 0;
}

std::pair<Dataset, Dataset> split_dataset(const RunConfig& cfg, const std::string& manifest) {
  Dataset all = load_dataset(manifest);
  if (all.size() < cfg.train_samples + cfg.val_samples) {
    throw std::runtime_error("dataset has " + std::to_string(all.size()) +
                             " samples but the config needs " +
                             std::to_string(cfg.train_samples + cfg.val_samples));
  }
  return {slice(all, 0, cfg.train_samples), slice(all, cfg.train_samples, cfg.val_samples)};
}

int cmd_train(const CommonArgs& common, const std::string& data, const std::string& variant,
              int epochs) {
  RunConfig cfg = resolve_config(common);
  if (!data.empty()) cfg.data_manifest = data;
  if (!variant.empty()) cfg.model.variant = variant_from_string(variant);
  if (epochs > 0) cfg.epochs = epochs;
  cfg.out_dir = common.out;
  cfg.validate();
  if (cfg.data_manifest.empty()) {
    throw std::runtime_error("train: no dataset manifest (use --data or data_manifest)");
  }

  auto [train_set, val_set] = split_dataset(cfg, cfg.data_manifest);

  EgiinetModel model(cfg.model);
  model.init_params(cfg.seed);
  TrainResult result = train_model(model, cfg, train_set, val_set, &std::cout);

  std::filesystem::create_directories(cfg.out_dir);
  write_train_log_csv(cfg.out_dir + "/training_log.csv", result);
  save_checkpoint(cfg.out_dir + "/checkpoint", model, cfg, result.steps, result.rng_state);
  std::cout << "checkpoint written to " << cfg.out_dir << "/checkpoint\n";
  return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& checkpoint_dir,
             const std::string& data) {
  LoadedCheckpoint ckpt = load_checkpoint(checkpoint_dir);
  Dataset set = load_dataset(data);
  const auto rows = evaluate_model(*ckpt.model, set);
  write_metrics_csv(common.out, rows);
  std::cout << "metrics written to " << common.out << "\n";
  return 0;
}

int cmd_ablate(const CommonArgs& common, const std::string& data,
               const std::string& variants_text, int n_seeds, int epochs) {
  RunConfig cfg = resolve_config(common);
  if (!data.empty()) cfg.data_manifest = data;
  if (epochs > 0) cfg.epochs = epochs;
  cfg.validate();
  if (cfg.data_manifest.empty()) {
    throw std::runtime_error("ablate: no dataset manifest (use --data or data_manifest)");
  }

  std::vector<Variant> variants;
  std::stringstream ss(variants_text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) variants.push_back(variant_from_string(item));
  }
  if (variants.empty()) throw std::runtime_error("ablate: no variants given");

  auto [train_set, val_set] = split_dataset(cfg, cfg.data_manifest);
  const AblationSummary summary = run_ablation(cfg, train_set, val_set, variants, n_seeds,
                                               &std::cout);
  std::filesystem::create_directories(common.out);
  write_ablation_csv(common.out + "/ablation.csv", summary);
  std::cout << "ablation results written to " << common.out << "/ablation.csv\n";
  return 0;
}

int cmd_visualize(const CommonArgs& common, const std::string& checkpoint_dir,
                  const std::string& data, int sample_id) {
  LoadedCheckpoint ckpt = load_checkpoint(checkpoint_dir);
  Dataset set = load_dataset(data);
  for (const LoadedSample& s : set.samples) {
    if (s.id == sample_id) {
      visualize_attention(*ckpt.model, s, common.out);
      std::cout << "attention overlay written to " << common.out << "\n";
      return 0;
    }
  }
  throw std::runtime_error("visualize-attention: sample id " + std::to_string(sample_id) +
                           " not in manifest");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"egiinet: view-guided point cloud completion at desk scale"};
  app.require_subcommand(1);

  CommonArgs gen_common;
  int gen_samples = 0;
  auto* gen = app.add_subcommand("generate-data", "build a synthetic dataset");
  add_common(gen, gen_common, true);
  gen->add_option("--samples", gen_samples, "sample count (default: train + val of config)");

  CommonArgs train_common;
  std::string train_data, train_variant;
  int train_epochs = 0;
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train, train_common, true);
  train->add_option("--data", train_data, "dataset manifest path");
  train->add_option("--variant", train_variant, "full|no_sharing|no_ftloss|no_sftnet|no_image");
  train->add_option("--epochs", train_epochs, "epoch override");

  CommonArgs eval_common;
  std::string eval_checkpoint, eval_data;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint, write a metrics CSV");
  add_common(eval, eval_common, true);
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint directory")->required();
  eval->add_option("--data", eval_data, "dataset manifest path")->required();

  CommonArgs abl_common;
  std::string abl_data;
  std::string abl_variants = "full,no_image,no_ftloss";
  int abl_seeds = 3;
  int abl_epochs = 0;
  auto* ablate = app.add_subcommand("ablate", "train ablation variants and summarize");
  add_common(ablate, abl_common, true);
  ablate->add_option("--data", abl_data, "dataset manifest path");
  ablate->add_option("--variants", abl_variants, "comma-separated variant list");
  ablate->add_option("--seeds", abl_seeds, "seeds per variant");
  ablate->add_option("--epochs", abl_epochs, "epoch override");

  CommonArgs viz_common;
  std::string viz_checkpoint, viz_data;
  int viz_sample = 0;
  auto* viz = app.add_subcommand("visualize-attention", "project cross-attention onto the view");
  add_common(viz, viz_common, true);
  viz->add_option("--checkpoint", viz_checkpoint, "checkpoint directory")->required();
  viz->add_option("--data", viz_data, "dataset manifest path")->required();
  viz->add_option("--sample", viz_sample, "sample id from the manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate_data(gen_common, gen_samples);
    if (train->parsed()) return cmd_train(train_common, train_data, train_variant, train_epochs);
    if (eval->parsed()) return cmd_eval(eval_common, eval_checkpoint, eval_data);
    if (ablate->parsed()) return cmd_ablate(abl_common, abl_data, abl_variants, abl_seeds,
                                            abl_epochs);
    if (viz->parsed()) return cmd_visualize(viz_common, viz_checkpoint, viz_data, viz_sample);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
