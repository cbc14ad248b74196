// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "egiinet/config.hpp"
#include "egiinet/model.hpp"
#include "egiinet/synth.hpp"

namespace egiinet {

struct LoadedSample {
  int id = 0;
  PointCloud partial;
  PointCloud complete;
  ImageView view;
  ShapeFamily family = ShapeFamily::sphere;
};

struct Dataset {
  std::vector<LoadedSample> samples;
  int size() const { return static_cast<int>(samples.size()); }
};

/// Loads every record of a manifest; paths resolve against the manifest dir.
Dataset load_dataset(const std::string& manifest_path);
Dataset slice(const Dataset& d, int first, int count);

/// Mean per-parameter gradients of the variant-aware training loss over the
/// batch, plus the mean loss bundle. Samples are processed on `threads`
/// workers; results are reduced in sample order, so the outcome does not
/// depend on the thread count.
struct BatchGrad {
  std::vector<ad::Mat> grads;  // aligned with ParamStore entries
  LossBundle bundle;
};
BatchGrad batch_gradients(const EgiinetModel& model,
                          const std::vector<const LoadedSample*>& batch, int threads);

/// One adaptive-moment update with bias correction; step counter t is 1-based.
void adam_step(ParamStore& store, const std::vector<ad::Mat>& grads, double lr, int64_t t,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct EpochLog {
  int epoch = 0;
  LossBundle mean;
  double val_cd_l2 = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double initial_val_cd_l2 = 0.0;  // before the first update
  int64_t steps = 0;
  std::string rng_state;  // trainer RNG after the last epoch
};

/// Full training loop: seeded shuffling, cosine-decayed adaptive-moment
/// updates of the variant-aware objective, per-epoch loss means and
/// validation chamfer, deterministic given (config, seed). Aborts with a
/// diagnostic naming the offending loss component if training diverges.
TrainResult train_model(EgiinetModel& model, const RunConfig& cfg, const Dataset& train,
                        const Dataset& val, std::ostream* progress = nullptr);

double validation_cd_l2(const EgiinetModel& model, const Dataset& val, int threads = 0);

void write_train_log_csv(const std::string& path, const TrainResult& result);

// ---- evaluation ----

struct EvalRow {
  std::string variant;
  std::string family;  // family name or "avg"
  double cd_l2_x1000 = 0.0;
  double fscore = 0.0;
  int count = 0;
};

using Predictor = std::function<PointCloud(const LoadedSample&)>;

/// Per-family and overall-average chamfer and F-score of predictions against
/// ground truth; chamfer is reported x1000.
std::vector<EvalRow> evaluate_dataset(const Dataset& data, const Predictor& predict,
                                      const std::string& variant_label, double threshold_d = 0.001,
                                      int threads = 0);
std::vector<EvalRow> evaluate_model(const EgiinetModel& model, const Dataset& data,
                                    double threshold_d = 0.001, int threads = 0);

void write_metrics_csv(const std::string& path, const std::vector<EvalRow>& rows);
std::vector<EvalRow> read_metrics_csv(const std::string& path);

int resolve_threads(int requested);

// ---- ablation harness ----

struct AblationRun {
  Variant variant = Variant::full;
  uint64_t seed = 0;
  double val_cd_l2 = 0.0;  // after training
};

struct AblationSummary {
  std::vector<AblationRun> runs;
  /// Median final validation chamfer over seeds, per variant.
  std::vector<std::pair<Variant, double>> median_val_cd;
};

/// Trains every requested variant for n_seeds seeds from matched
/// initializations (shared tensors start identical across variants) and
/// summarizes final validation chamfer.
AblationSummary run_ablation(const RunConfig& base, const Dataset& train, const Dataset& val,
                             const std::vector<Variant>& variants, int n_seeds,
                             std::ostream* progress = nullptr);

void write_ablation_csv(const std::string& path, const AblationSummary& summary);

}  // namespace egiinet
