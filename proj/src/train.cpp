// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include "egiinet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "egiinet/rng.hpp"

namespace egiinet {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

Dataset load_dataset(const std::string& manifest_path_in) {
  const auto records = load_manifest(manifest_path_in);
  const std::string base = std::filesystem::path(manifest_path_in).parent_path().string();
  const std::string prefix = base.empty() ? std::string() : base + "/";

  Dataset d;
  d.samples.reserve(records.size());
  for (const SampleRecord& r : records) {
    LoadedSample s;
    s.id = r.id;
    s.complete = load_cloud(prefix + r.complete_path);
    s.partial = load_cloud(prefix + r.partial_path);
    s.view = load_png(prefix + r.view_path);
    s.family = r.family;
    d.samples.push_back(std::move(s));
  }
  return d;
}

Dataset slice(const Dataset& d, int first, int count) {
  if (first < 0 || count < 0 || first + count > d.size()) {
    throw std::invalid_argument("slice: range outside dataset");
  }
  Dataset out;
  out.samples.assign(d.samples.begin() + first, d.samples.begin() + first + count);
  return out;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Worker i handles a
// strided index set; any exception is rethrown on the caller thread.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  const int workers = std::min(std::max(threads, 1), std::max(n, 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

struct SampleGrad {
  std::vector<ad::Mat> grads;
  LossBundle bundle;
};

SampleGrad sample_gradients(const EgiinetModel& model, const LoadedSample& sample) {
  ad::Tape tape;
  Bound bound = Bound::bind(tape, model.params());
  const ad::Mat target = cloud_to_mat(sample.complete);
  const ImageView* view = model.config().variant == Variant::no_image ? nullptr : &sample.view;
  EgiinetModel::Forward f = model.forward(tape, bound, sample.partial, view, &target);
  tape.backward(f.loss_node);

  SampleGrad out;
  out.bundle = f.bundle;
  out.grads.reserve(bound.vars.size());
  for (const ad::Var& v : bound.vars) out.grads.push_back(v.grad());
  return out;
}

}  // namespace

BatchGrad batch_gradients(const EgiinetModel& model,
                          const std::vector<const LoadedSample*>& batch, int threads) {
  if (batch.empty()) throw std::invalid_argument("batch_gradients: empty batch");
  std::vector<SampleGrad> per_sample(batch.size());
  parallel_for(static_cast<int>(batch.size()), resolve_threads(threads), [&](int i) {
    per_sample[static_cast<size_t>(i)] = sample_gradients(model, *batch[static_cast<size_t>(i)]);
  });

  // fixed-order reduction keeps results independent of scheduling
  const double inv = 1.0 / static_cast<double>(batch.size());
  BatchGrad out;
  out.grads = std::move(per_sample[0].grads);
  for (size_t s = 1; s < per_sample.size(); ++s) {
    for (size_t p = 0; p < out.grads.size(); ++p) out.grads[p] += per_sample[s].grads[p];
  }
  for (ad::Mat& g : out.grads) g *= inv;

  LossBundle& b = out.bundle;
  b.alpha = per_sample[0].bundle.alpha;
  for (const SampleGrad& s : per_sample) {
    b.l_infor += s.bundle.l_infor;
    b.l_stc += s.bundle.l_stc;
    b.l_transfer += s.bundle.l_transfer;
    b.l_l1cd += s.bundle.l_l1cd;
    b.l_total += s.bundle.l_total;
  }
  b.l_infor *= inv;
  b.l_stc *= inv;
  b.l_transfer *= inv;
  b.l_l1cd *= inv;
  b.l_total *= inv;
  return out;
}

void adam_step(ParamStore& store, const std::vector<ad::Mat>& grads, double lr, int64_t t,
               double beta1, double beta2, double eps) {
  if (grads.size() != store.entries.size()) {
    throw std::invalid_argument("adam_step: gradient count does not match parameter count");
  }
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < grads.size(); ++i) {
    ParamStore::Entry& e = store.entries[i];
    e.m = beta1 * e.m + (1.0 - beta1) * grads[i];
    e.v = beta2 * e.v + (1.0 - beta2) * grads[i].cwiseProduct(grads[i]);
    const ad::Mat m_hat = e.m / bc1;
    const ad::Mat v_hat = e.v / bc2;
    e.value.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + eps);
  }
}

double validation_cd_l2(const EgiinetModel& model, const Dataset& val, int threads) {
  if (val.size() == 0) throw std::invalid_argument("validation_cd_l2: empty dataset");
  std::vector<double> cd(static_cast<size_t>(val.size()));
  parallel_for(val.size(), resolve_threads(threads), [&](int i) {
    const LoadedSample& s = val.samples[static_cast<size_t>(i)];
    const ImageView* view = model.config().variant == Variant::no_image ? nullptr : &s.view;
    const PointCloud pred = model.complete(s.partial, view);
    cd[static_cast<size_t>(i)] = chamfer_l2(pred, s.complete);
  });
  double sum = 0.0;
  for (double v : cd) sum += v;
  return sum / static_cast<double>(val.size());
}

TrainResult train_model(EgiinetModel& model, const RunConfig& cfg, const Dataset& train,
                        const Dataset& val, std::ostream* progress) {
  if (train.size() == 0) throw std::invalid_argument("train_model: empty training set");
  const int threads = resolve_threads(cfg.threads);
  const int batches_per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const int64_t total_steps = static_cast<int64_t>(batches_per_epoch) * cfg.epochs;

  TrainResult result;
  result.initial_val_cd_l2 = validation_cd_l2(model, val, threads);
  if (progress) {
    *progress << "initial val_cd_l2 " << result.initial_val_cd_l2 << "\n";
  }

  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "train-shuffle"));
  std::vector<int> order(static_cast<size_t>(train.size()));
  for (int i = 0; i < train.size(); ++i) order[static_cast<size_t>(i)] = i;

  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    LossBundle epoch_mean;
    for (int b = 0; b < batches_per_epoch; ++b) {
      std::vector<const LoadedSample*> batch;
      const int first = b * cfg.batch_size;
      const int last = std::min(first + cfg.batch_size, train.size());
      for (int i = first; i < last; ++i) {
        batch.push_back(&train.samples[static_cast<size_t>(order[static_cast<size_t>(i)])]);
      }

      BatchGrad bg = batch_gradients(model, batch, threads);
      if (const char* bad = bg.bundle.first_nonfinite()) {
        throw std::runtime_error("training diverged: loss component " + std::string(bad) +
                                 " is non-finite at step " + std::to_string(step));
      }

      const double lr_t =
          cfg.lr * 0.5 *
          (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                          static_cast<double>(total_steps)));
      ++step;
      adam_step(model.params(), bg.grads, lr_t, step);

      epoch_mean.l_infor += bg.bundle.l_infor;
      epoch_mean.l_stc += bg.bundle.l_stc;
      epoch_mean.l_transfer += bg.bundle.l_transfer;
      epoch_mean.l_l1cd += bg.bundle.l_l1cd;
      epoch_mean.l_total += bg.bundle.l_total;
      epoch_mean.alpha = bg.bundle.alpha;
    }
    const double inv = 1.0 / static_cast<double>(batches_per_epoch);
    epoch_mean.l_infor *= inv;
    epoch_mean.l_stc *= inv;
    epoch_mean.l_transfer *= inv;
    epoch_mean.l_l1cd *= inv;
    epoch_mean.l_total *= inv;

    EpochLog log;
    log.epoch = epoch;
    log.mean = epoch_mean;
    log.val_cd_l2 = validation_cd_l2(model, val, threads);
    result.log.push_back(log);

    if (progress) {
      char buf[256];
      std::snprintf(buf, sizeof(buf),
                    "epoch %3d  l_total %.6f  l_l1cd %.6f  l_transfer %.6f  val_cd_l2 %.6f\n",
                    epoch, log.mean.l_total, log.mean.l_l1cd, log.mean.l_transfer, log.val_cd_l2);
      *progress << buf << std::flush;
    }
  }
  result.steps = step;
  std::ostringstream rng_text;
  rng_text << shuffle_rng;
  result.rng_state = rng_text.str();
  return result;
}

void write_train_log_csv(const std::string& path, const TrainResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_train_log_csv: cannot open " + path);
  out << "epoch,l_infor,l_stc,l_transfer,l_l1cd,l_total,val_cd_l2\n";
  char buf[320];
  for (const EpochLog& row : result.log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.epoch,
                  row.mean.l_infor, row.mean.l_stc, row.mean.l_transfer, row.mean.l_l1cd,
                  row.mean.l_total, row.val_cd_l2);
    out << buf;
  }
  if (!out) throw std::runtime_error("write_train_log_csv: write failed for " + path);
}

std::vector<EvalRow> evaluate_dataset(const Dataset& data, const Predictor& predict,
                                      const std::string& variant_label, double threshold_d,
                                      int threads) {
  if (data.size() == 0) throw std::invalid_argument("evaluate_dataset: empty dataset");

  std::vector<double> cd(static_cast<size_t>(data.size()));
  std::vector<double> fs(static_cast<size_t>(data.size()));
  std::vector<std::string> errors(static_cast<size_t>(data.size()));
  parallel_for(data.size(), resolve_threads(threads), [&](int i) {
    const LoadedSample& s = data.samples[static_cast<size_t>(i)];
    try {
      const PointCloud pred = predict(s);
      cd[static_cast<size_t>(i)] = chamfer_l2(pred, s.complete);
      fs[static_cast<size_t>(i)] = fscore(pred, s.complete, threshold_d);
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(i)] = "sample " + std::to_string(s.id) + ": " + e.what();
    }
  });
  for (const std::string& err : errors) {
    if (!err.empty()) throw std::runtime_error("evaluate_dataset: " + err);
  }

  std::vector<EvalRow> rows;
  for (ShapeFamily family : all_families()) {
    EvalRow row;
    row.variant = variant_label;
    row.family = to_string(family);
    for (int i = 0; i < data.size(); ++i) {
      if (data.samples[static_cast<size_t>(i)].family != family) continue;
      row.cd_l2_x1000 += cd[static_cast<size_t>(i)] * 1000.0;
      row.fscore += fs[static_cast<size_t>(i)];
      ++row.count;
    }
    if (row.count == 0) continue;
    row.cd_l2_x1000 /= row.count;
    row.fscore /= row.count;
    rows.push_back(std::move(row));
  }

  EvalRow avg;
  avg.variant = variant_label;
  avg.family = "avg";
  avg.count = data.size();
  for (int i = 0; i < data.size(); ++i) {
    avg.cd_l2_x1000 += cd[static_cast<size_t>(i)] * 1000.0;
    avg.fscore += fs[static_cast<size_t>(i)];
  }
  avg.cd_l2_x1000 /= avg.count;
  avg.fscore /= avg.count;
  rows.push_back(std::move(avg));
  return rows;
}

std::vector<EvalRow> evaluate_model(const EgiinetModel& model, const Dataset& data,
                                    double threshold_d, int threads) {
  const bool no_image = model.config().variant == Variant::no_image;
  return evaluate_dataset(
      data,
      [&](const LoadedSample& s) { return model.complete(s.partial, no_image ? nullptr : &s.view); },
      to_string(model.config().variant), threshold_d, threads);
}

void write_metrics_csv(const std::string& path, const std::vector<EvalRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path);
  out << "variant,family,cd_l2_x1000,fscore\n";
  char buf[256];
  for (const EvalRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g\n", r.variant.c_str(), r.family.c_str(),
                  r.cd_l2_x1000, r.fscore);
    out << buf;
  }
  if (!out) throw std::runtime_error("write_metrics_csv: write failed for " + path);
}

AblationSummary run_ablation(const RunConfig& base, const Dataset& train, const Dataset& val,
                             const std::vector<Variant>& variants, int n_seeds,
                             std::ostream* progress) {
  if (n_seeds < 1) throw std::invalid_argument("run_ablation: need at least one seed");
  AblationSummary summary;
  for (Variant variant : variants) {
    std::vector<double> finals;
    for (int k = 0; k < n_seeds; ++k) {
      RunConfig cfg = base;
      cfg.model.variant = variant;
      cfg.seed = derive_seed(base.seed, static_cast<uint64_t>(k));
      cfg.validate();

      EgiinetModel model(cfg.model);
      model.init_params(cfg.seed);
      if (progress) {
        *progress << "ablation " << to_string(variant) << " seed " << k << "\n" << std::flush;
      }
      TrainResult r = train_model(model, cfg, train, val, nullptr);
      const double final_cd = r.log.back().val_cd_l2;
      finals.push_back(final_cd);
      summary.runs.push_back(AblationRun{variant, cfg.seed, final_cd});
      if (progress) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "  final val_cd_l2 %.6f\n", final_cd);
        *progress << buf << std::flush;
      }
    }
    std::sort(finals.begin(), finals.end());
    const double median = finals.size() % 2 == 1
                              ? finals[finals.size() / 2]
                              : 0.5 * (finals[finals.size() / 2 - 1] + finals[finals.size() / 2]);
    summary.median_val_cd.emplace_back(variant, median);
  }
  return summary;
}

void write_ablation_csv(const std::string& path, const AblationSummary& summary) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_ablation_csv: cannot open " + path);
  out << "variant,seed,val_cd_l2_x1000\n";
  char buf[192];
  for (const AblationRun& r : summary.runs) {
    std::snprintf(buf, sizeof(buf), "%s,%llu,%.17g\n", to_string(r.variant).c_str(),
                  static_cast<unsigned long long>(r.seed), r.val_cd_l2 * 1000.0);
    out << buf;
  }
  out << "# medians\n";
  for (const auto& [variant, median] : summary.median_val_cd) {
    std::snprintf(buf, sizeof(buf), "%s,median,%.17g\n", to_string(variant).c_str(),
                  median * 1000.0);
    out << buf;
  }
  if (!out) throw std::runtime_error("write_ablation_csv: write failed for " + path);
}

std::vector<EvalRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_metrics_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "variant,family,cd_l2_x1000,fscore") {
    throw std::runtime_error("read_metrics_csv: bad header in " + path);
  }
  std::vector<EvalRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    EvalRow r;
    std::string cd_text, fs_text;
    if (!std::getline(ls, r.variant, ',') || !std::getline(ls, r.family, ',') ||
        !std::getline(ls, cd_text, ',') || !std::getline(ls, fs_text)) {
      throw std::runtime_error("read_metrics_csv: malformed row in " + path);
    }
    r.cd_l2_x1000 = std::stod(cd_text);
    r.fscore = std::stod(fs_text);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace egiinet
