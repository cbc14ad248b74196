// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "egiinet/checkpoint.hpp"
#include "egiinet/config.hpp"
#include "egiinet/model.hpp"
#include "egiinet/rng.hpp"
#include "egiinet/train.hpp"
#include "egiinet/visualize.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace egiinet;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_run_config(Variant v = Variant::full) {
  RunConfig cfg;
  cfg.model = support::tiny_config(v);
  cfg.lr = 1e-3;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  cfg.seed = 5;
  cfg.train_samples = 4;
  cfg.val_samples = 2;
  cfg.n_complete = 64;
  return cfg;
}

Dataset tiny_dataset(int n, uint64_t seed) {
  Dataset d;
  for (int i = 0; i < n; ++i) {
    d.samples.push_back(support::tiny_sample(
        derive_seed(seed, static_cast<uint64_t>(i)),
        all_families()[static_cast<size_t>(i) % all_families().size()]));
    d.samples.back().id = i;
  }
  return d;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("run config: parse, reject unknowns, round trip") {
  std::istringstream text(
      "# comment\n"
      "variant = no_ftloss\n"
      "channels = 32\n"
      "lr = 0.005  # inline comment\n"
      "seed = 42\n"
      "families = composite,torus\n");
  const RunConfig cfg = parse_run_config(text);
  CHECK(cfg.model.variant == Variant::no_ftloss);
  CHECK(cfg.model.channels == 32);
  CHECK(cfg.lr == doctest::Approx(0.005));
  CHECK(cfg.seed == 42);
  REQUIRE(cfg.families.size() == 2);
  CHECK(cfg.families[0] == ShapeFamily::composite);

  std::istringstream bad("nonsense = 3\n");
  CHECK_THROWS_AS(parse_run_config(bad), std::invalid_argument);
  std::istringstream malformed("channels 32\n");
  CHECK_THROWS_AS(parse_run_config(malformed), std::invalid_argument);

  RunConfig full = tiny_run_config();
  full.lr = 0.0001220703125;
  full.families = {ShapeFamily::box};
  std::ostringstream out;
  write_run_config(full, out);
  std::istringstream back(out.str());
  const RunConfig again = parse_run_config(back);
  CHECK(again.lr == full.lr);
  CHECK(again.model.channels == full.model.channels);
  CHECK(again.seed == full.seed);
  REQUIRE(again.families.size() == 1);
  CHECK(again.families[0] == ShapeFamily::box);
}

TEST_CASE("EGIINET_SEED overrides the configured seed") {
  RunConfig cfg = tiny_run_config();
  cfg.seed = 7;
  setenv("EGIINET_SEED", "123", 1);
  apply_env_seed_override(cfg);
  CHECK(cfg.seed == 123);
  unsetenv("EGIINET_SEED");
  apply_env_seed_override(cfg);
  CHECK(cfg.seed == 123);  // unset leaves it alone
}

TEST_CASE("checkpoint round trip is bitwise") {
  const fs::path dir = fs::temp_directory_path() / "egiinet_ckpt_test";
  fs::remove_all(dir);

  RunConfig cfg = tiny_run_config();
  EgiinetModel model(cfg.model);
  model.init_params(17);

  const LoadedSample s = support::tiny_sample(31);
  const PointCloud before = model.complete(s.partial, &s.view);

  std::mt19937_64 rng(99);
  rng.discard(123);
  std::ostringstream rng_text;
  rng_text << rng;

  save_checkpoint(dir.string(), model, cfg, 77, rng_text.str());
  LoadedCheckpoint loaded = load_checkpoint(dir.string());
  CHECK(loaded.step == 77);
  CHECK(loaded.rng_state == rng_text.str());
  CHECK(loaded.config.model.channels == cfg.model.channels);
  CHECK(loaded.config.seed == cfg.seed);

  std::mt19937_64 rng_back;
  std::istringstream(loaded.rng_state) >> rng_back;
  CHECK(rng_back == rng);

  const PointCloud after = loaded.model->complete(s.partial, &s.view);
  REQUIRE(after.size() == before.size());
  for (int i = 0; i < after.size(); ++i) {
    CHECK((after[i] - before[i]).norm() == 0.0);
  }

  // saving the loaded model reproduces the parameter blob byte for byte
  const fs::path dir2 = fs::temp_directory_path() / "egiinet_ckpt_test2";
  fs::remove_all(dir2);
  save_checkpoint(dir2.string(), *loaded.model, loaded.config, loaded.step, loaded.rng_state);
  CHECK(read_file((dir / "params.bin").string()) == read_file((dir2 / "params.bin").string()));
  CHECK(read_file((dir / "manifest.txt").string()) == read_file((dir2 / "manifest.txt").string()));

  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("ablation variants change only the documented subgraph") {
  const ModelConfig base = support::tiny_config();

  const EgiinetModel full{base};
  const EgiinetModel no_sharing{support::tiny_config(Variant::no_sharing)};
  const EgiinetModel no_ftloss{support::tiny_config(Variant::no_ftloss)};
  const EgiinetModel no_sftnet{support::tiny_config(Variant::no_sftnet)};
  const EgiinetModel no_image{support::tiny_config(Variant::no_image)};

  auto names = [](const EgiinetModel& m) {
    std::set<std::string> out;
    for (const auto& e : m.params().entries) out.insert(e.name);
    return out;
  };
  auto count_prefix = [](const EgiinetModel& m, const std::string& prefix) {
    int64_t n = 0;
    for (const auto& e : m.params().entries) {
      if (e.name.rfind(prefix, 0) == 0) n += e.value.size();
    }
    return n;
  };

  // no_ftloss touches only the objective, never the parameter set
  CHECK(names(no_ftloss) == names(full));

  // no_sharing duplicates encoder + transfer scalars exactly
  CHECK(count_prefix(no_sharing, "sfe.") == 2 * count_prefix(full, "sfe."));
  CHECK(count_prefix(no_sharing, "sft.") == 2 * count_prefix(full, "sft."));
  CHECK(count_prefix(no_sharing, "tok.") == count_prefix(full, "tok."));
  CHECK(count_prefix(no_sharing, "dec.") == count_prefix(full, "dec."));
  CHECK(count_prefix(no_sharing, "fuse.") == count_prefix(full, "fuse."));

  // no_sftnet drops exactly the transfer stack
  CHECK(count_prefix(no_sftnet, "sft.") == 0);
  auto expectation = names(full);
  for (auto it = expectation.begin(); it != expectation.end();) {
    if (it->rfind("sft.", 0) == 0) it = expectation.erase(it);
    else ++it;
  }
  CHECK(names(no_sftnet) == expectation);

  // no_image severs the image tokenizer and the fusion layer
  CHECK(count_prefix(no_image, "tok.img.") == 0);
  CHECK(count_prefix(no_image, "fuse.") == 0);
  CHECK(count_prefix(no_image, "sfe.") == count_prefix(full, "sfe."));
  CHECK(count_prefix(no_image, "dec.") == count_prefix(full, "dec."));

  CHECK_THROWS_AS(variant_from_string("bogus"), std::invalid_argument);
}

TEST_CASE("matched initialization across variants for shared tensors") {
  EgiinetModel full{support::tiny_config()};
  EgiinetModel ablated{support::tiny_config(Variant::no_ftloss)};
  full.init_params(5);
  ablated.init_params(5);
  for (const auto& e : full.params().entries) {
    const ad::Mat& other = ablated.params().value(e.name);
    CHECK((other - e.value).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("evaluating ground truth against itself is perfect") {
  const Dataset data = tiny_dataset(6, 41);
  const auto rows = evaluate_dataset(
      data, [](const LoadedSample& s) { return s.complete; }, "oracle", 0.001, 1);
  REQUIRE(!rows.empty());
  for (const auto& r : rows) {
    CHECK(r.cd_l2_x1000 == doctest::Approx(0.0));
    CHECK(r.fscore == doctest::Approx(1.0));
  }
  CHECK(rows.back().family == "avg");
  CHECK(rows.back().count == data.size());
}

TEST_CASE("evaluation matches the metric kernels sample by sample") {
  const Dataset data = tiny_dataset(5, 43);
  const ModelConfig cfg = support::tiny_config();
  EgiinetModel model(cfg);
  model.init_params(3);

  const auto rows = evaluate_model(model, data, 0.001, 1);
  double expect_cd = 0.0, expect_fs = 0.0;
  for (const LoadedSample& s : data.samples) {
    const PointCloud pred = model.complete(s.partial, &s.view);
    expect_cd += chamfer_l2(pred, s.complete) * 1000.0;
    expect_fs += fscore(pred, s.complete, 0.001);
  }
  expect_cd /= data.size();
  expect_fs /= data.size();
  CHECK(rows.back().family == "avg");
  CHECK(rows.back().cd_l2_x1000 == doctest::Approx(expect_cd));
  CHECK(rows.back().fscore == doctest::Approx(expect_fs));
}

TEST_CASE("metrics CSV round trips") {
  const fs::path dir = fs::temp_directory_path() / "egiinet_csv_test";
  fs::create_directories(dir);
  const Dataset data = tiny_dataset(4, 47);
  const auto rows = evaluate_dataset(
      data, [](const LoadedSample& s) { return s.partial; }, "full", 0.001, 1);
  const std::string path = (dir / "metrics.csv").string();
  write_metrics_csv(path, rows);
  const auto back = read_metrics_csv(path);
  REQUIRE(back.size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].variant == rows[i].variant);
    CHECK(back[i].family == rows[i].family);
    CHECK(back[i].cd_l2_x1000 == rows[i].cd_l2_x1000);
    CHECK(back[i].fscore == rows[i].fscore);
  }
  fs::remove_all(dir);
}

TEST_CASE("training is reproducible and logs every component") {
  const RunConfig cfg = tiny_run_config();
  const Dataset all = tiny_dataset(cfg.train_samples + cfg.val_samples, 53);
  const Dataset train_set = slice(all, 0, cfg.train_samples);
  const Dataset val_set = slice(all, cfg.train_samples, cfg.val_samples);

  EgiinetModel m1(cfg.model);
  m1.init_params(cfg.seed);
  const TrainResult r1 = train_model(m1, cfg, train_set, val_set);

  EgiinetModel m2(cfg.model);
  m2.init_params(cfg.seed);
  const TrainResult r2 = train_model(m2, cfg, train_set, val_set);

  REQUIRE(r1.log.size() == r2.log.size());
  for (size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].mean.l_total == r2.log[i].mean.l_total);
    CHECK(r1.log[i].mean.l_transfer == r2.log[i].mean.l_transfer);
    CHECK(r1.log[i].val_cd_l2 == r2.log[i].val_cd_l2);
  }
  CHECK(r1.rng_state == r2.rng_state);

  // thread count must not affect the numbers
  RunConfig serial = cfg;
  serial.threads = 1;
  EgiinetModel m3(cfg.model);
  m3.init_params(cfg.seed);
  const TrainResult r3 = train_model(m3, serial, train_set, val_set);
  for (size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].mean.l_total == r3.log[i].mean.l_total);
    CHECK(r1.log[i].val_cd_l2 == r3.log[i].val_cd_l2);
  }

  const fs::path dir = fs::temp_directory_path() / "egiinet_trainlog_test";
  fs::create_directories(dir);
  write_train_log_csv((dir / "log.csv").string(), r1);
  const std::string text = read_file((dir / "log.csv").string());
  CHECK(text.find("epoch,l_infor,l_stc,l_transfer,l_l1cd,l_total,val_cd_l2") == 0);
  fs::remove_all(dir);
}

TEST_CASE("no_ftloss logs the transfer loss but optimizes chamfer only") {
  const RunConfig cfg = tiny_run_config(Variant::no_ftloss);
  const Dataset data = tiny_dataset(2, 59);
  const std::vector<const LoadedSample*> batch = {&data.samples[0], &data.samples[1]};

  EgiinetModel model(cfg.model);
  model.init_params(cfg.seed);
  const BatchGrad bg = batch_gradients(model, batch, 1);
  CHECK(bg.bundle.l_transfer > 0.0);           // computed and logged
  CHECK(bg.bundle.l_total == bg.bundle.l_l1cd);  // excluded from the objective

  // full-variant invariants for contrast
  EgiinetModel full{support::tiny_config()};
  full.init_params(cfg.seed);
  const BatchGrad bg_full = batch_gradients(full, batch, 1);
  CHECK(bg_full.bundle.l_transfer ==
        doctest::Approx(bg_full.bundle.l_infor + bg_full.bundle.l_stc));
  CHECK(bg_full.bundle.l_total ==
        doctest::Approx(0.01 * bg_full.bundle.l_transfer + bg_full.bundle.l_l1cd));
}

TEST_CASE("no_sftnet trains on the direct Gram-alignment objective") {
  const ModelConfig cfg = support::tiny_config(Variant::no_sftnet);
  EgiinetModel model(cfg);
  model.init_params(83);
  const LoadedSample s = support::tiny_sample(89);

  ad::Tape t;
  Bound b = Bound::bind(t, model.params());
  const ad::Mat target = cloud_to_mat(s.complete);
  const auto f = model.forward(t, b, s.partial, &s.view, &target);

  // recompute the simplified objective independently: encoder outputs of both
  // modalities, then the loop-based Gram difference over N' x C'
  ad::Tape t2;
  Bound b2 = Bound::bind(t2, model.params());
  const ad::Mat f_pc = tokenize_pointcloud(t2, b2, cfg, s.partial).tokens.val();
  const ad::Mat f_img = tokenize_image(t2, b2, cfg, s.view).tokens.val();
  const ad::Mat f_pc_stc = model.encode_tokens(f_pc, TokenSequence::Modality::pointcloud);
  const ad::Mat f_img_stc = model.encode_tokens(f_img, TokenSequence::Modality::image);

  const ad::Mat dg = oracle::gram(f_img_stc) - oracle::gram(f_pc_stc);
  double expected = 0.0;
  for (long i = 0; i < dg.rows(); ++i) {
    for (long j = 0; j < dg.cols(); ++j) expected += dg(i, j) * dg(i, j);
  }
  expected /= static_cast<double>(f_pc.rows()) * static_cast<double>(f_pc.cols());

  CHECK(std::abs(f.bundle.l_transfer - expected) < 1e-6);
  CHECK(f.bundle.l_stc == 0.0);
  CHECK(f.bundle.l_total ==
        doctest::Approx(cfg.alpha * f.bundle.l_transfer + f.bundle.l_l1cd));
}

TEST_CASE("divergence aborts with the offending component named") {
  const RunConfig cfg = tiny_run_config();
  const Dataset all = tiny_dataset(cfg.train_samples + cfg.val_samples, 61);
  const Dataset train_set = slice(all, 0, cfg.train_samples);
  const Dataset val_set = slice(all, cfg.train_samples, cfg.val_samples);

  EgiinetModel model(cfg.model);
  model.init_params(cfg.seed);
  model.params().value("dec.head.l2.w")(0, 0) = std::numeric_limits<double>::quiet_NaN();

  try {
    train_model(model, cfg, train_set, val_set);
    FAIL("expected divergence abort");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("diverged") != std::string::npos);
    CHECK(msg.find("l_") != std::string::npos);  // names a component
  }
}

TEST_CASE("attention mass accounting and heatmap overlay") {
  const ModelConfig cfg = support::tiny_config();
  EgiinetModel model(cfg);
  model.init_params(67);
  const LoadedSample s = support::tiny_sample(71);

  ad::Tape t;
  Bound b = Bound::bind(t, model.params());
  ForwardOptions opts;
  opts.collect_attention = true;
  const auto f = model.forward(t, b, s.partial, &s.view, nullptr, opts);

  const auto mass = image_token_attention_mass(f.cross_attention);
  REQUIRE(static_cast<int>(mass.size()) == cfg.n_tokens);
  double total = 0.0;
  for (double m : mass) {
    CHECK(m >= 0.0);
    total += m;
  }
  CHECK(std::abs(total - cfg.n_tokens) < 1e-4);

  const ImageView heat = attention_heatmap(mass, cfg.image_h / cfg.patch,
                                           cfg.image_w / cfg.patch, s.view.h, s.view.w);
  CHECK(heat.h == s.view.h);
  CHECK(heat.w == s.view.w);
  for (double v : heat.pix) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  const fs::path dir = fs::temp_directory_path() / "egiinet_viz_test";
  fs::create_directories(dir);
  const std::string out_png = (dir / "attn.png").string();
  visualize_attention(model, s, out_png);
  const ImageView written = load_png(out_png);
  CHECK(written.h == s.view.h);
  CHECK(written.w == s.view.w);
  for (double v : written.pix) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  fs::remove_all(dir);

  EgiinetModel severed{support::tiny_config(Variant::no_image)};
  severed.init_params(67);
  CHECK_THROWS_AS(visualize_attention(severed, s, out_png), std::runtime_error);
}

TEST_CASE("dataset family subset is honored") {
  const fs::path dir = fs::temp_directory_path() / "egiinet_family_test";
  fs::remove_all(dir);
  DatasetConfig cfg;
  cfg.n_samples = 4;
  cfg.n_complete = 64;
  cfg.partial_size = 32;
  cfg.image_h = 32;
  cfg.image_w = 16;
  cfg.seed = 3;
  cfg.families = {ShapeFamily::composite};
  const auto records = build_dataset(cfg, dir.string());
  for (const auto& r : records) {
    CHECK(r.family == ShapeFamily::composite);
  }
  fs::remove_all(dir);
}
