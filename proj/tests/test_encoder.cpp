// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "egiinet/encoder.hpp"
#include "egiinet/model.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace egiinet;
using Modality = TokenSequence::Modality;

TEST_CASE("zero-depth encoder is the identity") {
  ModelConfig cfg = support::tiny_config();
  cfg.sfe_blocks = 0;
  EgiinetModel model(cfg);
  model.init_params(1);

  const ad::Mat x = support::random_tokens(cfg.n_tokens, cfg.channels, 5);
  const ad::Mat y = model.encode_tokens(x, Modality::pointcloud);
  CHECK((y - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("both modality paths run the identical shared function") {
  const ModelConfig cfg = support::tiny_config();
  EgiinetModel model(cfg);
  model.init_params(2);

  const ad::Mat x = support::random_tokens(cfg.n_tokens, cfg.channels, 7);
  const ad::Mat via_image = model.encode_tokens(x, Modality::image);
  const ad::Mat via_pc = model.encode_tokens(x, Modality::pointcloud);
  CHECK((via_image - via_pc).cwiseAbs().maxCoeff() == 0.0);

  const ad::Mat t_img = model.transfer_tokens(x, Modality::image);
  const ad::Mat t_pc = model.transfer_tokens(x, Modality::pointcloud);
  CHECK((t_img - t_pc).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("no_sharing splits the paths") {
  const ModelConfig cfg = support::tiny_config(Variant::no_sharing);
  EgiinetModel model(cfg);
  model.init_params(2);

  const ad::Mat x = support::random_tokens(cfg.n_tokens, cfg.channels, 7);
  const ad::Mat via_image = model.encode_tokens(x, Modality::image);
  const ad::Mat via_pc = model.encode_tokens(x, Modality::pointcloud);
  CHECK((via_image - via_pc).cwiseAbs().maxCoeff() > 1e-12);
}

TEST_CASE("attention maps are row-stochastic in every block and head") {
  const ModelConfig cfg = support::tiny_config();
  EgiinetModel model(cfg);
  model.init_params(3);

  const ad::Mat x = support::random_tokens(cfg.n_tokens, cfg.channels, 11);
  const auto maps = model.encoder_attention_maps(x, Modality::pointcloud);
  REQUIRE(static_cast<int>(maps.size()) == cfg.sfe_blocks);
  for (const auto& block : maps) {
    REQUIRE(static_cast<int>(block.size()) == cfg.heads);
    for (const ad::Mat& head : block) {
      REQUIRE(head.rows() == cfg.n_tokens);
      REQUIRE(head.cols() == cfg.n_tokens);
      CHECK(head.minCoeff() >= 0.0);
      for (long r = 0; r < head.rows(); ++r) {
        CHECK(std::abs(head.row(r).sum() - 1.0) < 1e-5);
      }
    }
  }
}

TEST_CASE("single-token sequence yields the trivial attention map") {
  ModelConfig cfg = support::tiny_config();
  cfg.n_tokens = 1;
  cfg.image_h = 8;
  cfg.image_w = 8;
  cfg.pc_input = 4;
  cfg.stage1_centers = 1;
  cfg.n_out = 16;
  EgiinetModel model(cfg);
  model.init_params(4);

  const ad::Mat x = support::random_tokens(1, cfg.channels, 13);
  const auto maps = model.encoder_attention_maps(x, Modality::image);
  for (const auto& block : maps) {
    for (const ad::Mat& head : block) {
      REQUIRE(head.rows() == 1);
      REQUIRE(head.cols() == 1);
      CHECK(head(0, 0) == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("perturbing any shared parameter moves both modality outputs") {
  const ModelConfig cfg = support::tiny_config();
  EgiinetModel model(cfg);
  model.init_params(6);

  const ad::Mat x_img = support::random_tokens(cfg.n_tokens, cfg.channels, 17);
  const ad::Mat x_pc = support::random_tokens(cfg.n_tokens, cfg.channels, 19);

  const ad::Mat base_img = model.encode_tokens(x_img, Modality::image);
  const ad::Mat base_pc = model.encode_tokens(x_pc, Modality::pointcloud);

  std::mt19937_64 rng(23);
  int probes = 0;
  while (probes < 20) {
    const size_t which = rng() % model.params().entries.size();
    auto& entry = model.params().entries[which];
    if (entry.name.rfind("sfe.", 0) != 0) continue;
    ++probes;
    const long r = static_cast<long>(rng() % static_cast<uint64_t>(entry.value.rows()));
    const long c = static_cast<long>(rng() % static_cast<uint64_t>(entry.value.cols()));
    const double keep = entry.value(r, c);
    entry.value(r, c) = keep + 1e-3;

    const ad::Mat now_img = model.encode_tokens(x_img, Modality::image);
    const ad::Mat now_pc = model.encode_tokens(x_pc, Modality::pointcloud);
    entry.value(r, c) = keep;

    CAPTURE(entry.name);
    CHECK((now_img - base_img).cwiseAbs().maxCoeff() > 1e-12);
    CHECK((now_pc - base_pc).cwiseAbs().maxCoeff() > 1e-12);
  }
}

TEST_CASE("channel mismatch is a configuration error") {
  const ModelConfig cfg = support::tiny_config();
  EgiinetModel model(cfg);
  model.init_params(1);
  const ad::Mat wrong = support::random_tokens(cfg.n_tokens, cfg.channels + 1, 29);
  CHECK_THROWS_AS(model.encode_tokens(wrong, Modality::image), std::invalid_argument);
}

TEST_CASE("encoder stack gradients match finite differences") {
  const ModelConfig cfg = support::tiny_config();
  EgiinetModel model(cfg);
  model.init_params(8);
  const ad::Mat x = support::random_tokens(cfg.n_tokens, cfg.channels, 31);

  auto loss_at = [&]() {
    ad::Tape t;
    Bound b = Bound::bind(t, model.params());
    ad::Var y = vit_stack(t, b, "sfe", cfg.sfe_blocks, t.leaf(x), cfg.heads);
    return t.mean_all(t.cmul(y, y)).scalar();
  };

  ad::Tape t;
  Bound b = Bound::bind(t, model.params());
  ad::Var y = vit_stack(t, b, "sfe", cfg.sfe_blocks, t.leaf(x), cfg.heads);
  t.backward(t.mean_all(t.cmul(y, y)));

  std::mt19937_64 rng(37);
  const double h = 1e-5;
  int checked = 0;
  while (checked < 30) {
    const size_t which = rng() % model.params().entries.size();
    auto& entry = model.params().entries[which];
    if (entry.name.rfind("sfe.", 0) != 0) continue;
    ++checked;
    const long r = static_cast<long>(rng() % static_cast<uint64_t>(entry.value.rows()));
    const long c = static_cast<long>(rng() % static_cast<uint64_t>(entry.value.cols()));
    const double keep = entry.value(r, c);
    entry.value(r, c) = keep + h;
    const double up = loss_at();
    entry.value(r, c) = keep - h;
    const double down = loss_at();
    entry.value(r, c) = keep;
    const double fd = (up - down) / (2.0 * h);
    const double analytic = b(entry.name).grad()(r, c);
    CAPTURE(entry.name);
    CAPTURE(fd);
    CAPTURE(analytic);
    CHECK(oracle::grad_close(fd, analytic, 1e-5, 1e-8));
  }
}
