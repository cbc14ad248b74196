// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "egiinet/fusion.hpp"
#include "egiinet/model.hpp"
#include "egiinet/train.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace egiinet;

TEST_CASE("cross-attention rows are stochastic and exactly one layer is used") {
  const ModelConfig cfg = support::tiny_config();
  EgiinetModel model(cfg);
  model.init_params(1);

  const LoadedSample s = support::tiny_sample(11);
  ad::Tape t;
  Bound b = Bound::bind(t, model.params());
  ForwardOptions opts;
  opts.collect_attention = true;
  const auto f = model.forward(t, b, s.partial, &s.view, nullptr, opts);

  // one cross-attention application: exactly `heads` weight maps
  REQUIRE(static_cast<int>(f.cross_attention.size()) == cfg.heads);
  for (const ad::Mat& head : f.cross_attention) {
    REQUIRE(head.rows() == cfg.n_tokens);
    REQUIRE(head.cols() == cfg.n_tokens);
    CHECK(head.minCoeff() >= 0.0);
    for (long r = 0; r < head.rows(); ++r) {
      CHECK(std::abs(head.row(r).sum() - 1.0) < 1e-5);
    }
  }
}

TEST_CASE("zeroed value/output projections reduce fusion to the residual") {
  const ModelConfig cfg = support::tiny_config();
  EgiinetModel model(cfg);
  model.init_params(3);
  model.params().value("fuse.wv").setZero();
  model.params().value("fuse.wo").setZero();

  ad::Tape t;
  Bound b = Bound::bind(t, model.params());
  ad::Var f_pc = t.leaf(support::random_tokens(cfg.n_tokens, cfg.channels, 5));
  ad::Var f_img = t.leaf(support::random_tokens(cfg.n_tokens, cfg.channels, 7));
  const FusedFeature fused = fuse(t, b, cfg.heads, f_pc, f_img);
  CHECK((fused.tokens.val() - f_pc.val()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a single image token receives all attention weight") {
  const ModelConfig cfg = support::tiny_config();
  EgiinetModel model(cfg);
  model.init_params(5);

  ad::Tape t;
  Bound b = Bound::bind(t, model.params());
  ad::Var f_pc = t.leaf(support::random_tokens(1, cfg.channels, 9));
  ad::Var f_img = t.leaf(support::random_tokens(1, cfg.channels, 13));
  const FusedFeature fused = fuse(t, b, cfg.heads, f_pc, f_img);
  for (const ad::Var& head : fused.attention) {
    CHECK(head.val()(0, 0) == doctest::Approx(1.0));
  }
}

TEST_CASE("fusion rejects mismatched token shapes") {
  const ModelConfig cfg = support::tiny_config();
  EgiinetModel model(cfg);
  model.init_params(5);
  ad::Tape t;
  Bound b = Bound::bind(t, model.params());
  ad::Var f_pc = t.leaf(support::random_tokens(cfg.n_tokens, cfg.channels, 9));
  ad::Var f_img = t.leaf(support::random_tokens(cfg.n_tokens + 1, cfg.channels, 13));
  CHECK_THROWS_AS(fuse(t, b, cfg.heads, f_pc, f_img), std::invalid_argument);
}

TEST_CASE("decoder emits a fixed-size finite cloud") {
  const ModelConfig cfg = support::tiny_config();
  EgiinetModel model(cfg);
  model.init_params(7);

  std::mt19937_64 seeds(17);
  for (int trial = 0; trial < 3; ++trial) {
    ad::Tape t;
    Bound b = Bound::bind(t, model.params());
    ad::Var fused = t.leaf(support::random_tokens(cfg.n_tokens, cfg.channels, seeds()));
    const ad::Mat cloud = decode(t, b, cfg, fused).val();
    REQUIRE(cloud.rows() == cfg.n_out);
    REQUIRE(cloud.cols() == 3);
    CHECK(cloud.allFinite());
  }
}

TEST_CASE("full forward is deterministic and differentiable end to end") {
  const ModelConfig cfg = support::tiny_config();
  EgiinetModel model(cfg);
  model.init_params(19);
  const LoadedSample s = support::tiny_sample(23);

  const PointCloud once = model.complete(s.partial, &s.view);
  const PointCloud twice = model.complete(s.partial, &s.view);
  REQUIRE(once.size() == twice.size());
  for (int i = 0; i < once.size(); ++i) {
    CHECK((once[i] - twice[i]).norm() == 0.0);
  }

  // finite-difference spot check of d(loss)/d(params) across components
  const auto grads = support::forward_gradients(model, s);
  std::mt19937_64 rng(29);
  const double h = 1e-5;
  int checked = 0;
  while (checked < 12) {
    const size_t which = rng() % model.params().entries.size();
    auto& e = model.params().entries[which];
    const long r = static_cast<long>(rng() % static_cast<uint64_t>(e.value.rows()));
    const long c = static_cast<long>(rng() % static_cast<uint64_t>(e.value.cols()));
    ++checked;
    const double keep = e.value(r, c);
    e.value(r, c) = keep + h;
    const double up = support::forward_loss(model, s);
    e.value(r, c) = keep - h;
    const double down = support::forward_loss(model, s);
    e.value(r, c) = keep;
    const double fd = (up - down) / (2.0 * h);
    const double analytic = grads[which](r, c);
    CAPTURE(e.name);
    CAPTURE(fd);
    CAPTURE(analytic);
    CHECK(oracle::grad_close(fd, analytic, 1e-5, 1e-8));
  }
}

TEST_CASE("no_image severs the image branch completely") {
  const ModelConfig cfg = support::tiny_config(Variant::no_image);
  EgiinetModel model(cfg);
  model.init_params(31);
  const LoadedSample s = support::tiny_sample(37);

  const PointCloud with_view = model.complete(s.partial, &s.view);
  const ImageView other = support::random_view(cfg.image_h, cfg.image_w, 41);
  const PointCloud with_other = model.complete(s.partial, &other);
  const PointCloud with_none = model.complete(s.partial, nullptr);

  REQUIRE(with_view.size() == with_other.size());
  for (int i = 0; i < with_view.size(); ++i) {
    CHECK((with_view[i] - with_other[i]).norm() == 0.0);
    CHECK((with_view[i] - with_none[i]).norm() == 0.0);
  }
}

TEST_CASE("overfitting a single sample reduces the full pipeline loss") {
  const ModelConfig cfg = support::tiny_config();
  EgiinetModel model(cfg);
  model.init_params(43);
  const LoadedSample s = support::tiny_sample(47);

  const double initial = support::forward_loss(model, s);
  const std::vector<const LoadedSample*> batch = {&s};
  for (int step = 1; step <= 50; ++step) {
    BatchGrad bg = batch_gradients(model, batch, 1);
    REQUIRE(bg.bundle.finite());
    adam_step(model.params(), bg.grads, 1e-3, step);
  }
  const double final_loss = support::forward_loss(model, s);
  CHECK(final_loss < initial);
}
