// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include "egiinet/tokenize.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace egiinet {

TokenSequence tokenize_image(ad::Tape& t, const Bound& b, const ModelConfig& cfg,
                             const ImageView& img) {
  if (img.h != cfg.image_h || img.w != cfg.image_w) {
    throw std::invalid_argument("tokenize_image: image dimensions do not match configuration");
  }
  if (img.h % cfg.patch != 0 || img.w % cfg.patch != 0) {
    throw std::invalid_argument("tokenize_image: image not divisible by patch size");
  }
  const int gh = img.h / cfg.patch;
  const int gw = img.w / cfg.patch;
  if (gh * gw != cfg.n_tokens) {
    throw std::invalid_argument("tokenize_image: patch grid does not produce n_tokens tokens");
  }

  const int patch_dim = cfg.patch * cfg.patch * 3;
  ad::Mat patches(cfg.n_tokens, patch_dim);
  for (int gy = 0; gy < gh; ++gy) {
    for (int gx = 0; gx < gw; ++gx) {
      const int row = gy * gw + gx;
      int col = 0;
      for (int py = 0; py < cfg.patch; ++py) {
        for (int px = 0; px < cfg.patch; ++px) {
          for (int ch = 0; ch < 3; ++ch) {
            patches(row, col++) = img.at(gy * cfg.patch + py, gx * cfg.patch + px, ch);
          }
        }
      }
    }
  }

  ad::Var tokens =
      t.add_rowvec(t.matmul(t.leaf(std::move(patches)), b("tok.img.proj.w")), b("tok.img.proj.b"));
  TokenSequence seq;
  seq.tokens = tokens;
  seq.modality = TokenSequence::Modality::image;
  return seq;
}

namespace {

// Relative member-minus-center offsets for one clustering stage, flattened
// cluster-major so that maxpool groups of max_k rows recover the centers.
ad::Mat cluster_offsets(const PointCloud& pts, const std::vector<int>& centers,
                        const std::vector<std::vector<int>>& clusters, int max_k) {
  ad::Mat rel(static_cast<long>(centers.size()) * max_k, 3);
  for (size_t ci = 0; ci < centers.size(); ++ci) {
    const Vec3& c = pts[centers[ci]];
    for (int m = 0; m < max_k; ++m) {
      const Vec3 d = pts[clusters[ci][static_cast<size_t>(m)]] - c;
      const long r = static_cast<long>(ci) * max_k + m;
      rel(r, 0) = d.x();
      rel(r, 1) = d.y();
      rel(r, 2) = d.z();
    }
  }
  return rel;
}

ad::Var mlp2(ad::Tape& t, const Bound& b, ad::Var x, const std::string& prefix) {
  ad::Var h = t.gelu(t.add_rowvec(t.matmul(x, b(prefix + ".l1.w")), b(prefix + ".l1.b")));
  return t.add_rowvec(t.matmul(h, b(prefix + ".l2.w")), b(prefix + ".l2.b"));
}

}  // namespace

ad::Var positional_embed(ad::Tape& t, const Bound& b, const ad::Mat& centers) {
  return mlp2(t, b, t.leaf(centers), "tok.pc.pos");
}

TokenSequence tokenize_pointcloud(ad::Tape& t, const Bound& b, const ModelConfig& cfg,
                                  const PointCloud& pc, PcTokenizeTrace* trace) {
  if (pc.size() < cfg.n_tokens) {
    throw std::invalid_argument("tokenize_pointcloud: cloud smaller than token count");
  }

  // canonical point order: lexicographic sort, then FPS from index 0
  PointCloud canon = pc;
  std::sort(canon.pts.begin(), canon.pts.end(), [](const Vec3& a, const Vec3& b2) {
    return std::tie(a.x(), a.y(), a.z()) < std::tie(b2.x(), b2.y(), b2.z());
  });

  const int s1 = std::min(cfg.stage1_centers, canon.size());
  const std::vector<int> idx1 = fps(canon, s1, 0);
  const auto clusters1 = ball_query(canon, idx1, cfg.radius1, cfg.max_k);

  ad::Var rel1 = t.leaf(cluster_offsets(canon, idx1, clusters1, cfg.max_k));
  ad::Var feat1 = t.maxpool_rows(mlp2(t, b, rel1, "tok.pc.s1"), cfg.max_k);  // s1 x c1

  PointCloud centers1;
  centers1.pts.reserve(static_cast<size_t>(s1));
  for (int i : idx1) centers1.pts.push_back(canon[i]);

  const std::vector<int> idx2 = fps(centers1, cfg.n_tokens, 0);
  const auto clusters2 = ball_query(centers1, idx2, cfg.radius2, cfg.max_k);

  std::vector<int> flat;
  flat.reserve(static_cast<size_t>(cfg.n_tokens) * cfg.max_k);
  for (const auto& cluster : clusters2) {
    for (int m : cluster) flat.push_back(m);
  }
  ad::Var members = t.gather_rows(feat1, std::move(flat));
  ad::Var rel2 = t.leaf(cluster_offsets(centers1, idx2, clusters2, cfg.max_k));
  ad::Var feat2 =
      t.maxpool_rows(mlp2(t, b, t.concat_cols({members, rel2}), "tok.pc.s2"), cfg.max_k);

  ad::Mat anchors(cfg.n_tokens, 3);
  for (int i = 0; i < cfg.n_tokens; ++i) {
    const Vec3& c = centers1[idx2[static_cast<size_t>(i)]];
    anchors(i, 0) = c.x();
    anchors(i, 1) = c.y();
    anchors(i, 2) = c.z();
  }

  TokenSequence seq;
  seq.tokens = t.add(feat2, positional_embed(t, b, anchors));
  seq.modality = TokenSequence::Modality::pointcloud;
  seq.anchors = std::move(anchors);

  if (trace) {
    trace->canonical = std::move(canon);
    trace->stage1_centers = idx1;
    trace->stage1_clusters = clusters1;
    trace->stage2_centers = idx2;
    trace->stage2_clusters = clusters2;
  }
  return seq;
}

void register_tokenizers(ParamStore& store, const ModelConfig& cfg, bool with_image) {
  if (with_image) {
    store.add("tok.img.proj.w", cfg.patch * cfg.patch * 3, cfg.channels);
    store.add("tok.img.proj.b", 1, cfg.channels);
  }
  store.add("tok.pc.s1.l1.w", 3, cfg.stage1_channels);
  store.add("tok.pc.s1.l1.b", 1, cfg.stage1_channels);
  store.add("tok.pc.s1.l2.w", cfg.stage1_channels, cfg.stage1_channels);
  store.add("tok.pc.s1.l2.b", 1, cfg.stage1_channels);
  store.add("tok.pc.s2.l1.w", cfg.stage1_channels + 3, cfg.channels);
  store.add("tok.pc.s2.l1.b", 1, cfg.channels);
  store.add("tok.pc.s2.l2.w", cfg.channels, cfg.channels);
  store.add("tok.pc.s2.l2.b", 1, cfg.channels);
  store.add("tok.pc.pos.l1.w", 3, cfg.pos_hidden);
  store.add("tok.pc.pos.l1.b", 1, cfg.pos_hidden);
  store.add("tok.pc.pos.l2.w", cfg.pos_hidden, cfg.channels);
  store.add("tok.pc.pos.l2.b", 1, cfg.channels);
}

}  // namespace egiinet
