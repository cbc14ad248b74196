// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include "egiinet/fusion.hpp"

#include <stdexcept>

#include "egiinet/encoder.hpp"

namespace egiinet {

FusedFeature fuse(ad::Tape& t, const Bound& b, int heads, ad::Var f_pc, ad::Var f_img) {
  if (f_pc.rows() != f_img.rows() || f_pc.cols() != f_img.cols()) {
    throw std::invalid_argument("fuse: token sequences must share N' x C'");
  }
  FusedFeature out;
  ad::Var attended = multihead_attention(t, f_pc, f_img, b("fuse.wq"), b("fuse.wk"), b("fuse.wv"),
                                         b("fuse.wo"), heads, &out.attention);
  out.tokens = t.add(f_pc, attended);
  return out;
}

ad::Var decode(ad::Tape& t, const Bound& b, const ModelConfig& cfg, ad::Var fused,
               std::vector<ad::Var>* attn_sink) {
  ad::Var x = vit_stack(t, b, "dec", cfg.dec_blocks, fused, cfg.heads, attn_sink);
  ad::Var hidden = t.gelu(t.add_rowvec(t.matmul(x, b("dec.head.l1.w")), b("dec.head.l1.b")));
  ad::Var flat = t.add_rowvec(t.matmul(hidden, b("dec.head.l2.w")), b("dec.head.l2.b"));
  return t.reshape_rows(flat, cfg.n_out / cfg.n_tokens);
}

void register_fusion(ParamStore& store, const ModelConfig& cfg) {
  store.add("fuse.wq", cfg.channels, cfg.channels);
  store.add("fuse.wk", cfg.channels, cfg.channels);
  store.add("fuse.wv", cfg.channels, cfg.channels);
  store.add("fuse.wo", cfg.channels, cfg.channels);
}

void register_decoder(ParamStore& store, const ModelConfig& cfg) {
  register_vit_stack(store, "dec", cfg.dec_blocks, cfg.channels);
  const int points_per_token = cfg.n_out / cfg.n_tokens;
  store.add("dec.head.l1.w", cfg.channels, cfg.head_hidden);
  store.add("dec.head.l1.b", 1, cfg.head_hidden);
  store.add("dec.head.l2.w", cfg.head_hidden, points_per_token * 3);
  store.add("dec.head.l2.b", 1, points_per_token * 3);
}

}  // namespace egiinet
