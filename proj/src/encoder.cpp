// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include "egiinet/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace egiinet {

ad::Var multihead_attention(ad::Tape& t, ad::Var q_in, ad::Var kv_in, ad::Var wq, ad::Var wk,
                            ad::Var wv, ad::Var wo, int heads, std::vector<ad::Var>* attn_sink) {
  const int channels = static_cast<int>(wq.cols());
  if (heads < 1 || channels % heads != 0) {
    throw std::invalid_argument("multihead_attention: channels must divide by heads");
  }
  if (q_in.cols() != wq.rows() || kv_in.cols() != wk.rows()) {
    throw std::invalid_argument("multihead_attention: projection shape mismatch");
  }
  const int dh = channels / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  ad::Var q = t.matmul(q_in, wq);
  ad::Var k = t.matmul(kv_in, wk);
  ad::Var v = t.matmul(kv_in, wv);

  std::vector<ad::Var> head_out;
  head_out.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    ad::Var qh = t.slice_cols(q, h * dh, dh);
    ad::Var kh = t.slice_cols(k, h * dh, dh);
    ad::Var vh = t.slice_cols(v, h * dh, dh);
    ad::Var scores = t.scale(t.matmul(qh, t.transpose(kh)), inv_sqrt_dh);
    ad::Var weights = t.softmax_rows(scores);
    if (attn_sink) attn_sink->push_back(weights);
    head_out.push_back(t.matmul(weights, vh));
  }
  return t.matmul(t.concat_cols(head_out), wo);
}

ad::Var vit_block(ad::Tape& t, const Bound& b, const std::string& prefix, ad::Var x, int heads,
                  std::vector<ad::Var>* attn_sink) {
  ad::Var normed = t.layernorm_rows(x, b(prefix + ".ln1.g"), b(prefix + ".ln1.b"));
  ad::Var attn = multihead_attention(t, normed, normed, b(prefix + ".attn.wq"),
                                     b(prefix + ".attn.wk"), b(prefix + ".attn.wv"),
                                     b(prefix + ".attn.wo"), heads, attn_sink);
  x = t.add(x, attn);

  ad::Var normed2 = t.layernorm_rows(x, b(prefix + ".ln2.g"), b(prefix + ".ln2.b"));
  ad::Var hidden = t.gelu(
      t.add_rowvec(t.matmul(normed2, b(prefix + ".ffn.l1.w")), b(prefix + ".ffn.l1.b")));
  ad::Var ffn = t.add_rowvec(t.matmul(hidden, b(prefix + ".ffn.l2.w")), b(prefix + ".ffn.l2.b"));
  return t.add(x, ffn);
}

ad::Var vit_stack(ad::Tape& t, const Bound& b, const std::string& prefix, int blocks, ad::Var x,
                  int heads, std::vector<ad::Var>* attn_sink) {
  for (int i = 0; i < blocks; ++i) {
    x = vit_block(t, b, prefix + ".b" + std::to_string(i), x, heads, attn_sink);
  }
  return x;
}

void register_vit_block(ParamStore& store, const std::string& prefix, int channels, int ffn_mult) {
  const int hidden = channels * ffn_mult;
  store.add(prefix + ".ln1.g", 1, channels);
  store.add(prefix + ".ln1.b", 1, channels);
  store.add(prefix + ".attn.wq", channels, channels);
  store.add(prefix + ".attn.wk", channels, channels);
  store.add(prefix + ".attn.wv", channels, channels);
  store.add(prefix + ".attn.wo", channels, channels);
  store.add(prefix + ".ln2.g", 1, channels);
  store.add(prefix + ".ln2.b", 1, channels);
  store.add(prefix + ".ffn.l1.w", channels, hidden);
  store.add(prefix + ".ffn.l1.b", 1, hidden);
  store.add(prefix + ".ffn.l2.w", hidden, channels);
  store.add(prefix + ".ffn.l2.b", 1, channels);
}

void register_vit_stack(ParamStore& store, const std::string& prefix, int blocks, int channels,
                        int ffn_mult) {
  for (int i = 0; i < blocks; ++i) {
    register_vit_block(store, prefix + ".b" + std::to_string(i), channels, ffn_mult);
  }
}

}  // namespace egiinet
