// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "egiinet/autograd.hpp"
#include "egiinet/params.hpp"

namespace egiinet {

/// Scaled-dot-product attention with row-softmax over keys. Query and
/// key/value sequences may differ (cross attention). Projections carry no
/// bias. When `attn_sink` is given, the per-head row-stochastic weight
/// matrices are appended to it.
ad::Var multihead_attention(ad::Tape& t, ad::Var q_in, ad::Var kv_in, ad::Var wq, ad::Var wk,
                            ad::Var wv, ad::Var wo, int heads,
                            std::vector<ad::Var>* attn_sink = nullptr);

/// Pre-normalization transformer block: LN -> self-attention -> residual,
/// LN -> two-layer feed-forward (x4 expansion, gelu) -> residual.
ad::Var vit_block(ad::Tape& t, const Bound& b, const std::string& prefix, ad::Var x, int heads,
                  std::vector<ad::Var>* attn_sink = nullptr);

/// `blocks` chained vit_blocks named "<prefix>.b<i>". Zero blocks is the
/// identity.
ad::Var vit_stack(ad::Tape& t, const Bound& b, const std::string& prefix, int blocks, ad::Var x,
                  int heads, std::vector<ad::Var>* attn_sink = nullptr);

void register_vit_block(ParamStore& store, const std::string& prefix, int channels,
                        int ffn_mult = 4);
void register_vit_stack(ParamStore& store, const std::string& prefix, int blocks, int channels,
                        int ffn_mult = 4);

}  // namespace egiinet
