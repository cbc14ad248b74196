// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include "egiinet/model.hpp"

#include <stdexcept>

#include "egiinet/encoder.hpp"

namespace egiinet {

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "no_sharing") return Variant::no_sharing;
  if (s == "no_ftloss") return Variant::no_ftloss;
  if (s == "no_sftnet") return Variant::no_sftnet;
  if (s == "no_image") return Variant::no_image;
  throw std::invalid_argument("unknown variant: " + s);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_sharing: return "no_sharing";
    case Variant::no_ftloss: return "no_ftloss";
    case Variant::no_sftnet: return "no_sftnet";
    case Variant::no_image: return "no_image";
  }
  return "full";
}

void ModelConfig::validate() const {
  if (n_tokens < 1 || channels < 1 || heads < 1 || n_out < 1 || pc_input < 1 ||
      stage1_centers < 1 || max_k < 1 || patch < 1) {
    throw std::invalid_argument("model config: all counts must be >= 1");
  }
  if (sfe_blocks < 0 || sft_blocks < 0 || dec_blocks < 0) {
    throw std::invalid_argument("model config: block counts must be >= 0");
  }
  if (channels % heads != 0) {
    throw std::invalid_argument("model config: channels must divide by heads");
  }
  if (image_h % patch != 0 || image_w % patch != 0) {
    throw std::invalid_argument("model config: image dimensions must divide by patch");
  }
  if ((image_h / patch) * (image_w / patch) != n_tokens) {
    throw std::invalid_argument(
        "model config: image and point-cloud token counts must match (patch grid != n_tokens)");
  }
  if (n_out % n_tokens != 0) {
    throw std::invalid_argument("model config: n_out must divide by n_tokens");
  }
  if (stage1_centers < n_tokens) {
    throw std::invalid_argument("model config: stage1_centers must be >= n_tokens");
  }
  if (pc_input < n_tokens) {
    throw std::invalid_argument("model config: pc_input must be >= n_tokens");
  }
  if (!(radius1 > 0.0) || !(radius2 > 0.0)) {
    throw std::invalid_argument("model config: radii must be positive");
  }
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("model config: alpha must be positive");
  }
}

ad::Mat cloud_to_mat(const PointCloud& pc) {
  ad::Mat m(pc.size(), 3);
  for (int i = 0; i < pc.size(); ++i) {
    m(i, 0) = pc[i].x();
    m(i, 1) = pc[i].y();
    m(i, 2) = pc[i].z();
  }
  return m;
}

PointCloud mat_to_cloud(const ad::Mat& m) {
  PointCloud pc;
  pc.pts.reserve(static_cast<size_t>(m.rows()));
  for (long i = 0; i < m.rows(); ++i) pc.pts.emplace_back(m(i, 0), m(i, 1), m(i, 2));
  return pc;
}

EgiinetModel::EgiinetModel(ModelConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  register_params();
}

std::string EgiinetModel::sfe_prefix(TokenSequence::Modality m) const {
  if (cfg_.variant == Variant::no_sharing) {
    return m == TokenSequence::Modality::image ? "sfe.img" : "sfe.pc";
  }
  return "sfe";
}

std::string EgiinetModel::sft_prefix(TokenSequence::Modality m) const {
  if (cfg_.variant == Variant::no_sharing) {
    return m == TokenSequence::Modality::image ? "sft.img" : "sft.pc";
  }
  return "sft";
}

void EgiinetModel::register_params() {
  const bool with_image = cfg_.variant != Variant::no_image;
  register_tokenizers(store_, cfg_, with_image);

  if (cfg_.variant == Variant::no_sharing) {
    register_vit_stack(store_, "sfe.img", cfg_.sfe_blocks, cfg_.channels);
    register_vit_stack(store_, "sfe.pc", cfg_.sfe_blocks, cfg_.channels);
  } else {
    register_vit_stack(store_, "sfe", cfg_.sfe_blocks, cfg_.channels);
  }

  if (cfg_.variant != Variant::no_sftnet) {
    if (cfg_.variant == Variant::no_sharing) {
      register_vit_stack(store_, "sft.img", cfg_.sft_blocks, cfg_.channels);
      register_vit_stack(store_, "sft.pc", cfg_.sft_blocks, cfg_.channels);
    } else {
      register_vit_stack(store_, "sft", cfg_.sft_blocks, cfg_.channels);
    }
  }

  if (with_image) register_fusion(store_, cfg_);
  register_decoder(store_, cfg_);
}

void EgiinetModel::init_params(uint64_t seed) { store_.init_random(seed); }

EgiinetModel::Forward EgiinetModel::forward(ad::Tape& tape, const Bound& bound,
                                            const PointCloud& partial, const ImageView* view,
                                            const ad::Mat* target,
                                            const ForwardOptions& opts) const {
  const bool with_image = cfg_.variant != Variant::no_image;
  if (with_image && view == nullptr) {
    throw std::invalid_argument("forward: this variant requires an image view");
  }

  Forward out;
  std::vector<ad::Var> self_attn_vars;
  std::vector<ad::Var>* sink = opts.collect_attention ? &self_attn_vars : nullptr;

  using Modality = TokenSequence::Modality;

  TokenSequence pc_seq = tokenize_pointcloud(tape, bound, cfg_, partial);
  out.pc_anchors = pc_seq.anchors;
  ad::Var f_pc_stc = vit_stack(tape, bound, sfe_prefix(Modality::pointcloud), cfg_.sfe_blocks,
                               pc_seq.tokens, cfg_.heads, sink);

  ad::Var f_img_stc;
  if (with_image) {
    TokenSequence img_seq = tokenize_image(tape, bound, cfg_, *view);
    f_img_stc = vit_stack(tape, bound, sfe_prefix(Modality::image), cfg_.sfe_blocks,
                          img_seq.tokens, cfg_.heads, sink);
  }

  // transfer stack (identity when ablated away)
  ad::Var f_pc_out = f_pc_stc;
  ad::Var f_img_out = f_img_stc;
  if (cfg_.variant != Variant::no_sftnet) {
    f_pc_out = vit_stack(tape, bound, sft_prefix(Modality::pointcloud), cfg_.sft_blocks, f_pc_stc,
                         cfg_.heads, sink);
    if (with_image) {
      f_img_out = vit_stack(tape, bound, sft_prefix(Modality::image), cfg_.sft_blocks, f_img_stc,
                            cfg_.heads, sink);
    }
  }

  // fusion: point-cloud tokens query the image tokens exactly once
  ad::Var fused = f_pc_out;
  std::vector<ad::Var> cross_vars;
  if (with_image) {
    FusedFeature ff = fuse(tape, bound, cfg_.heads, f_pc_out, f_img_out);
    fused = ff.tokens;
    cross_vars = std::move(ff.attention);
  }

  out.completed_node = decode(tape, bound, cfg_, fused, sink);
  out.completed = out.completed_node.val();

  if (target != nullptr) {
    ad::Var l_l1cd = tape.chamfer_l1_loss(out.completed_node, *target);

    ad::Var transfer_node;  // invalid when the variant has no transfer term
    double l_infor_value = 0.0;
    double l_stc_value = 0.0;
    switch (cfg_.variant) {
      case Variant::full:
      case Variant::no_sharing:
      case Variant::no_ftloss: {
        ad::Var li = loss_infor(tape, f_img_stc, f_pc_stc, f_img_out, f_pc_out);
        ad::Var ls = loss_stc(tape, f_pc_stc, f_pc_out);
        transfer_node = tape.add(li, ls);
        l_infor_value = li.scalar();
        l_stc_value = ls.scalar();
        break;
      }
      case Variant::no_sftnet: {
        // direct Gram alignment of the two encoder outputs
        ad::Var li = loss_infor_direct(tape, f_img_stc, f_pc_stc);
        transfer_node = li;
        l_infor_value = li.scalar();
        break;
      }
      case Variant::no_image: {
        ad::Var ls = loss_stc(tape, f_pc_stc, f_pc_out);
        transfer_node = ls;
        l_stc_value = ls.scalar();
        break;
      }
    }

    out.bundle.alpha = cfg_.alpha;
    out.bundle.l_infor = l_infor_value;
    out.bundle.l_stc = l_stc_value;
    out.bundle.l_transfer = loss_transfer(l_infor_value, l_stc_value);
    out.bundle.l_l1cd = l_l1cd.scalar();

    if (cfg_.variant == Variant::no_ftloss) {
      // transfer terms are logged but excluded from the gradient
      out.loss_node = l_l1cd;
      out.bundle.l_total = out.bundle.l_l1cd;
    } else {
      out.loss_node = tape.add(tape.scale(transfer_node, cfg_.alpha), l_l1cd);
      out.bundle.l_total = out.loss_node.scalar();
    }
  }

  if (opts.collect_attention) {
    out.self_attention.reserve(self_attn_vars.size());
    for (ad::Var v : self_attn_vars) out.self_attention.push_back(v.val());
    out.cross_attention.reserve(cross_vars.size());
    for (ad::Var v : cross_vars) out.cross_attention.push_back(v.val());
  }
  return out;
}

PointCloud EgiinetModel::complete(const PointCloud& partial, const ImageView* view) const {
  ad::Tape tape;
  Bound bound = Bound::bind(tape, store_);
  Forward f = forward(tape, bound, partial, view, nullptr);
  return mat_to_cloud(f.completed);
}

ad::Mat EgiinetModel::encode_tokens(const ad::Mat& tokens, TokenSequence::Modality m) const {
  if (tokens.cols() != cfg_.channels) {
    throw std::invalid_argument("encode_tokens: channel mismatch with configuration");
  }
  ad::Tape tape;
  Bound bound = Bound::bind(tape, store_);
  return vit_stack(tape, bound, sfe_prefix(m), cfg_.sfe_blocks, tape.leaf(tokens), cfg_.heads)
      .val();
}

ad::Mat EgiinetModel::transfer_tokens(const ad::Mat& tokens, TokenSequence::Modality m) const {
  if (tokens.cols() != cfg_.channels) {
    throw std::invalid_argument("transfer_tokens: channel mismatch with configuration");
  }
  if (cfg_.variant == Variant::no_sftnet) return tokens;
  ad::Tape tape;
  Bound bound = Bound::bind(tape, store_);
  return vit_stack(tape, bound, sft_prefix(m), cfg_.sft_blocks, tape.leaf(tokens), cfg_.heads)
      .val();
}

std::vector<std::vector<ad::Mat>> EgiinetModel::encoder_attention_maps(
    const ad::Mat& tokens, TokenSequence::Modality m) const {
  ad::Tape tape;
  Bound bound = Bound::bind(tape, store_);
  std::vector<ad::Var> sink;
  vit_stack(tape, bound, sfe_prefix(m), cfg_.sfe_blocks, tape.leaf(tokens), cfg_.heads, &sink);
  std::vector<std::vector<ad::Mat>> maps;
  maps.resize(static_cast<size_t>(cfg_.sfe_blocks));
  for (int blk = 0; blk < cfg_.sfe_blocks; ++blk) {
    for (int h = 0; h < cfg_.heads; ++h) {
      maps[static_cast<size_t>(blk)].push_back(
          sink[static_cast<size_t>(blk * cfg_.heads + h)].val());
    }
  }
  return maps;
}

}  // namespace egiinet
