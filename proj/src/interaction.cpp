// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include "egiinet/interaction.hpp"

#include <cmath>
#include <stdexcept>

namespace egiinet {

bool LossBundle::finite() const { return first_nonfinite() == nullptr; }

const char* LossBundle::first_nonfinite() const {
  if (!std::isfinite(l_infor)) return "l_infor";
  if (!std::isfinite(l_stc)) return "l_stc";
  if (!std::isfinite(l_transfer)) return "l_transfer";
  if (!std::isfinite(l_l1cd)) return "l_l1cd";
  if (!std::isfinite(l_total)) return "l_total";
  return nullptr;
}

ad::Var gram(ad::Tape& t, ad::Var f) { return t.matmul(t.transpose(f), f); }

namespace {

void require_same_shape(ad::Var a, ad::Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": token sequences must share N' x C'");
  }
}

double token_elements(ad::Var f) {
  return static_cast<double>(f.rows()) * static_cast<double>(f.cols());
}

}  // namespace

ad::Var loss_infor(ad::Tape& t, ad::Var f_img_stc, ad::Var f_pc_stc, ad::Var f_img_out,
                   ad::Var f_pc_out) {
  require_same_shape(f_img_stc, f_pc_stc, "loss_infor");
  require_same_shape(f_img_stc, f_img_out, "loss_infor");
  require_same_shape(f_img_stc, f_pc_out, "loss_infor");
  ad::Var first = t.sum_sq(t.sub(gram(t, f_img_stc), gram(t, f_pc_out)));
  ad::Var second = t.sum_sq(t.sub(gram(t, f_pc_stc), gram(t, f_img_out)));
  return t.scale(t.add(first, second), 1.0 / token_elements(f_img_stc));
}

ad::Var loss_infor_direct(ad::Tape& t, ad::Var f_img_stc, ad::Var f_pc_stc) {
  require_same_shape(f_img_stc, f_pc_stc, "loss_infor_direct");
  ad::Var diff = t.sum_sq(t.sub(gram(t, f_img_stc), gram(t, f_pc_stc)));
  return t.scale(diff, 1.0 / token_elements(f_img_stc));
}

ad::Var loss_stc(ad::Tape& t, ad::Var f_pc_stc, ad::Var f_pc_out) {
  require_same_shape(f_pc_stc, f_pc_out, "loss_stc");
  return t.scale(t.sum_sq(t.sub(f_pc_stc, f_pc_out)), 1.0 / token_elements(f_pc_stc));
}

double loss_transfer(double l_infor, double l_stc) { return l_infor + l_stc; }

double loss_total(double l_transfer, double l_l1cd, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("loss_total: alpha must be positive");
  return alpha * l_transfer + l_l1cd;
}

}  // namespace egiinet
