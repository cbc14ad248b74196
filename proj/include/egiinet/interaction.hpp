// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "egiinet/autograd.hpp"

namespace egiinet {

/// Named scalar losses for one training step.
struct LossBundle {
  double l_infor = 0.0;
  double l_stc = 0.0;
  double l_transfer = 0.0;  // l_infor + l_stc
  double l_l1cd = 0.0;
  double l_total = 0.0;
  double alpha = 0.01;

  bool finite() const;
  /// Name of the first non-finite component, or nullptr when all are finite.
  const char* first_nonfinite() const;
};

/// Channel co-activation matrix F^T F, shape C' x C'. Symmetric and PSD by
/// construction; token order does not affect it.
ad::Var gram(ad::Tape& t, ad::Var f);

/// Cross-modal structural criticality alignment: squared differences between
/// the Gram matrix of each modality's encoder output and the Gram matrix of
/// the other modality's transferred output, summed and divided by N' x C' of
/// the token matrices.
ad::Var loss_infor(ad::Tape& t, ad::Var f_img_stc, ad::Var f_pc_stc, ad::Var f_img_out,
                   ad::Var f_pc_out);

/// Direct Gram alignment between the two encoder outputs; the simplified
/// transfer objective used when the transfer stack is ablated away.
ad::Var loss_infor_direct(ad::Tape& t, ad::Var f_img_stc, ad::Var f_pc_stc);

/// Mean squared elementwise drift of the point-cloud features across the
/// transfer stack.
ad::Var loss_stc(ad::Tape& t, ad::Var f_pc_stc, ad::Var f_pc_out);

double loss_transfer(double l_infor, double l_stc);
double loss_total(double l_transfer, double l_l1cd, double alpha);

}  // namespace egiinet
