// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace egiinet::ad {

using Mat = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid for the tape's lifetime.
class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  const Mat& val() const;
  const Mat& grad() const;
  long rows() const { return val().rows(); }
  long cols() const { return val().cols(); }
  double scalar() const { return val()(0, 0); }

 private:
  friend class Tape;
  Var(Tape* t, int i) : tape_(t), idx_(i) {}
  Tape* tape_ = nullptr;
  int idx_ = -1;
};

/// Reverse-mode tape over dense double matrices. A tape holds one forward
/// graph; backward() walks it once in reverse creation order. Tapes are
/// single-threaded; run concurrent samples on separate tapes.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Mat value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var cmul(Var a, Var b);  // elementwise
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add_rowvec(Var a, Var row);  // broadcast a 1xC row over all rows of a

  Var gelu(Var a);
  Var softmax_rows(Var a);
  Var layernorm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);

  Var slice_cols(Var a, int first, int count);
  Var concat_cols(const std::vector<Var>& parts);
  Var gather_rows(Var a, std::vector<int> rows);
  Var maxpool_rows(Var a, int group);     // (K*group)xC -> KxC rowwise group max
  Var reshape_rows(Var a, int split);     // Rx(split*C) -> (R*split)xC

  Var sum_all(Var a);   // 1x1
  Var mean_all(Var a);  // 1x1
  Var sum_sq(Var a);    // 1x1, sum of squared entries

  /// Differentiable bidirectional mean nearest-neighbor distance between the
  /// predicted (Mx3) points and a fixed target cloud (Kx3). Nearest-neighbor
  /// assignments are treated as locally constant.
  Var chamfer_l1_loss(Var pred, const Mat& target);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  void backward(Var loss);

  size_t size() const { return nodes_.size(); }
  const Mat& val(int idx) const { return nodes_[static_cast<size_t>(idx)].val; }
  const Mat& grad(int idx) const;

 private:
  friend class Var;
  struct Node {
    Mat val;
    Mat grad;
    bool grad_live = false;
    std::function<void()> back;  // empty for leaves
  };

  std::vector<Node> nodes_;

  Var push(Mat value) {
    nodes_.push_back(Node{std::move(value), {}, false, {}});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }
  Mat& grad_ref(int idx);
  void check(Var v, const char* op) const;
};

}  // namespace egiinet::ad
