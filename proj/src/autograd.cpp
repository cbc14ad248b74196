// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include "egiinet/autograd.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace egiinet::ad {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

const Mat& Var::val() const { return tape_->val(idx_); }
const Mat& Var::grad() const { return tape_->grad(idx_); }

void Tape::check(Var v, const char* op) const {
  if (v.tape_ != this || v.idx_ < 0 || v.idx_ >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument(std::string(op) + ": variable does not belong to this tape");
  }
}

Mat& Tape::grad_ref(int idx) {
  Node& n = nodes_[static_cast<size_t>(idx)];
  if (!n.grad_live) {
    n.grad = Mat::Zero(n.val.rows(), n.val.cols());
    n.grad_live = true;
  }
  return n.grad;
}

const Mat& Tape::grad(int idx) const {
  const Node& n = nodes_[static_cast<size_t>(idx)];
  if (!n.grad_live) {
    static const Mat empty;
    if (n.val.size() == 0) return empty;
    // Untouched nodes report a zero gradient of matching shape.
    const_cast<Node&>(n).grad = Mat::Zero(n.val.rows(), n.val.cols());
    const_cast<Node&>(n).grad_live = true;
  }
  return n.grad;
}

Var Tape::leaf(Mat value) { return push(std::move(value)); }

Var Tape::add(Var a, Var b) {
  check(a, "add");
  check(b, "add");
  if (a.val().rows() != b.val().rows() || a.val().cols() != b.val().cols()) {
    throw std::invalid_argument("add: shape mismatch");
  }
  Var out = push(a.val() + b.val());
  const int ai = a.idx_, bi = b.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, bi, oi] {
    grad_ref(ai) += nodes_[static_cast<size_t>(oi)].grad;
    grad_ref(bi) += nodes_[static_cast<size_t>(oi)].grad;
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  check(a, "sub");
  check(b, "sub");
  if (a.val().rows() != b.val().rows() || a.val().cols() != b.val().cols()) {
    throw std::invalid_argument("sub: shape mismatch");
  }
  Var out = push(a.val() - b.val());
  const int ai = a.idx_, bi = b.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, bi, oi] {
    grad_ref(ai) += nodes_[static_cast<size_t>(oi)].grad;
    grad_ref(bi) -= nodes_[static_cast<size_t>(oi)].grad;
  };
  return out;
}

Var Tape::scale(Var a, double s) {
  check(a, "scale");
  Var out = push(a.val() * s);
  const int ai = a.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, oi, s] {
    grad_ref(ai) += s * nodes_[static_cast<size_t>(oi)].grad;
  };
  return out;
}

Var Tape::cmul(Var a, Var b) {
  check(a, "cmul");
  check(b, "cmul");
  if (a.val().rows() != b.val().rows() || a.val().cols() != b.val().cols()) {
    throw std::invalid_argument("cmul: shape mismatch");
  }
  Var out = push(a.val().cwiseProduct(b.val()));
  const int ai = a.idx_, bi = b.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, bi, oi] {
    const Mat& g = nodes_[static_cast<size_t>(oi)].grad;
    grad_ref(ai) += g.cwiseProduct(nodes_[static_cast<size_t>(bi)].val);
    grad_ref(bi) += g.cwiseProduct(nodes_[static_cast<size_t>(ai)].val);
  };
  return out;
}

Var Tape::matmul(Var a, Var b) {
  check(a, "matmul");
  check(b, "matmul");
  if (a.val().cols() != b.val().rows()) throw std::invalid_argument("matmul: inner dim mismatch");
  Var out = push(a.val() * b.val());
  const int ai = a.idx_, bi = b.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, bi, oi] {
    const Mat& g = nodes_[static_cast<size_t>(oi)].grad;
    grad_ref(ai).noalias() += g * nodes_[static_cast<size_t>(bi)].val.transpose();
    grad_ref(bi).noalias() += nodes_[static_cast<size_t>(ai)].val.transpose() * g;
  };
  return out;
}

Var Tape::transpose(Var a) {
  check(a, "transpose");
  Var out = push(a.val().transpose());
  const int ai = a.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, oi] {
    grad_ref(ai) += nodes_[static_cast<size_t>(oi)].grad.transpose();
  };
  return out;
}

Var Tape::add_rowvec(Var a, Var row) {
  check(a, "add_rowvec");
  check(row, "add_rowvec");
  if (row.val().rows() != 1 || row.val().cols() != a.val().cols()) {
    throw std::invalid_argument("add_rowvec: row must be 1 x cols(a)");
  }
  Mat v = a.val();
  v.rowwise() += row.val().row(0);
  Var out = push(std::move(v));
  const int ai = a.idx_, ri = row.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, ri, oi] {
    const Mat& g = nodes_[static_cast<size_t>(oi)].grad;
    grad_ref(ai) += g;
    grad_ref(ri) += g.colwise().sum();
  };
  return out;
}

Var Tape::gelu(Var a) {
  check(a, "gelu");
  const Mat& x = a.val();
  Mat y = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
  Var out = push(std::move(y));
  const int ai = a.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, oi] {
    const Mat& x = nodes_[static_cast<size_t>(ai)].val;
    const Mat& g = nodes_[static_cast<size_t>(oi)].grad;
    Mat d = x.unaryExpr([](double v) {
      return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
    });
    grad_ref(ai) += g.cwiseProduct(d);
  };
  return out;
}

Var Tape::softmax_rows(Var a) {
  check(a, "softmax_rows");
  const Mat& x = a.val();
  Mat y(x.rows(), x.cols());
  for (long r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    Eigen::RowVectorXd e = (x.row(r).array() - m).exp();
    y.row(r) = e / e.sum();
  }
  Var out = push(std::move(y));
  const int ai = a.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, oi] {
    const Mat& y = nodes_[static_cast<size_t>(oi)].val;
    const Mat& g = nodes_[static_cast<size_t>(oi)].grad;
    Mat& ga = grad_ref(ai);
    for (long r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      ga.row(r) += y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
  };
  return out;
}

Var Tape::layernorm_rows(Var x, Var gamma, Var beta, double eps) {
  check(x, "layernorm_rows");
  check(gamma, "layernorm_rows");
  check(beta, "layernorm_rows");
  const Mat& v = x.val();
  const long c = v.cols();
  if (gamma.val().rows() != 1 || gamma.val().cols() != c || beta.val().rows() != 1 ||
      beta.val().cols() != c) {
    throw std::invalid_argument("layernorm_rows: gamma/beta must be 1 x cols(x)");
  }

  Mat xhat(v.rows(), c);
  Eigen::VectorXd inv_std(v.rows());
  for (long r = 0; r < v.rows(); ++r) {
    const double mu = v.row(r).mean();
    const double var = (v.row(r).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std(r) = is;
    xhat.row(r) = (v.row(r).array() - mu) * is;
  }
  Mat y = xhat;
  y.array().rowwise() *= gamma.val().row(0).array();
  y.rowwise() += beta.val().row(0);

  Var out = push(std::move(y));
  const int xi = x.idx_, gi = gamma.idx_, bi = beta.idx_, oi = out.idx_;
  nodes_.back().back = [this, xi, gi, bi, oi, xhat = std::move(xhat),
                        inv_std = std::move(inv_std)] {
    const Mat& g = nodes_[static_cast<size_t>(oi)].grad;
    const Eigen::RowVectorXd gvec = nodes_[static_cast<size_t>(gi)].val.row(0);

    grad_ref(bi) += g.colwise().sum();
    grad_ref(gi) += g.cwiseProduct(xhat).colwise().sum();

    Mat& gx = grad_ref(xi);
    const long c = g.cols();
    for (long r = 0; r < g.rows(); ++r) {
      Eigen::RowVectorXd dxhat = g.row(r).cwiseProduct(gvec);
      const double m1 = dxhat.mean();
      const double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
      gx.row(r) += inv_std(r) * (dxhat.array() - m1 - xhat.row(r).array() * m2).matrix();
      (void)c;
    }
  };
  return out;
}

Var Tape::slice_cols(Var a, int first, int count) {
  check(a, "slice_cols");
  if (first < 0 || count < 1 || first + count > a.val().cols()) {
    throw std::invalid_argument("slice_cols: range out of bounds");
  }
  Var out = push(a.val().middleCols(first, count));
  const int ai = a.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, oi, first, count] {
    grad_ref(ai).middleCols(first, count) += nodes_[static_cast<size_t>(oi)].grad;
  };
  return out;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  long rows = parts[0].val().rows();
  long cols = 0;
  std::vector<int> idx;
  std::vector<int> widths;
  for (Var p : parts) {
    check(p, "concat_cols");
    if (p.val().rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    idx.push_back(p.idx_);
    widths.push_back(static_cast<int>(p.val().cols()));
    cols += p.val().cols();
  }
  Mat v(rows, cols);
  long at = 0;
  for (Var p : parts) {
    v.middleCols(at, p.val().cols()) = p.val();
    at += p.val().cols();
  }
  Var out = push(std::move(v));
  const int oi = out.idx_;
  nodes_.back().back = [this, idx, widths, oi] {
    const Mat& g = nodes_[static_cast<size_t>(oi)].grad;
    long at = 0;
    for (size_t i = 0; i < idx.size(); ++i) {
      grad_ref(idx[i]) += g.middleCols(at, widths[i]);
      at += widths[i];
    }
  };
  return out;
}

Var Tape::gather_rows(Var a, std::vector<int> rows) {
  check(a, "gather_rows");
  const long n = a.val().rows();
  Mat v(static_cast<long>(rows.size()), a.val().cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= n) throw std::invalid_argument("gather_rows: index out of range");
    v.row(static_cast<long>(i)) = a.val().row(rows[i]);
  }
  Var out = push(std::move(v));
  const int ai = a.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, oi, rows = std::move(rows)] {
    const Mat& g = nodes_[static_cast<size_t>(oi)].grad;
    Mat& ga = grad_ref(ai);
    for (size_t i = 0; i < rows.size(); ++i) {
      ga.row(rows[i]) += g.row(static_cast<long>(i));
    }
  };
  return out;
}

Var Tape::maxpool_rows(Var a, int group) {
  check(a, "maxpool_rows");
  const long rows = a.val().rows();
  const long cols = a.val().cols();
  if (group < 1 || rows % group != 0) {
    throw std::invalid_argument("maxpool_rows: rows not divisible by group");
  }
  const long out_rows = rows / group;
  Mat v(out_rows, cols);
  Eigen::MatrixXi arg(out_rows, cols);
  for (long r = 0; r < out_rows; ++r) {
    for (long c = 0; c < cols; ++c) {
      double best = -std::numeric_limits<double>::infinity();
      int best_row = -1;
      for (int k = 0; k < group; ++k) {
        const double x = a.val()(r * group + k, c);
        if (x > best) {
          best = x;
          best_row = static_cast<int>(r * group + k);
        }
      }
      v(r, c) = best;
      arg(r, c) = best_row;
    }
  }
  Var out = push(std::move(v));
  const int ai = a.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, oi, arg = std::move(arg)] {
    const Mat& g = nodes_[static_cast<size_t>(oi)].grad;
    Mat& ga = grad_ref(ai);
    for (long r = 0; r < g.rows(); ++r) {
      for (long c = 0; c < g.cols(); ++c) {
        ga(arg(r, c), c) += g(r, c);
      }
    }
  };
  return out;
}

Var Tape::reshape_rows(Var a, int split) {
  check(a, "reshape_rows");
  const long rows = a.val().rows();
  const long cols = a.val().cols();
  if (split < 1 || cols % split != 0) {
    throw std::invalid_argument("reshape_rows: cols not divisible by split");
  }
  const long out_cols = cols / split;
  Mat v(rows * split, out_cols);
  for (long r = 0; r < rows; ++r) {
    for (int s = 0; s < split; ++s) {
      v.row(r * split + s) = a.val().row(r).segment(s * out_cols, out_cols);
    }
  }
  Var out = push(std::move(v));
  const int ai = a.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, oi, split, out_cols] {
    const Mat& g = nodes_[static_cast<size_t>(oi)].grad;
    Mat& ga = grad_ref(ai);
    for (long r = 0; r < ga.rows(); ++r) {
      for (int s = 0; s < split; ++s) {
        ga.row(r).segment(s * out_cols, out_cols) += g.row(r * split + s);
      }
    }
  };
  return out;
}

Var Tape::sum_all(Var a) {
  check(a, "sum_all");
  Mat v(1, 1);
  v(0, 0) = a.val().sum();
  Var out = push(std::move(v));
  const int ai = a.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, oi] {
    grad_ref(ai).array() += nodes_[static_cast<size_t>(oi)].grad(0, 0);
  };
  return out;
}

Var Tape::mean_all(Var a) {
  check(a, "mean_all");
  const double n = static_cast<double>(a.val().size());
  Mat v(1, 1);
  v(0, 0) = a.val().sum() / n;
  Var out = push(std::move(v));
  const int ai = a.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, oi, n] {
    grad_ref(ai).array() += nodes_[static_cast<size_t>(oi)].grad(0, 0) / n;
  };
  return out;
}

Var Tape::sum_sq(Var a) {
  check(a, "sum_sq");
  Mat v(1, 1);
  v(0, 0) = a.val().squaredNorm();
  Var out = push(std::move(v));
  const int ai = a.idx_, oi = out.idx_;
  nodes_.back().back = [this, ai, oi] {
    grad_ref(ai) += 2.0 * nodes_[static_cast<size_t>(oi)].grad(0, 0) *
                    nodes_[static_cast<size_t>(ai)].val;
  };
  return out;
}

Var Tape::chamfer_l1_loss(Var pred, const Mat& target) {
  check(pred, "chamfer_l1_loss");
  const Mat& p = pred.val();
  if (p.cols() != 3 || target.cols() != 3) {
    throw std::invalid_argument("chamfer_l1_loss: clouds must be Nx3");
  }
  if (p.rows() == 0 || target.rows() == 0) {
    throw std::invalid_argument("chamfer_l1_loss: clouds must be non-empty");
  }
  const long m = p.rows();
  const long k = target.rows();

  std::vector<int> nn_p(static_cast<size_t>(m));      // pred row -> target row
  std::vector<double> dist_p(static_cast<size_t>(m));
  std::vector<int> nn_t(static_cast<size_t>(k));      // target row -> pred row
  std::vector<double> dist_t(static_cast<size_t>(k));

  for (long i = 0; i < m; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (long j = 0; j < k; ++j) {
      const double d = (p.row(i) - target.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    nn_p[static_cast<size_t>(i)] = arg;
    dist_p[static_cast<size_t>(i)] = std::sqrt(best);
  }
  for (long j = 0; j < k; ++j) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (long i = 0; i < m; ++i) {
      const double d = (p.row(i) - target.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(i);
      }
    }
    nn_t[static_cast<size_t>(j)] = arg;
    dist_t[static_cast<size_t>(j)] = std::sqrt(best);
  }

  double loss = 0.0;
  for (double d : dist_p) loss += d;
  loss = 0.5 * loss / static_cast<double>(m);
  double loss_t = 0.0;
  for (double d : dist_t) loss_t += d;
  loss += 0.5 * loss_t / static_cast<double>(k);

  Mat v(1, 1);
  v(0, 0) = loss;
  Var out = push(std::move(v));
  const int pi = pred.idx_, oi = out.idx_;
  nodes_.back().back = [this, pi, oi, target, m, k, nn_p = std::move(nn_p),
                        dist_p = std::move(dist_p), nn_t = std::move(nn_t),
                        dist_t = std::move(dist_t)] {
    const double g = nodes_[static_cast<size_t>(oi)].grad(0, 0);
    const Mat& p = nodes_[static_cast<size_t>(pi)].val;
    Mat& gp = grad_ref(pi);
    const double wp = 0.5 * g / static_cast<double>(m);
    for (long i = 0; i < m; ++i) {
      const double d = dist_p[static_cast<size_t>(i)];
      if (d < 1e-12) continue;
      gp.row(i) += (wp / d) * (p.row(i) - target.row(nn_p[static_cast<size_t>(i)]));
    }
    const double wt = 0.5 * g / static_cast<double>(k);
    for (long j = 0; j < k; ++j) {
      const double d = dist_t[static_cast<size_t>(j)];
      if (d < 1e-12) continue;
      gp.row(nn_t[static_cast<size_t>(j)]) += (wt / d) * (p.row(nn_t[static_cast<size_t>(j)]) - target.row(j));
    }
  };
  return out;
}

void Tape::backward(Var loss) {
  check(loss, "backward");
  if (loss.val().rows() != 1 || loss.val().cols() != 1) {
    throw std::invalid_argument("backward: loss must be a 1x1 scalar");
  }
  grad_ref(loss.idx_)(0, 0) += 1.0;
  for (int i = loss.idx_; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.grad_live && n.back) n.back();
  }
}

}  // namespace egiinet::ad
