// Copyright 2026 The lgdgcn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lgd/error.hpp"
#include "lgd/matrix.hpp"

// Reverse-mode differentiation over dense f64 matrices. Every operation
// appends a node to a dynamically built acyclic expression graph;
// backward() visits each reachable node exactly once in reverse
// topological order. Graphs are single-threaded; distinct graphs may run
// concurrently if parameters are copied or frozen.

namespace lgd::ad {

struct Node {
  Mat data;
  Mat grad;  // same shape as data at all times, zero-initialized
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;
};

/// Copyable handle to a node of the expression graph.
class Value {
 public:
  Value() = default;
  explicit Value(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Value constant(Mat m) {
    auto n = std::make_shared<Node>();
    n->grad = Mat::Zero(m.rows(), m.cols());
    n->data = std::move(m);
    return Value(std::move(n));
  }

  static Value param(Mat m) {
    Value v = constant(std::move(m));
    v.node_->requires_grad = true;
    return v;
  }

  static Value scalar(double x, bool requires_grad = false) {
    Mat m(1, 1);
    m(0, 0) = x;
    return requires_grad ? param(std::move(m)) : constant(std::move(m));
  }

  bool defined() const { return node_ != nullptr; }
  const Mat& data() const { return node_->data; }
  Mat& data() { return node_->data; }
  const Mat& grad() const { return node_->grad; }
  Mat& grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  Index rows() const { return node_->data.rows(); }
  Index cols() const { return node_->data.cols(); }

  double item() const {
    if (rows() != 1 || cols() != 1)
      throw ShapeError("item: value is " + shape_str(data()) + ", expected 1x1");
    return node_->data(0, 0);
  }

  void zero_grad() { node_->grad.setZero(); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

namespace detail {

inline Value make_node(Mat out, const std::vector<Value>& parents,
                       std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->grad = Mat::Zero(out.rows(), out.cols());
  n->data = std::move(out);
  n->parents.reserve(parents.size());
  for (const auto& p : parents) {
    n->requires_grad = n->requires_grad || p.requires_grad();
    n->parents.push_back(p.node());
  }
  if (n->requires_grad) n->backward = std::move(backward);
  return Value(std::move(n));
}

inline void check_same_shape(const char* op, const Value& a, const Value& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.data()) +
                     " and " + shape_str(b.data()) + " differ");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and broadcast arithmetic
// ---------------------------------------------------------------------------

inline Value add(const Value& a, const Value& b) {
  detail::check_same_shape("add", a, b);
  auto pa = a.node(), pb = b.node();
  return detail::make_node(a.data() + b.data(), {a, b}, [pa, pb](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad;
    if (pb->requires_grad) pb->grad += n.grad;
  });
}

inline Value sub(const Value& a, const Value& b) {
  detail::check_same_shape("sub", a, b);
  auto pa = a.node(), pb = b.node();
  return detail::make_node(a.data() - b.data(), {a, b}, [pa, pb](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad;
    if (pb->requires_grad) pb->grad -= n.grad;
  });
}

inline Value mul(const Value& a, const Value& b) {
  detail::check_same_shape("mul", a, b);
  auto pa = a.node(), pb = b.node();
  return detail::make_node(a.data().cwiseProduct(b.data()), {a, b},
                           [pa, pb](Node& n) {
                             if (pa->requires_grad)
                               pa->grad += n.grad.cwiseProduct(pb->data);
                             if (pb->requires_grad)
                               pb->grad += n.grad.cwiseProduct(pa->data);
                           });
}

inline Value scale(const Value& a, double c) {
  auto pa = a.node();
  return detail::make_node(c * a.data(), {a}, [pa, c](Node& n) {
    if (pa->requires_grad) pa->grad += c * n.grad;
  });
}

inline Value add_scalar(const Value& a, double c) {
  auto pa = a.node();
  Mat out = (a.data().array() + c).matrix();
  return detail::make_node(std::move(out), {a}, [pa](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad;
  });
}

/// a[N x d] + b[1 x d], b broadcast over rows (bias add).
inline Value add_rowvec(const Value& a, const Value& b) {
  if (b.rows() != 1 || a.cols() != b.cols())
    throw ShapeError("add_rowvec: " + shape_str(a.data()) + " + " +
                     shape_str(b.data()));
  auto pa = a.node(), pb = b.node();
  Mat out = a.data().rowwise() + b.data().row(0);
  return detail::make_node(std::move(out), {a, b}, [pa, pb](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad;
    if (pb->requires_grad) pb->grad.row(0) += n.grad.colwise().sum();
  });
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

inline Value matmul(const Value& a, const Value& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions of " + shape_str(a.data()) +
                     " and " + shape_str(b.data()) + " disagree");
  auto pa = a.node(), pb = b.node();
  return detail::make_node(a.data() * b.data(), {a, b}, [pa, pb](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad * pb->data.transpose();
    if (pb->requires_grad) pb->grad += pa->data.transpose() * n.grad;
  });
}

inline Value transpose(const Value& a) {
  auto pa = a.node();
  return detail::make_node(a.data().transpose(), {a}, [pa](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad.transpose();
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities and normalizations
// ---------------------------------------------------------------------------

inline Value relu(const Value& a) {
  auto pa = a.node();
  return detail::make_node(a.data().cwiseMax(0.0), {a}, [pa](Node& n) {
    if (!pa->requires_grad) return;
    // Subgradient 0 at exactly zero.
    pa->grad += (pa->data.array() > 0.0).cast<double>().matrix().cwiseProduct(n.grad);
  });
}

inline Value exp(const Value& a) {
  auto pa = a.node();
  Mat out = a.data().array().exp().matrix();
  return detail::make_node(std::move(out), {a}, [pa](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad.cwiseProduct(n.data);
  });
}

inline Value log(const Value& a) {
  auto pa = a.node();
  Mat out = a.data().array().log().matrix();
  return detail::make_node(std::move(out), {a}, [pa](Node& n) {
    if (pa->requires_grad)
      pa->grad += n.grad.cwiseQuotient(pa->data);
  });
}

/// Each row divided by max(||row||_2, eps). Rows with norm <= eps are left
/// on the clamped branch and receive zero gradient; an exactly-zero row
/// (dead ReLU or dropout) must not inject 1/eps-scale gradients.
inline Value l2_normalize_rows(const Value& a, double eps = 1e-12) {
  if (eps <= 0.0) throw ParamError("l2_normalize_rows: eps must be positive");
  auto pa = a.node();
  const Mat& x = a.data();
  Eigen::VectorXd norms = x.rowwise().norm();
  Mat out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    out.row(i) = x.row(i) / std::max(norms(i), eps);
  return detail::make_node(std::move(out), {a}, [pa, norms, eps](Node& n) {
    if (!pa->requires_grad) return;
    for (Index i = 0; i < n.data.rows(); ++i) {
      double r = norms(i);
      if (r <= eps) continue;
      double dot = n.grad.row(i).dot(n.data.row(i));
      pa->grad.row(i) += (n.grad.row(i) - dot * n.data.row(i)) / r;
    }
  });
}

/// Numerically stable row softmax; rows sum to 1.
inline Value softmax_rows(const Value& a) {
  auto pa = a.node();
  const Mat& x = a.data();
  Mat out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    Eigen::ArrayXd e = (x.row(i).transpose().array() - x.row(i).maxCoeff()).exp();
    out.row(i) = (e / e.sum()).matrix().transpose();
  }
  return detail::make_node(std::move(out), {a}, [pa](Node& n) {
    if (!pa->requires_grad) return;
    for (Index i = 0; i < n.data.rows(); ++i) {
      double dot = n.grad.row(i).dot(n.data.row(i));
      pa->grad.row(i) +=
          (n.data.row(i).array() * (n.grad.row(i).array() - dot)).matrix();
    }
  });
}

/// Elementwise multiply by a constant mask (inverted-dropout application).
/// The mask is supplied externally so forward passes replay from a seed.
inline Value apply_mask(const Value& a, const Mat& mask) {
  if (a.rows() != mask.rows() || a.cols() != mask.cols())
    throw ShapeError("apply_mask: value " + shape_str(a.data()) + " vs mask " +
                     shape_str(mask));
  auto pa = a.node();
  return detail::make_node(a.data().cwiseProduct(mask), {a}, [pa, mask](Node& n) {
    if (pa->requires_grad) pa->grad += n.grad.cwiseProduct(mask);
  });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping
// ---------------------------------------------------------------------------

inline Value sum(const Value& a) {
  auto pa = a.node();
  Mat out(1, 1);
  out(0, 0) = a.data().sum();
  return detail::make_node(std::move(out), {a}, [pa](Node& n) {
    if (pa->requires_grad) pa->grad.array() += n.grad(0, 0);
  });
}

inline Value mean(const Value& a) {
  auto pa = a.node();
  Mat out(1, 1);
  out(0, 0) = a.data().mean();
  double inv = 1.0 / static_cast<double>(a.data().size());
  return detail::make_node(std::move(out), {a}, [pa, inv](Node& n) {
    if (pa->requires_grad) pa->grad.array() += inv * n.grad(0, 0);
  });
}

/// Row-wise sum over columns: [N x d] -> [N x 1].
inline Value sum_cols(const Value& a) {
  auto pa = a.node();
  Mat out = a.data().rowwise().sum();
  return detail::make_node(std::move(out), {a}, [pa](Node& n) {
    if (pa->requires_grad)
      pa->grad += n.grad.col(0).replicate(1, pa->data.cols());
  });
}

/// Row-wise dot product: [N x d], [N x d] -> [N x 1].
inline Value rowwise_dot(const Value& a, const Value& b) {
  detail::check_same_shape("rowwise_dot", a, b);
  auto pa = a.node(), pb = b.node();
  Mat out = a.data().cwiseProduct(b.data()).rowwise().sum();
  return detail::make_node(std::move(out), {a, b}, [pa, pb](Node& n) {
    for (Index i = 0; i < n.data.rows(); ++i) {
      if (pa->requires_grad) pa->grad.row(i) += n.grad(i, 0) * pb->data.row(i);
      if (pb->requires_grad) pb->grad.row(i) += n.grad(i, 0) * pa->data.row(i);
    }
  });
}

inline Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw ParamError("concat_cols: no inputs");
  Index rows = parts[0].rows(), cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows)
      throw ShapeError("concat_cols: row counts differ: " +
                       shape_str(parts[0].data()) + " vs " + shape_str(p.data()));
    cols += p.cols();
  }
  Mat out(rows, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    out.block(0, at, rows, p.cols()) = p.data();
    offsets.push_back(at);
    at += p.cols();
  }
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return detail::make_node(std::move(out), parts, [nodes, offsets](Node& n) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (!nodes[k]->requires_grad) continue;
      nodes[k]->grad +=
          n.grad.block(0, offsets[k], n.grad.rows(), nodes[k]->data.cols());
    }
  });
}

inline Value concat_rows(const std::vector<Value>& parts) {
  if (parts.empty()) throw ParamError("concat_rows: no inputs");
  Index cols = parts[0].cols(), rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols)
      throw ShapeError("concat_rows: column counts differ: " +
                       shape_str(parts[0].data()) + " vs " + shape_str(p.data()));
    rows += p.rows();
  }
  Mat out(rows, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    out.block(at, 0, p.rows(), cols) = p.data();
    offsets.push_back(at);
    at += p.rows();
  }
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return detail::make_node(std::move(out), parts, [nodes, offsets](Node& n) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (!nodes[k]->requires_grad) continue;
      nodes[k]->grad +=
          n.grad.block(offsets[k], 0, nodes[k]->data.rows(), n.grad.cols());
    }
  });
}

inline Value slice_cols(const Value& a, Index start, Index count) {
  if (start < 0 || count < 1 || start + count > a.cols())
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " +
                     shape_str(a.data()));
  auto pa = a.node();
  Mat out = a.data().block(0, start, a.rows(), count);
  return detail::make_node(std::move(out), {a}, [pa, start, count](Node& n) {
    if (pa->requires_grad)
      pa->grad.block(0, start, n.grad.rows(), count) += n.grad;
  });
}

inline Value slice_rows(const Value& a, Index start, Index count) {
  if (start < 0 || count < 1 || start + count > a.rows())
    throw ShapeError("slice_rows: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " +
                     shape_str(a.data()));
  auto pa = a.node();
  Mat out = a.data().block(start, 0, count, a.cols());
  return detail::make_node(std::move(out), {a}, [pa, start, count](Node& n) {
    if (pa->requires_grad)
      pa->grad.block(start, 0, count, n.grad.cols()) += n.grad;
  });
}

/// out.row(e) = a.row(idx[e]); backward scatter-adds.
inline Value gather_rows(const Value& a, std::shared_ptr<const std::vector<int>> idx) {
  auto pa = a.node();
  Mat out(static_cast<Index>(idx->size()), a.cols());
  for (std::size_t e = 0; e < idx->size(); ++e) {
    int i = (*idx)[e];
    if (i < 0 || i >= a.rows())
      throw ShapeError("gather_rows: index " + std::to_string(i) + " out of " +
                       std::to_string(a.rows()) + " rows");
    out.row(static_cast<Index>(e)) = a.data().row(i);
  }
  return detail::make_node(std::move(out), {a}, [pa, idx](Node& n) {
    if (!pa->requires_grad) return;
    for (std::size_t e = 0; e < idx->size(); ++e)
      pa->grad.row((*idx)[e]) += n.grad.row(static_cast<Index>(e));
  });
}

/// out[dst[e]] += w(e) * rows.row(e); the weighted scatter behind routing.
inline Value scatter_rows_weighted(const Value& w, const Value& rows,
                                   std::shared_ptr<const std::vector<int>> dst,
                                   Index n_out) {
  if (w.cols() != 1 || w.rows() != rows.rows())
    throw ShapeError("scatter_rows_weighted: weights " + shape_str(w.data()) +
                     " vs rows " + shape_str(rows.data()));
  if (static_cast<Index>(dst->size()) != rows.rows())
    throw ShapeError("scatter_rows_weighted: index count mismatch");
  auto pw = w.node(), pr = rows.node();
  Mat out = Mat::Zero(n_out, rows.cols());
  for (std::size_t e = 0; e < dst->size(); ++e) {
    int d = (*dst)[e];
    if (d < 0 || d >= n_out)
      throw ShapeError("scatter_rows_weighted: destination " +
                       std::to_string(d) + " out of " + std::to_string(n_out));
    out.row(d) += w.data()(static_cast<Index>(e), 0) *
                  rows.data().row(static_cast<Index>(e));
  }
  return detail::make_node(std::move(out), {w, rows}, [pw, pr, dst](Node& n) {
    for (std::size_t e = 0; e < dst->size(); ++e) {
      Index ei = static_cast<Index>(e);
      int d = (*dst)[e];
      if (pw->requires_grad)
        pw->grad(ei, 0) += pr->data.row(ei).dot(n.grad.row(d));
      if (pr->requires_grad)
        pr->grad.row(ei) += pw->data(ei, 0) * n.grad.row(d);
    }
  });
}

// ---------------------------------------------------------------------------
// Statistical operations
// ---------------------------------------------------------------------------

/// Squared Mahalanobis distance of each row of z to mu under the factored
/// covariance: out[i] = (z_i - mu) Sigma^{-1} (z_i - mu)^T. Gradient flows
/// to z only; mu and Sigma enter as non-trainable constants.
inline Value mahalanobis(const Value& z, const Mat& mu, const SpdFactor& sigma) {
  if (mu.rows() != 1 || z.cols() != mu.cols() || z.cols() != sigma.dim())
    throw ShapeError("mahalanobis: z " + shape_str(z.data()) + ", mu " +
                     shape_str(mu) + ", sigma dim " +
                     std::to_string(sigma.dim()));
  auto pz = z.node();
  Mat diff = z.data().rowwise() - mu.row(0);
  // W = diff * Sigma^{-1}  (solve on the transpose)
  Mat w = sigma.solve(diff.transpose()).transpose();
  Mat out = diff.cwiseProduct(w).rowwise().sum();
  return detail::make_node(std::move(out), {z}, [pz, w](Node& n) {
    if (!pz->requires_grad) return;
    for (Index i = 0; i < n.data.rows(); ++i)
      pz->grad.row(i) += 2.0 * n.grad(i, 0) * w.row(i);
  });
}

/// Gaussian density of each row of z under N(mu, Sigma): [N x d] -> [N x 1].
inline Value gaussian_pdf(const Value& z, const Mat& mu, const SpdFactor& sigma) {
  double log_norm = -0.5 * static_cast<double>(sigma.dim()) *
                        std::log(2.0 * M_PI) -
                    0.5 * sigma.log_det;
  return exp(add_scalar(scale(mahalanobis(z, mu, sigma), -0.5), log_norm));
}

namespace detail {

inline double logdet_psd(const Mat& g, double eps, Mat& chol, const char* who) {
  Mat sym = 0.5 * (g + Mat(g.transpose()));
  sym += eps * Mat::Identity(g.rows(), g.cols());
  Index bad = cholesky_lower(sym, chol);
  if (bad >= 0)
    throw NumericalError(std::string(who) + ": Cholesky failed at leading minor " +
                         std::to_string(bad + 1) + " after ridge " +
                         std::to_string(eps));
  return 2.0 * chol.diagonal().array().log().sum();
}

inline Mat inv_from_cholesky(const Mat& l) {
  Mat eye = Mat::Identity(l.rows(), l.cols());
  Mat y = l.triangularView<Eigen::Lower>().solve(eye);
  return l.transpose().triangularView<Eigen::Upper>().solve(y);
}

}  // namespace detail

/// log det(f + eps I) of a symmetric PSD matrix via Cholesky.
/// Accepts small asymmetry (symmetrized internally) so finite-difference
/// probes of single coordinates remain well-defined.
inline Value logdet_gram(const Value& f, double eps = 1e-8) {
  if (f.rows() != f.cols())
    throw ShapeError("logdet_gram: matrix must be square, got " +
                     shape_str(f.data()));
  if (eps <= 0.0) throw ParamError("logdet_gram: eps must be positive");
  double asym = (f.data() - Mat(f.data().transpose())).cwiseAbs().maxCoeff();
  if (asym > 1e-3)
    throw ShapeError("logdet_gram: input asymmetry " + std::to_string(asym) +
                     " too large");
  auto pf = f.node();
  Mat chol;
  Mat out(1, 1);
  out(0, 0) = detail::logdet_psd(f.data(), eps, chol, "logdet_gram");
  return detail::make_node(std::move(out), {f}, [pf, chol](Node& n) {
    if (!pf->requires_grad) return;
    Mat h = detail::inv_from_cholesky(chol);
    pf->grad += n.grad(0, 0) * h;
  });
}

/// Batched log-determinant: each row of x is a flattened (row-major) m x m
/// symmetric PSD matrix; out[i] = log det(G_i + eps I). Used to evaluate the
/// per-node Gram determinants of the diversity term in one pass.
inline Value logdet_rows(const Value& x, Index m, double eps = 1e-8) {
  if (x.cols() != m * m)
    throw ShapeError("logdet_rows: " + shape_str(x.data()) + " does not hold " +
                     std::to_string(m) + "x" + std::to_string(m) + " blocks");
  auto px = x.node();
  const Index n_rows = x.rows();
  auto chols = std::make_shared<std::vector<Mat>>(static_cast<std::size_t>(n_rows));
  Mat out(n_rows, 1);
  for (Index i = 0; i < n_rows; ++i) {
    Mat g = Eigen::Map<const Mat>(x.data().row(i).data(), m, m);
    out(i, 0) = detail::logdet_psd(g, eps, (*chols)[static_cast<std::size_t>(i)],
                                   "logdet_rows");
  }
  return detail::make_node(std::move(out), {x}, [px, chols, m](Node& n) {
    if (!px->requires_grad) return;
    for (Index i = 0; i < n.data.rows(); ++i) {
      Mat h = detail::inv_from_cholesky((*chols)[static_cast<std::size_t>(i)]);
      Eigen::Map<Mat>(px->grad.row(i).data(), m, m) += n.grad(i, 0) * h;
    }
  });
}

/// L2-normalizes each row of a likelihood matrix. A row whose norm falls
/// below eps (all densities underflowed) is replaced by the basis vector
/// e_basis with zero gradient: a distant outlier contributes maximal
/// diversity instead of NaN.
inline Value likelihood_normalize(const Value& a, Index basis, double eps = 1e-30) {
  if (basis < 0 || basis >= a.cols())
    throw ParamError("likelihood_normalize: basis column out of range");
  auto pa = a.node();
  const Mat& x = a.data();
  Eigen::VectorXd norms = x.rowwise().norm();
  Mat out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    if (norms(i) < eps) {
      out.row(i).setZero();
      out(i, basis) = 1.0;
    } else {
      out.row(i) = x.row(i) / norms(i);
    }
  }
  return detail::make_node(std::move(out), {a}, [pa, norms, eps](Node& n) {
    if (!pa->requires_grad) return;
    for (Index i = 0; i < n.data.rows(); ++i) {
      double r = norms(i);
      if (r < eps) continue;
      double dot = n.grad.row(i).dot(n.data.row(i));
      pa->grad.row(i) += (n.grad.row(i) - dot * n.data.row(i)) / r;
    }
  });
}

// ---------------------------------------------------------------------------
// Classification losses (stabilized forms with fused backward rules)
// ---------------------------------------------------------------------------

/// Mean over `rows` of softmax cross-entropy against integer labels.
inline Value softmax_cross_entropy(const Value& logits,
                                   std::shared_ptr<const std::vector<int>> labels,
                                   std::shared_ptr<const std::vector<int>> rows) {
  if (rows->empty()) throw ParamError("softmax_cross_entropy: empty node set");
  auto pl = logits.node();
  const Mat& x = logits.data();
  double total = 0.0;
  for (int i : *rows) {
    if (i < 0 || i >= x.rows())
      throw ShapeError("softmax_cross_entropy: row " + std::to_string(i) +
                       " out of range");
    int y = (*labels)[static_cast<std::size_t>(i)];
    if (y < 0 || y >= x.cols())
      throw ValidationError("softmax_cross_entropy: label " + std::to_string(y) +
                            " out of " + std::to_string(x.cols()) + " classes");
    double mx = x.row(i).maxCoeff();
    double lse = mx + std::log((x.row(i).array() - mx).exp().sum());
    total += lse - x(i, y);
  }
  Mat out(1, 1);
  out(0, 0) = total / static_cast<double>(rows->size());
  return detail::make_node(std::move(out), {logits}, [pl, labels, rows](Node& n) {
    if (!pl->requires_grad) return;
    double s = n.grad(0, 0) / static_cast<double>(rows->size());
    for (int i : *rows) {
      double mx = pl->data.row(i).maxCoeff();
      Eigen::ArrayXd e = (pl->data.row(i).transpose().array() - mx).exp();
      Eigen::ArrayXd p = e / e.sum();
      pl->grad.row(i) += s * p.matrix().transpose();
      pl->grad(i, (*labels)[static_cast<std::size_t>(i)]) -= s;
    }
  });
}

/// Mean over `rows` of the class-summed binary cross-entropy with sigmoid,
/// in softplus form: sum_c max(x,0) - x*y + log1p(exp(-|x|)).
inline Value sigmoid_cross_entropy(const Value& logits, const Mat& targets,
                                   std::shared_ptr<const std::vector<int>> rows) {
  if (rows->empty()) throw ParamError("sigmoid_cross_entropy: empty node set");
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw ShapeError("sigmoid_cross_entropy: logits " + shape_str(logits.data()) +
                     " vs targets " + shape_str(targets));
  auto pl = logits.node();
  const Mat& x = logits.data();
  double total = 0.0;
  for (int i : *rows) {
    for (Index c = 0; c < x.cols(); ++c) {
      double v = x(i, c), y = targets(i, c);
      total += std::max(v, 0.0) - v * y + std::log1p(std::exp(-std::abs(v)));
    }
  }
  Mat out(1, 1);
  out(0, 0) = total / static_cast<double>(rows->size());
  return detail::make_node(std::move(out), {logits}, [pl, targets, rows](Node& n) {
    if (!pl->requires_grad) return;
    double s = n.grad(0, 0) / static_cast<double>(rows->size());
    for (int i : *rows) {
      for (Index c = 0; c < pl->data.cols(); ++c) {
        double sig = 1.0 / (1.0 + std::exp(-pl->data(i, c)));
        pl->grad(i, c) += s * (sig - targets(i, c));
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

/// Reverse-mode sweep from a scalar loss. Repeated calls without zeroing
/// accumulate. Only nodes with requires_grad participate.
inline void backward(const Value& loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw ShapeError("backward: loss must be scalar, got " +
                     shape_str(loss.data()));
  Node* root = loss.node().get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS; parents of non-requiring nodes are never
  // requiring either, so those subtrees are pruned.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited{root};
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root->grad(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

}  // namespace lgd::ad
