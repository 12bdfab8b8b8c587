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

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <utility>
#include <vector>

#include "lgd/autodiff.hpp"
#include "lgd/error.hpp"
#include "lgd/matrix.hpp"

// Sparse graph representation, GCN-style symmetric normalization, and
// latent-structure construction (kNN / CkNN) from point sets. Structural
// graphs are undirected, self-loop-free and unweighted; normalization
// produces a weighted graph that carries the added self-loops.

namespace lgd {

/// Compressed sparse row adjacency. Column indices within each row are
/// strictly increasing. Immutable after construction.
struct CsrGraph {
  int n = 0;
  std::vector<int> row_offsets;   // length n + 1
  std::vector<int> col_indices;
  std::vector<double> values;     // empty => every stored edge weighs 1.0

  int nnz() const { return static_cast<int>(col_indices.size()); }
  int degree(int i) const { return row_offsets[i + 1] - row_offsets[i]; }
  bool weighted() const { return !values.empty(); }
  double value_at(int pos) const { return values.empty() ? 1.0 : values[pos]; }

  double average_degree() const {
    return n == 0 ? 0.0 : static_cast<double>(nnz()) / static_cast<double>(n);
  }

  /// Builds an undirected graph from (i, j) pairs; duplicates collapse,
  /// self-loops are rejected.
  static CsrGraph from_undirected_edges(int n,
                                        std::vector<std::pair<int, int>> edges) {
    CsrGraph g;
    g.n = n;
    std::vector<std::pair<int, int>> directed;
    directed.reserve(edges.size() * 2);
    for (auto [i, j] : edges) {
      if (i == j)
        throw ValidationError("CsrGraph: self-loop at node " + std::to_string(i));
      if (i < 0 || j < 0 || i >= n || j >= n)
        throw ValidationError("CsrGraph: edge (" + std::to_string(i) + ", " +
                              std::to_string(j) + ") out of " +
                              std::to_string(n) + " nodes");
      directed.emplace_back(i, j);
      directed.emplace_back(j, i);
    }
    std::sort(directed.begin(), directed.end());
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
    g.row_offsets.assign(n + 1, 0);
    for (auto [i, j] : directed) g.row_offsets[i + 1]++;
    for (int i = 0; i < n; ++i) g.row_offsets[i + 1] += g.row_offsets[i];
    g.col_indices.reserve(directed.size());
    for (auto [i, j] : directed) g.col_indices.push_back(j);
    return g;
  }

  bool has_edge(int i, int j) const {
    auto begin = col_indices.begin() + row_offsets[i];
    auto end = col_indices.begin() + row_offsets[i + 1];
    return std::binary_search(begin, end, j);
  }

  /// All undirected edges as (i, j) with i < j.
  std::vector<std::pair<int, int>> undirected_edges() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < n; ++i)
      for (int p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
        if (i < col_indices[p]) out.emplace_back(i, col_indices[p]);
    return out;
  }

  /// One "i<TAB>j<TAB>w" line per stored directed entry, sorted by (i, j).
  void dump_edgelist(std::ostream& os) const {
    for (int i = 0; i < n; ++i)
      for (int p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
        os << i << '\t' << col_indices[p] << '\t' << value_at(p) << '\n';
  }
};

/// One row per node; shares node ordering with the paired CsrGraph.
using PointSet = Mat;

/// Symmetric N x N Euclidean distance matrix with exactly-zero diagonal.
inline Mat pairwise_distances(const PointSet& p) {
  const Index n = p.rows();
  if (n < 1) throw ParamError("pairwise_distances: empty point set");
  Eigen::VectorXd sq = p.rowwise().squaredNorm();
  Mat d2 = (-2.0 * (p * p.transpose()));
  d2.colwise() += sq;
  d2.rowwise() += sq.transpose();
  Mat d = d2.cwiseMax(0.0).cwiseSqrt();
  // GEMM round-off can leave tiny asymmetries; make the contract exact.
  for (Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Index j = i + 1; j < n; ++j) d(j, i) = d(i, j);
  }
  return d;
}

namespace detail {

/// Distance to the k-th nearest other point, per row. Ties in the sorted
/// (distance, index) order break toward the smaller index.
inline std::vector<double> kth_distances(const Mat& dist, int k) {
  const Index n = dist.rows();
  std::vector<double> out(static_cast<std::size_t>(n));
  std::vector<std::pair<double, int>> row;
  row.reserve(static_cast<std::size_t>(n) - 1);
  for (Index i = 0; i < n; ++i) {
    row.clear();
    for (Index j = 0; j < n; ++j)
      if (j != i) row.emplace_back(dist(i, j), static_cast<int>(j));
    std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
    out[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(k - 1)].first;
  }
  return out;
}

inline void check_k(int k, Index n, const char* who) {
  if (k < 1 || k > n - 1)
    throw ParamError(std::string(who) + ": k = " + std::to_string(k) +
                     " outside [1, " + std::to_string(n - 1) + "]");
}

}  // namespace detail

/// kNN union rule: edge (i, j) iff d(i,j) <= d_i^(k) or d(i,j) <= d_j^(k).
inline CsrGraph knn_build(const PointSet& p, int k) {
  detail::check_k(k, p.rows(), "knn_build");
  Mat dist = pairwise_distances(p);
  auto kth = detail::kth_distances(dist, k);
  std::vector<std::pair<int, int>> edges;
  const int n = static_cast<int>(p.rows());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double d = dist(i, j);
      if (d <= kth[i] || d <= kth[j]) edges.emplace_back(i, j);
    }
  return CsrGraph::from_undirected_edges(n, std::move(edges));
}

/// CkNN rule: edge (i, j) iff d(i,j) < sqrt(d_i^(k) * d_j^(k)), strict.
/// Consequence of the strict inequality: coincident points never connect
/// to each other when they are each other's k-th neighbor.
inline CsrGraph cknn_build(const PointSet& p, int k) {
  detail::check_k(k, p.rows(), "cknn_build");
  Mat dist = pairwise_distances(p);
  auto kth = detail::kth_distances(dist, k);
  std::vector<std::pair<int, int>> edges;
  const int n = static_cast<int>(p.rows());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double d = dist(i, j);
      if (d < std::sqrt(kth[i] * kth[j])) edges.emplace_back(i, j);
    }
  return CsrGraph::from_undirected_edges(n, std::move(edges));
}

/// D^(-1/2) (A + I) D^(-1/2) with D the degree of A + I. The result is a
/// weighted graph that stores the self-loops; an isolated node keeps a
/// lone self-loop of weight 1.
inline CsrGraph sym_normalize(const CsrGraph& g) {
  if (g.weighted())
    throw ParamError("sym_normalize: input graph must be unweighted");
  CsrGraph out;
  out.n = g.n;
  out.row_offsets.assign(g.n + 1, 0);
  std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(g.n));
  for (int i = 0; i < g.n; ++i) {
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i)) + 1.0);
    out.row_offsets[i + 1] = out.row_offsets[i] + g.degree(i) + 1;
  }
  out.col_indices.reserve(out.row_offsets.back());
  out.values.reserve(out.row_offsets.back());
  for (int i = 0; i < g.n; ++i) {
    bool self_done = false;
    for (int p = g.row_offsets[i]; p < g.row_offsets[i + 1]; ++p) {
      int j = g.col_indices[p];
      if (!self_done && j > i) {
        out.col_indices.push_back(i);
        out.values.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[i]);
        self_done = true;
      }
      out.col_indices.push_back(j);
      out.values.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
    if (!self_done) {
      out.col_indices.push_back(i);
      out.values.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[i]);
    }
  }
  return out;
}

/// Sparse-dense product A * X, differentiable in X; the graph weights are
/// constants (no gradient flows through structure). The graph is copied
/// into the node so backward stays valid after the caller's graph dies.
inline ad::Value spmm(const CsrGraph& g, const ad::Value& x) {
  if (x.rows() != g.n)
    throw ShapeError("spmm: graph has " + std::to_string(g.n) +
                     " nodes but x is " + shape_str(x.data()));
  auto px = x.node();
  auto gp = std::make_shared<const CsrGraph>(g);
  Mat out = Mat::Zero(x.rows(), x.cols());
  for (int i = 0; i < g.n; ++i)
    for (int p = g.row_offsets[i]; p < g.row_offsets[i + 1]; ++p)
      out.row(i) += g.value_at(p) * x.data().row(g.col_indices[p]);
  return ad::detail::make_node(std::move(out), {x}, [px, gp](ad::Node& n) {
    if (!px->requires_grad) return;
    // grad_x += A^T * g, written as a scatter over stored entries.
    for (int i = 0; i < gp->n; ++i)
      for (int p = gp->row_offsets[i]; p < gp->row_offsets[i + 1]; ++p)
        px->grad.row(gp->col_indices[p]) += gp->value_at(p) * n.grad.row(i);
  });
}

}  // namespace lgd
