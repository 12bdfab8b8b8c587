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

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lgd/error.hpp"
#include "lgd/graph.hpp"
#include "lgd/matrix.hpp"
#include "lgd/rng.hpp"

// Synthetic factor-graph generation, dataset bundle (de)serialization, and
// train/val/test split management.

namespace lgd {

enum class LabelMode { Single, Multi };

/// Immutable dataset: adjacency, features, labels, masks.
struct GraphBundle {
  CsrGraph graph;
  Mat features;                     // N x d0
  std::vector<int> labels_single;   // values in [0, C), empty in multi mode
  Mat labels_multi;                 // N x C of {0, 1}, empty in single mode
  std::vector<std::uint8_t> train_mask, val_mask, test_mask;

  struct Meta {
    std::string name;
    int num_classes = 0;
    int feature_dim = 0;
    LabelMode mode = LabelMode::Single;
  } meta;

  int n() const { return graph.n; }

  std::vector<int> mask_indices(const std::vector<std::uint8_t>& mask) const {
    std::vector<int> out;
    for (int i = 0; i < n(); ++i)
      if (mask[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
  }

  void validate() const {
    if (features.rows() != n())
      throw ValidationError("bundle: " + std::to_string(features.rows()) +
                            " feature rows for " + std::to_string(n()) + " nodes");
    if (features.cols() != meta.feature_dim)
      throw ValidationError("bundle: feature dim mismatch");
    auto check_len = [&](const std::vector<std::uint8_t>& m, const char* who) {
      if (static_cast<int>(m.size()) != n())
        throw ValidationError(std::string("bundle: ") + who + " mask length");
    };
    check_len(train_mask, "train");
    check_len(val_mask, "val");
    check_len(test_mask, "test");
    bool any_train = false;
    for (int i = 0; i < n(); ++i) {
      int flags = train_mask[i] + val_mask[i] + test_mask[i];
      if (train_mask[i] > 1 || val_mask[i] > 1 || test_mask[i] > 1 || flags > 1)
        throw ValidationError("bundle: masks overlap at node " + std::to_string(i));
      any_train = any_train || train_mask[i];
    }
    if (!any_train) throw ValidationError("bundle: empty train mask");
    if (meta.mode == LabelMode::Single) {
      if (static_cast<int>(labels_single.size()) != n())
        throw ValidationError("bundle: single-label array length");
      for (int y : labels_single)
        if (y < 0 || y >= meta.num_classes)
          throw ValidationError("bundle: label " + std::to_string(y) +
                                " outside [0, " +
                                std::to_string(meta.num_classes) + ")");
    } else {
      if (labels_multi.rows() != n() || labels_multi.cols() != meta.num_classes)
        throw ValidationError("bundle: multi-label matrix shape");
      for (Index i = 0; i < labels_multi.rows(); ++i)
        for (Index c = 0; c < labels_multi.cols(); ++c) {
          double v = labels_multi(i, c);
          if (v != 0.0 && v != 1.0)
            throw ValidationError("bundle: multi-label entries must be 0/1");
        }
    }
  }
};

/// Parameters of the synthetic multi-factor protocol.
struct SynthSpec {
  int factors = 4;
  int nodes = 1000;
  int classes = 16;
  double p = 0.164;     // intra-class edge probability
  double q = 3e-5;      // inter-class edge probability
  std::uint64_t seed = 1;

  void check() const {
    if (factors < 1) throw ParamError("synth: factors must be >= 1");
    if (nodes < 2) throw ParamError("synth: need at least 2 nodes");
    if (classes < 1) throw ParamError("synth: classes must be >= 1");
    if (!(0.0 < q && q <= p && p <= 1.0))
      throw ParamError("synth: need 0 < q <= p <= 1");
  }
};

/// Generates `factors` class-structured random graphs, merges them by edge
/// union, and labels each node with the union of its per-factor classes.
/// Features are the rows of the merged 0/1 adjacency matrix. Class
/// assignment per factor graph is balanced (class c gets n/classes nodes,
/// the remainder spread over the lowest class ids) and shuffled uniformly.
/// Each factor graph draws from its own child stream of the master seed:
/// first the label shuffle, then the i<j pair coins in row-major order.
inline GraphBundle synth_generate(const SynthSpec& spec) {
  spec.check();
  const int n = spec.nodes, c = spec.classes;
  std::vector<std::uint8_t> merged(static_cast<std::size_t>(n) * n, 0);
  Mat label_matrix = Mat::Zero(n, c);
  for (int f = 0; f < spec.factors; ++f) {
    Rng gen(child_seed(spec.seed, static_cast<std::uint64_t>(f)));
    std::vector<int> cls(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) cls[i] = i % c;
    deterministic_shuffle(cls, gen);
    for (int i = 0; i < n; ++i) label_matrix(i, cls[i]) = 1.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double prob = (cls[i] == cls[j]) ? spec.p : spec.q;
        if (bernoulli(gen, prob)) {
          merged[static_cast<std::size_t>(i) * n + j] = 1;
          merged[static_cast<std::size_t>(j) * n + i] = 1;
        }
      }
  }
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (merged[static_cast<std::size_t>(i) * n + j]) edges.emplace_back(i, j);

  GraphBundle b;
  b.graph = CsrGraph::from_undirected_edges(n, std::move(edges));
  b.features = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      b.features(i, j) = merged[static_cast<std::size_t>(i) * n + j] ? 1.0 : 0.0;
  b.labels_multi = std::move(label_matrix);
  b.train_mask.assign(n, 1);  // fresh bundles start all-train; splits refine
  b.val_mask.assign(n, 0);
  b.test_mask.assign(n, 0);
  b.meta.name = "synth" + std::to_string(spec.factors) + "f";
  b.meta.num_classes = c;
  b.meta.feature_dim = n;
  b.meta.mode = LabelMode::Multi;
  return b;
}

/// For each target average degree, binary-searches the intra-class p that
/// realizes it within 5% under a fixed probe seed. Realized degree is
/// monotone in p for a fixed seed because each pair consumes one coin.
inline std::vector<SynthSpec> densify_series(const SynthSpec& base,
                                             const std::vector<double>& targets) {
  std::vector<SynthSpec> out;
  for (double target : targets) {
    if (target <= 0.0 || target > base.nodes - 1)
      throw ParamError("densify_series: target degree " + std::to_string(target) +
                       " unreachable with " + std::to_string(base.nodes) + " nodes");
    double lo = base.q, hi = 1.0;
    SynthSpec probe = base;
    double tol = 0.05 * target;
    bool found = false;
    for (int iter = 0; iter < 60 && !found; ++iter) {
      probe.p = 0.5 * (lo + hi);
      double realized = synth_generate(probe).graph.average_degree();
      if (std::abs(realized - target) <= tol) {
        found = true;
      } else if (realized < target) {
        lo = probe.p;
      } else {
        hi = probe.p;
      }
      if (hi - lo < 1e-12) break;
    }
    if (!found)
      throw ParamError("densify_series: no p realizes degree " +
                       std::to_string(target) + " within 5%");
    SynthSpec result = base;
    result.p = probe.p;
    out.push_back(result);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bundle text format
// ---------------------------------------------------------------------------
//
//   #META name=<s> n=<int> d0=<int> C=<int> mode=<single|multi>
//   #EDGES     one "i j" per undirected edge, i < j
//   #FEATURES  N lines of d0 space-separated decimals
//   #LABELS    N lines (single: one integer; multi: C space-separated 0/1)
//   #MASKS     N lines of "t v s" 0/1 flags

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void bundle_write(const GraphBundle& b, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("bundle_write: cannot open " + path);
  os << "#META name=" << b.meta.name << " n=" << b.n() << " d0="
     << b.meta.feature_dim << " C=" << b.meta.num_classes << " mode="
     << (b.meta.mode == LabelMode::Single ? "single" : "multi") << '\n';
  os << "#EDGES\n";
  for (auto [i, j] : b.graph.undirected_edges()) os << i << ' ' << j << '\n';
  os << "#FEATURES\n";
  for (Index i = 0; i < b.features.rows(); ++i) {
    for (Index j = 0; j < b.features.cols(); ++j) {
      if (j) os << ' ';
      os << detail::fmt_double(b.features(i, j));
    }
    os << '\n';
  }
  os << "#LABELS\n";
  if (b.meta.mode == LabelMode::Single) {
    for (int y : b.labels_single) os << y << '\n';
  } else {
    for (Index i = 0; i < b.labels_multi.rows(); ++i) {
      for (Index c = 0; c < b.labels_multi.cols(); ++c) {
        if (c) os << ' ';
        os << static_cast<int>(b.labels_multi(i, c));
      }
      os << '\n';
    }
  }
  os << "#MASKS\n";
  for (int i = 0; i < b.n(); ++i)
    os << int(b.train_mask[i]) << ' ' << int(b.val_mask[i]) << ' '
       << int(b.test_mask[i]) << '\n';
  if (!os) throw IoError("bundle_write: write failed for " + path);
}

inline GraphBundle bundle_read(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("bundle_read: cannot open " + path);
  long line_no = 0;
  std::string line;
  auto next_line = [&]() -> bool {
    if (!std::getline(is, line)) return false;
    ++line_no;
    return true;
  };

  if (!next_line() || line.rfind("#META ", 0) != 0)
    throw ParseError("bundle: missing #META header", line_no ? line_no : 1);
  GraphBundle b;
  int n = -1;
  {
    std::istringstream ss(line.substr(6));
    std::string kv;
    while (ss >> kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw ParseError("bundle: malformed META field '" + kv + "'", line_no);
      std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
      try {
        if (key == "name") b.meta.name = val;
        else if (key == "n") n = std::stoi(val);
        else if (key == "d0") b.meta.feature_dim = std::stoi(val);
        else if (key == "C") b.meta.num_classes = std::stoi(val);
        else if (key == "mode") {
          if (val == "single") b.meta.mode = LabelMode::Single;
          else if (val == "multi") b.meta.mode = LabelMode::Multi;
          else throw ParseError("bundle: unknown mode '" + val + "'", line_no);
        } else {
          throw ParseError("bundle: unknown META key '" + key + "'", line_no);
        }
      } catch (const std::invalid_argument&) {
        throw ParseError("bundle: bad integer in META '" + kv + "'", line_no);
      }
    }
  }
  if (n < 1 || b.meta.feature_dim < 0 || b.meta.num_classes < 1)
    throw ParseError("bundle: incomplete #META header", line_no);

  if (!next_line() || line != "#EDGES")
    throw ParseError("bundle: expected #EDGES", line_no);
  std::vector<std::pair<int, int>> edges;
  while (next_line() && line != "#FEATURES") {
    std::istringstream ss(line);
    int i, j;
    if (!(ss >> i >> j))
      throw ParseError("bundle: malformed edge '" + line + "'", line_no);
    if (i >= j)
      throw ParseError("bundle: edges must satisfy i < j", line_no);
    if (j >= n)
      throw ParseError("bundle: edge endpoint " + std::to_string(j) +
                       " out of range", line_no);
    edges.emplace_back(i, j);
  }
  if (line != "#FEATURES") throw ParseError("bundle: expected #FEATURES", line_no);
  b.graph = CsrGraph::from_undirected_edges(n, std::move(edges));

  b.features = Mat(n, b.meta.feature_dim);
  for (int i = 0; i < n; ++i) {
    if (!next_line()) throw ParseError("bundle: truncated features", line_no);
    std::istringstream ss(line);
    for (int j = 0; j < b.meta.feature_dim; ++j)
      if (!(ss >> b.features(i, j)))
        throw ParseError("bundle: feature row " + std::to_string(i) +
                         " too short", line_no);
  }

  if (!next_line() || line != "#LABELS")
    throw ParseError("bundle: expected #LABELS", line_no);
  if (b.meta.mode == LabelMode::Single) {
    b.labels_single.resize(n);
    for (int i = 0; i < n; ++i) {
      if (!next_line()) throw ParseError("bundle: truncated labels", line_no);
      std::istringstream ss(line);
      if (!(ss >> b.labels_single[i]))
        throw ParseError("bundle: malformed label '" + line + "'", line_no);
    }
  } else {
    b.labels_multi = Mat(n, b.meta.num_classes);
    for (int i = 0; i < n; ++i) {
      if (!next_line()) throw ParseError("bundle: truncated labels", line_no);
      std::istringstream ss(line);
      for (int c = 0; c < b.meta.num_classes; ++c)
        if (!(ss >> b.labels_multi(i, c)))
          throw ParseError("bundle: label row " + std::to_string(i) +
                           " too short", line_no);
    }
  }

  if (!next_line() || line != "#MASKS")
    throw ParseError("bundle: expected #MASKS", line_no);
  b.train_mask.assign(n, 0);
  b.val_mask.assign(n, 0);
  b.test_mask.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    if (!next_line()) throw ParseError("bundle: truncated masks", line_no);
    std::istringstream ss(line);
    int t, v, s;
    if (!(ss >> t >> v >> s))
      throw ParseError("bundle: malformed mask line '" + line + "'", line_no);
    b.train_mask[i] = static_cast<std::uint8_t>(t);
    b.val_mask[i] = static_cast<std::uint8_t>(v);
    b.test_mask[i] = static_cast<std::uint8_t>(s);
  }
  b.validate();
  return b;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

/// Keeps the masks stored in the bundle (the dataset's published split).
inline GraphBundle split_standard(GraphBundle b) {
  b.validate();
  return b;
}

/// Per class: 20 train nodes uniformly; then 500 val and 1000 test sampled
/// from the remaining pool, all disjoint.
inline GraphBundle split_random(GraphBundle b, std::uint64_t seed,
                                int per_class = 20, int val_count = 500,
                                int test_count = 1000) {
  if (b.meta.mode != LabelMode::Single)
    throw ParamError("split_random: requires a single-label bundle");
  const int n = b.n();
  std::vector<std::vector<int>> by_class(b.meta.num_classes);
  for (int i = 0; i < n; ++i) by_class[b.labels_single[i]].push_back(i);
  Rng gen(child_seed(seed, 0xC1A55ULL));
  std::vector<std::uint8_t> train(n, 0), val(n, 0), test(n, 0);
  std::vector<int> rest;
  for (int c = 0; c < b.meta.num_classes; ++c) {
    auto& nodes = by_class[c];
    if (static_cast<int>(nodes.size()) < per_class)
      throw ParamError("split_random: class " + std::to_string(c) + " has " +
                       std::to_string(nodes.size()) + " nodes, needs " +
                       std::to_string(per_class));
    deterministic_shuffle(nodes, gen);
    for (int k = 0; k < per_class; ++k) train[nodes[k]] = 1;
    for (std::size_t k = per_class; k < nodes.size(); ++k)
      rest.push_back(nodes[k]);
  }
  if (static_cast<int>(rest.size()) < val_count + test_count)
    throw ParamError("split_random: only " + std::to_string(rest.size()) +
                     " nodes left for val+test");
  std::sort(rest.begin(), rest.end());
  deterministic_shuffle(rest, gen);
  for (int k = 0; k < val_count; ++k) val[rest[k]] = 1;
  for (int k = 0; k < test_count; ++k) test[rest[val_count + k]] = 1;
  b.train_mask = std::move(train);
  b.val_mask = std::move(val);
  b.test_mask = std::move(test);
  b.validate();
  return b;
}

/// Uniform node partition by fractions; train absorbs the rounding remainder.
inline GraphBundle split_fraction(GraphBundle b, double f_train, double f_val,
                                  double f_test, std::uint64_t seed) {
  if (std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
    throw ParamError("split_fraction: fractions must sum to 1");
  if (f_train < 0 || f_val < 0 || f_test < 0)
    throw ParamError("split_fraction: fractions must be non-negative");
  const int n = b.n();
  int n_val = static_cast<int>(f_val * n);
  int n_test = static_cast<int>(f_test * n);
  int n_train = n - n_val - n_test;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng gen(child_seed(seed, 0xF7AC0ULL));
  deterministic_shuffle(order, gen);
  b.train_mask.assign(n, 0);
  b.val_mask.assign(n, 0);
  b.test_mask.assign(n, 0);
  for (int k = 0; k < n_train; ++k) b.train_mask[order[k]] = 1;
  for (int k = 0; k < n_val; ++k) b.val_mask[order[n_train + k]] = 1;
  for (int k = 0; k < n_test; ++k) b.test_mask[order[n_train + n_val + k]] = 1;
  b.validate();
  return b;
}

}  // namespace lgd
