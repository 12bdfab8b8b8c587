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
#include <fstream>
#include <string>
#include <vector>

#include "lgd/datagen.hpp"
#include "lgd/error.hpp"
#include "lgd/matrix.hpp"
#include "lgd/model.hpp"

// Post-hoc artifacts: feature-correlation matrices of the learned
// representations and channel-wise embedding exports for external
// projection tools.

namespace lgd {

enum class EmbeddingStage { PostRouting, PostAggregation };

/// Pearson correlation of every feature pair over the masked nodes.
/// A constant feature correlates 0 with everything, including itself.
inline Mat feature_correlation(const Mat& embeddings,
                               const std::vector<int>& mask_indices) {
  if (mask_indices.size() < 2)
    throw ParamError("feature_correlation: need at least 2 nodes, got " +
                     std::to_string(mask_indices.size()));
  const Index d = embeddings.cols();
  const double n = static_cast<double>(mask_indices.size());
  Mat sub(mask_indices.size(), d);
  for (std::size_t r = 0; r < mask_indices.size(); ++r)
    sub.row(static_cast<Index>(r)) = embeddings.row(mask_indices[r]);
  Mat mean_row = sub.colwise().mean();
  Mat centered = sub.rowwise() - mean_row.row(0);
  Mat cov = (centered.transpose() * centered) / n;
  Mat corr = Mat::Zero(d, d);
  // A feature is constant when its spread vanishes relative to its scale;
  // the mean subtraction alone leaves ~1e-16 residue.
  std::vector<bool> constant(static_cast<std::size_t>(d));
  std::vector<double> sd(static_cast<std::size_t>(d));
  for (Index a = 0; a < d; ++a) {
    sd[a] = std::sqrt(cov(a, a));
    constant[a] = sd[a] <= 1e-12 * (1.0 + std::abs(mean_row(0, a)));
  }
  for (Index a = 0; a < d; ++a) {
    if (constant[a]) continue;
    for (Index b = 0; b < d; ++b) {
      if (constant[b]) continue;
      corr(a, b) = std::clamp(cov(a, b) / (sd[a] * sd[b]), -1.0, 1.0);
    }
  }
  return corr;
}

inline void write_correlation_csv(const Mat& corr, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("write_correlation_csv: cannot open " + path);
  char buf[40];
  for (Index i = 0; i < corr.rows(); ++i) {
    for (Index j = 0; j < corr.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.12g", corr(i, j));
      os << (j ? "," : "") << buf;
    }
    os << '\n';
  }
}

namespace detail {

inline std::string label_string(const GraphBundle& b, int node) {
  if (b.meta.mode == LabelMode::Single)
    return std::to_string(b.labels_single[static_cast<std::size_t>(node)]);
  std::string out;
  for (Index c = 0; c < b.labels_multi.cols(); ++c)
    if (b.labels_multi(node, c) != 0.0) {
      if (!out.empty()) out += ';';
      out += std::to_string(c);
    }
  return out.empty() ? "-" : out;
}

}  // namespace detail

/// Per-channel latent units of one layer, after routing or after
/// aggregation. Writes two TSV files:
///   <path>        one row per (node, channel): node, channel, f1..fDelta
///   <path>.nodes  one row per node: node, label, concatenated features
inline void export_embeddings(const LgdModel& model, const GraphBundle& bundle,
                              int layer, EmbeddingStage stage,
                              const std::string& path) {
  if (layer < 0 || layer >= model.config().layers)
    throw ParamError("export_embeddings: layer " + std::to_string(layer) +
                     " outside [0, " + std::to_string(model.config().layers) + ")");
  ForwardRecord rec = model.forward(bundle.graph, bundle.features, false);
  const auto& units = stage == EmbeddingStage::PostRouting ? rec.z_hat[layer]
                                                           : rec.z_breve[layer];
  const int channels = model.config().channels;
  const int delta = model.config().channel_dim();
  char buf[40];

  std::ofstream os(path);
  if (!os) throw IoError("export_embeddings: cannot open " + path);
  os << "node\tchannel";
  for (int f = 1; f <= delta; ++f) os << "\tf" << f;
  os << '\n';
  for (int i = 0; i < bundle.n(); ++i)
    for (int m = 0; m < channels; ++m) {
      os << i << '\t' << m;
      for (int f = 0; f < delta; ++f) {
        std::snprintf(buf, sizeof buf, "%.17g", units[m].data()(i, f));
        os << '\t' << buf;
      }
      os << '\n';
    }
  if (!os) throw IoError("export_embeddings: write failed for " + path);

  std::ofstream on(path + ".nodes");
  if (!on) throw IoError("export_embeddings: cannot open " + path + ".nodes");
  on << "node\tlabel";
  for (int f = 1; f <= channels * delta; ++f) on << "\tf" << f;
  on << '\n';
  for (int i = 0; i < bundle.n(); ++i) {
    on << i << '\t' << detail::label_string(bundle, i);
    for (int m = 0; m < channels; ++m)
      for (int f = 0; f < delta; ++f) {
        std::snprintf(buf, sizeof buf, "%.17g", units[m].data()(i, f));
        on << '\t' << buf;
      }
    on << '\n';
  }
  if (!on) throw IoError("export_embeddings: write failed for " + path + ".nodes");
}

}  // namespace lgd
