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
#include <memory>
#include <string>
#include <vector>

#include "lgd/autodiff.hpp"
#include "lgd/datagen.hpp"
#include "lgd/error.hpp"
#include "lgd/matrix.hpp"
#include "lgd/model.hpp"

// Loss terms: Mahalanobis space regularizer, determinant-based diversity
// regularizer, classification losses, layer weighting and the total loss.

namespace lgd {

/// Mean over nodes and channels of the squared Mahalanobis distance of each
/// routed unit to its channel's global center.
inline ad::Value space_loss(const std::vector<ad::Value>& z_hat,
                            const ChannelStats& stats) {
  const int channels = static_cast<int>(z_hat.size());
  ad::Value acc;
  for (int m = 0; m < channels; ++m) {
    ad::Value d = ad::mahalanobis(z_hat[m], stats.mu[m], stats.factor[m]);
    acc = acc.defined() ? ad::add(acc, d) : d;
  }
  return ad::scale(ad::mean(acc), 1.0 / static_cast<double>(channels));
}

/// Per-node Gram matrix of the normalized likelihood profiles: column m is
/// the unit vector of densities of unit z_hat_node[m] under the M channel
/// Gaussians. Orthonormal profiles give det 1; identical profiles give 0.
inline ad::Value diversity_gram(const std::vector<ad::Value>& z_hat_node,
                                const ChannelStats& stats, double eps_like = 1e-30) {
  const int channels = static_cast<int>(z_hat_node.size());
  std::vector<ad::Value> rows;
  rows.reserve(channels);
  for (int m = 0; m < channels; ++m) {
    if (z_hat_node[m].rows() != 1)
      throw ShapeError("diversity_gram: expected 1-row units, got " +
                       shape_str(z_hat_node[m].data()));
    std::vector<ad::Value> likes;
    likes.reserve(channels);
    for (int e = 0; e < channels; ++e)
      likes.push_back(ad::gaussian_pdf(z_hat_node[m], stats.mu[e], stats.factor[e]));
    rows.push_back(ad::likelihood_normalize(ad::concat_cols(likes), m, eps_like));
  }
  // Rows hold the normalized profiles, so F^T F = R R^T.
  ad::Value r = ad::concat_rows(rows);
  return ad::matmul(r, ad::transpose(r));
}

/// Mean over nodes of -log det of the per-node likelihood Gram. Evaluated in
/// one batched pass; equals the per-node diversity_gram/logdet_gram route.
inline ad::Value diversity_loss(const std::vector<ad::Value>& z_hat,
                                const ChannelStats& stats, double eps = 1e-8,
                                double eps_like = 1e-30) {
  const int channels = static_cast<int>(z_hat.size());
  std::vector<ad::Value> profiles;  // per channel m: N x M normalized rows
  profiles.reserve(channels);
  for (int m = 0; m < channels; ++m) {
    std::vector<ad::Value> likes;
    likes.reserve(channels);
    for (int e = 0; e < channels; ++e)
      likes.push_back(ad::gaussian_pdf(z_hat[m], stats.mu[e], stats.factor[e]));
    profiles.push_back(ad::likelihood_normalize(ad::concat_cols(likes), m, eps_like));
  }
  std::vector<ad::Value> gram_entries;  // row-major (a, b) blocks, each N x 1
  gram_entries.reserve(static_cast<std::size_t>(channels) * channels);
  for (int a = 0; a < channels; ++a)
    for (int b = 0; b < channels; ++b)
      gram_entries.push_back(ad::rowwise_dot(profiles[a], profiles[b]));
  ad::Value logdets = ad::logdet_rows(ad::concat_cols(gram_entries), channels, eps);
  return ad::scale(ad::mean(logdets), -1.0);
}

/// Classification loss over the masked nodes: softmax cross-entropy for
/// single-label bundles, class-summed sigmoid cross-entropy for multi-label.
inline ad::Value cls_loss(const ad::Value& logits, const GraphBundle& bundle,
                          const std::vector<int>& mask_indices) {
  if (mask_indices.empty()) throw ParamError("cls_loss: empty mask");
  auto rows = std::make_shared<const std::vector<int>>(mask_indices);
  if (bundle.meta.mode == LabelMode::Single) {
    auto labels = std::make_shared<const std::vector<int>>(bundle.labels_single);
    return ad::softmax_cross_entropy(logits, labels, rows);
  }
  return ad::sigmoid_cross_entropy(logits, bundle.labels_multi, rows);
}

/// Depth-dependent regularizer weight, 10^(l - L) for layer l of L.
inline double layer_weight(int l, int total_layers) {
  if (l < 1 || l > total_layers)
    throw ParamError("layer_weight: layer " + std::to_string(l) + " outside [1, " +
                     std::to_string(total_layers) + "]");
  return std::pow(10.0, static_cast<double>(l - total_layers));
}

/// The total loss and its parts, kept both as graph nodes and as plain
/// numbers for logging.
struct LossBreakdown {
  ad::Value total;
  ad::Value cls;
  std::vector<ad::Value> space;  // per layer
  std::vector<ad::Value> div;    // per layer

  double total_value = 0.0;
  double cls_value = 0.0;
  std::vector<double> space_values;
  std::vector<double> div_values;
};

/// L_cls + sum_l 10^(l-L) (lambda_space L_space^(l) + lambda_div L_div^(l)).
inline LossBreakdown total_loss(const ad::Value& cls,
                                const std::vector<ad::Value>& space_terms,
                                const std::vector<ad::Value>& div_terms,
                                double lambda_space, double lambda_div) {
  if (space_terms.size() != div_terms.size())
    throw ParamError("total_loss: layer term counts differ");
  const int layers = static_cast<int>(space_terms.size());
  LossBreakdown lb;
  lb.cls = cls;
  lb.space = space_terms;
  lb.div = div_terms;
  lb.total = cls;
  for (int l = 1; l <= layers; ++l) {
    double w = layer_weight(l, layers);
    ad::Value reg = ad::add(ad::scale(space_terms[l - 1], lambda_space),
                            ad::scale(div_terms[l - 1], lambda_div));
    lb.total = ad::add(lb.total, ad::scale(reg, w));
  }
  lb.total_value = lb.total.item();
  lb.cls_value = cls.item();
  for (const auto& s : space_terms) lb.space_values.push_back(s.item());
  for (const auto& d : div_terms) lb.div_values.push_back(d.item());
  return lb;
}

}  // namespace lgd
