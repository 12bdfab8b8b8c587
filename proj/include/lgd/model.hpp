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

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lgd/autodiff.hpp"
#include "lgd/datagen.hpp"
#include "lgd/error.hpp"
#include "lgd/graph.hpp"
#include "lgd/matrix.hpp"
#include "lgd/rng.hpp"

// The LGD-GCN network: per-channel projection, neighborhood routing,
// latent-structure aggregation, layer stacking and classifier head, plus a
// plain GCN used as the comparison baseline.

namespace lgd {

enum class GraphRule { Knn, Cknn };

inline CsrGraph build_latent_graph(const PointSet& points, GraphRule rule, int k) {
  return rule == GraphRule::Knn ? knn_build(points, k) : cknn_build(points, k);
}

struct ModelConfig {
  int channels = 4;        // M
  int routing_iters = 7;   // T
  int layers = 2;          // L
  int d_out = 64;          // width of every hidden layer
  double dropout = 0.5;
  GraphRule rule = GraphRule::Cknn;
  int k = 4;               // density parameter of the latent structures
  bool use_latent_agg = true;

  int channel_dim() const { return d_out / channels; }

  void check() const {
    if (channels < 1) throw ParamError("model: channels must be >= 1");
    if (routing_iters < 1) throw ParamError("model: routing iterations must be >= 1");
    if (layers < 1) throw ParamError("model: layers must be >= 1");
    if (d_out % channels != 0)
      throw ParamError("model: channels must divide d_out (" +
                       std::to_string(channels) + " vs " + std::to_string(d_out) + ")");
    if (channel_dim() < 2) throw ParamError("model: channel width must be >= 2");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ParamError("model: dropout must lie in [0, 1)");
    if (k < 1) throw ParamError("model: k must be >= 1");
  }
};

/// Per-channel projection weights of one layer; all trainable.
struct LayerParams {
  std::vector<ad::Value> weight;  // M matrices, d_in x delta
  std::vector<ad::Value> bias;    // M row vectors, 1 x delta

  static LayerParams init(int d_in, int channels, int delta, Rng& gen) {
    LayerParams p;
    double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (int m = 0; m < channels; ++m) {
      Mat w(d_in, delta);
      for (Index r = 0; r < w.rows(); ++r)
        for (Index c = 0; c < w.cols(); ++c)
          w(r, c) = uniform_real(gen, -bound, bound);
      p.weight.push_back(ad::Value::param(std::move(w)));
      p.bias.push_back(ad::Value::param(Mat::Zero(1, delta)));
    }
    return p;
  }
};

/// Running mean/covariance per channel of one layer, with the cached
/// ridge-regularized factor used by the space and diversity terms.
struct ChannelStats {
  static constexpr double kRidge = 1e-4;

  std::vector<Mat> mu;       // M row vectors, 1 x delta
  std::vector<Mat> sigma;    // M matrices, delta x delta (pre-ridge)
  std::vector<SpdFactor> factor;

  static ChannelStats identity(int channels, int delta) {
    ChannelStats s;
    for (int m = 0; m < channels; ++m) {
      s.mu.push_back(Mat::Zero(1, delta));
      s.sigma.push_back(Mat::Identity(delta, delta));
      s.factor.push_back(SpdFactor::from(s.sigma.back(), kRidge));
    }
    return s;
  }

  void refresh(int m) { factor[m] = SpdFactor::from(sigma[m], kRidge); }
};

// ---------------------------------------------------------------------------
// Layer operations
// ---------------------------------------------------------------------------

/// z_m = l2_normalize_rows(relu(h W_m + b_m)) for each channel.
inline std::vector<ad::Value> channel_project(const LayerParams& params,
                                              const ad::Value& h) {
  std::vector<ad::Value> z;
  z.reserve(params.weight.size());
  for (std::size_t m = 0; m < params.weight.size(); ++m)
    z.push_back(ad::l2_normalize_rows(
        ad::relu(ad::add_rowvec(ad::matmul(h, params.weight[m]), params.bias[m]))));
  return z;
}

/// Per-iteration neighbor-to-channel assignment probabilities, captured for
/// tests and inspection (plain data, detached from the graph).
struct RoutingTrace {
  std::vector<Mat> probabilities;  // per iteration, E x M
  std::vector<int> edge_center;    // E: the node u receiving the message
  std::vector<int> edge_neighbor;  // E: the neighbor v sending it
};

/// Iterative soft assignment of neighbors to channels. For T iterations:
/// p_{v,m} = softmax_m <z_{v,m}, c_{u,m}>, then
/// c_{u,m} = l2_normalize(z_{u,m} + sum_v p_{v,m} z_{v,m}).
/// Differentiable through all iterations; outputs are the final centers.
inline std::vector<ad::Value> neighborhood_routing(const std::vector<ad::Value>& z,
                                                   const CsrGraph& g, int iterations,
                                                   RoutingTrace* trace = nullptr) {
  if (iterations < 1)
    throw ParamError("neighborhood_routing: need at least one iteration");
  const int channels = static_cast<int>(z.size());
  auto center = std::make_shared<std::vector<int>>();
  auto neighbor = std::make_shared<std::vector<int>>();
  for (int u = 0; u < g.n; ++u)
    for (int p = g.row_offsets[u]; p < g.row_offsets[u + 1]; ++p) {
      center->push_back(u);
      neighbor->push_back(g.col_indices[p]);
    }
  if (trace) {
    trace->probabilities.clear();
    trace->edge_center = *center;
    trace->edge_neighbor = *neighbor;
  }

  if (center->empty()) {
    // No neighbors anywhere: every update collapses to re-normalization.
    std::vector<ad::Value> out;
    out.reserve(channels);
    for (const auto& zm : z) out.push_back(ad::l2_normalize_rows(zm));
    return out;
  }
  std::vector<ad::Value> c = z;  // centers start at the projected units

  // Neighbor-side gathers do not depend on the centers; hoist them.
  std::vector<ad::Value> z_neighbor;
  z_neighbor.reserve(channels);
  for (int m = 0; m < channels; ++m)
    z_neighbor.push_back(ad::gather_rows(z[m], neighbor));

  for (int t = 0; t < iterations; ++t) {
    std::vector<ad::Value> scores;
    scores.reserve(channels);
    for (int m = 0; m < channels; ++m)
      scores.push_back(ad::rowwise_dot(z_neighbor[m], ad::gather_rows(c[m], center)));
    ad::Value probs = ad::softmax_rows(ad::concat_cols(scores));
    if (trace) trace->probabilities.push_back(probs.data());
    std::vector<ad::Value> next;
    next.reserve(channels);
    for (int m = 0; m < channels; ++m) {
      ad::Value weighted = ad::scatter_rows_weighted(
          ad::slice_cols(probs, m, 1), z_neighbor[m], center, g.n);
      next.push_back(ad::l2_normalize_rows(ad::add(z[m], weighted)));
    }
    c = std::move(next);
  }
  return c;
}

/// Builds one latent structure per channel from the routed units and
/// aggregates along it with the GCN propagation rule. The adjacency is a
/// constant with respect to gradients.
inline std::vector<ad::Value> latent_aggregate(const std::vector<ad::Value>& z_hat,
                                               const ModelConfig& cfg) {
  std::vector<ad::Value> out;
  out.reserve(z_hat.size());
  for (const auto& zm : z_hat) {
    CsrGraph a = build_latent_graph(zm.data(), cfg.rule, cfg.k);
    out.push_back(spmm(sym_normalize(a), zm));
  }
  return out;
}

struct LayerOutput {
  ad::Value out;                    // N x d_out, post-concat (and dropout)
  std::vector<ad::Value> z_hat;     // routed units, inputs of the loss terms
  std::vector<ad::Value> z_breve;   // aggregated units, inputs of the stats
};

/// Builds the inverted-dropout mask for one layer: entries are 0 with
/// probability `rate`, else 1/(1-rate).
inline Mat dropout_mask(Index rows, Index cols, double rate, Rng& gen) {
  Mat mask(rows, cols);
  double keep = 1.0 - rate;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      mask(i, j) = bernoulli(gen, rate) ? 0.0 : 1.0 / keep;
  return mask;
}

/// One LGD-GCN layer: project -> route -> (optionally) aggregate along the
/// latent structures -> concat -> dropout (train mode only).
inline LayerOutput layer_forward(const LayerParams& params, const ModelConfig& cfg,
                                 const CsrGraph& g, const ad::Value& h,
                                 bool train_mode, Rng* dropout_gen) {
  LayerOutput lo;
  std::vector<ad::Value> z = channel_project(params, h);
  lo.z_hat = neighborhood_routing(z, g, cfg.routing_iters);
  lo.z_breve = cfg.use_latent_agg ? latent_aggregate(lo.z_hat, cfg) : lo.z_hat;
  lo.out = ad::concat_cols(lo.z_breve);
  if (train_mode && cfg.dropout > 0.0) {
    Mat mask = dropout_mask(lo.out.rows(), lo.out.cols(), cfg.dropout, *dropout_gen);
    lo.out = ad::apply_mask(lo.out, mask);
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Full models
// ---------------------------------------------------------------------------

struct ForwardRecord {
  ad::Value logits;                              // N x C
  std::vector<std::vector<ad::Value>> z_hat;     // per layer, per channel
  std::vector<std::vector<ad::Value>> z_breve;   // per layer, per channel
};

/// The stacked network with classifier head and per-layer channel statistics.
class LgdModel {
 public:
  LgdModel(ModelConfig cfg, int d_in, int num_classes, std::uint64_t seed)
      : cfg_(cfg), d_in_(d_in), num_classes_(num_classes) {
    cfg_.check();
    Rng gen(child_seed(seed, 0x9A7A3ULL));
    int in = d_in;
    for (int l = 0; l < cfg_.layers; ++l) {
      layers_.push_back(LayerParams::init(in, cfg_.channels, cfg_.channel_dim(), gen));
      stats_.push_back(ChannelStats::identity(cfg_.channels, cfg_.channel_dim()));
      in = cfg_.d_out;
    }
    double bound = 1.0 / std::sqrt(static_cast<double>(cfg_.d_out));
    Mat w(cfg_.d_out, num_classes);
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c) w(r, c) = uniform_real(gen, -bound, bound);
    classifier_w_ = ad::Value::param(std::move(w));
    classifier_b_ = ad::Value::param(Mat::Zero(1, num_classes));
  }

  /// Full-graph forward pass. In train mode, per-layer dropout masks are
  /// derived from (seed, epoch) so a pass replays exactly.
  ForwardRecord forward(const CsrGraph& g, const Mat& features, bool train_mode,
                        std::uint64_t mask_seed = 0) const {
    ForwardRecord rec;
    Rng dropout_gen(child_seed(mask_seed, 0xD409ULL));
    ad::Value h = ad::Value::constant(features);
    for (int l = 0; l < cfg_.layers; ++l) {
      LayerOutput lo = layer_forward(layers_[l], cfg_, g, h, train_mode, &dropout_gen);
      rec.z_hat.push_back(lo.z_hat);
      rec.z_breve.push_back(lo.z_breve);
      h = lo.out;
    }
    rec.logits = ad::add_rowvec(ad::matmul(h, classifier_w_), classifier_b_);
    return rec;
  }

  std::vector<std::pair<std::string, ad::Value>> named_params() {
    std::vector<std::pair<std::string, ad::Value>> out;
    for (std::size_t l = 0; l < layers_.size(); ++l)
      for (std::size_t m = 0; m < layers_[l].weight.size(); ++m) {
        std::string tag = "layer" + std::to_string(l) + ".ch" + std::to_string(m);
        out.emplace_back(tag + ".W", layers_[l].weight[m]);
        out.emplace_back(tag + ".b", layers_[l].bias[m]);
      }
    out.emplace_back("classifier.W", classifier_w_);
    out.emplace_back("classifier.b", classifier_b_);
    return out;
  }

  const ModelConfig& config() const { return cfg_; }
  int input_dim() const { return d_in_; }
  int num_classes() const { return num_classes_; }
  std::vector<ChannelStats>& stats() { return stats_; }
  const std::vector<ChannelStats>& stats() const { return stats_; }
  std::vector<LayerParams>& layers() { return layers_; }
  const std::vector<LayerParams>& layers() const { return layers_; }
  ad::Value& classifier_weight() { return classifier_w_; }
  ad::Value& classifier_bias() { return classifier_b_; }
  const ad::Value& classifier_weight() const { return classifier_w_; }
  const ad::Value& classifier_bias() const { return classifier_b_; }

 private:
  ModelConfig cfg_;
  int d_in_;
  int num_classes_;
  std::vector<LayerParams> layers_;
  std::vector<ChannelStats> stats_;
  ad::Value classifier_w_, classifier_b_;
};

/// Plain GCN baseline: H' = relu(A_hat H W + b) per hidden layer, linear
/// head, dropout after each hidden activation.
class GcnModel {
 public:
  GcnModel(std::vector<int> widths, double dropout, std::uint64_t seed)
      : widths_(std::move(widths)), dropout_(dropout) {
    if (widths_.size() < 2) throw ParamError("gcn: need at least input and output widths");
    if (dropout_ < 0.0 || dropout_ >= 1.0)
      throw ParamError("gcn: dropout must lie in [0, 1)");
    Rng gen(child_seed(seed, 0x6C17ULL));
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      double bound = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
      Mat w(widths_[l], widths_[l + 1]);
      for (Index r = 0; r < w.rows(); ++r)
        for (Index c = 0; c < w.cols(); ++c) w(r, c) = uniform_real(gen, -bound, bound);
      weight_.push_back(ad::Value::param(std::move(w)));
      bias_.push_back(ad::Value::param(Mat::Zero(1, widths_[l + 1])));
    }
  }

  ad::Value forward(const CsrGraph& normalized, const Mat& features, bool train_mode,
                    std::uint64_t mask_seed = 0) const {
    Rng dropout_gen(child_seed(mask_seed, 0xD409ULL));
    ad::Value h = ad::Value::constant(features);
    for (std::size_t l = 0; l < weight_.size(); ++l) {
      h = ad::add_rowvec(ad::matmul(spmm(normalized, h), weight_[l]), bias_[l]);
      if (l + 1 < weight_.size()) {
        h = ad::relu(h);
        if (train_mode && dropout_ > 0.0) {
          Mat mask = dropout_mask(h.rows(), h.cols(), dropout_, dropout_gen);
          h = ad::apply_mask(h, mask);
        }
      }
    }
    return h;
  }

  std::vector<std::pair<std::string, ad::Value>> named_params() {
    std::vector<std::pair<std::string, ad::Value>> out;
    for (std::size_t l = 0; l < weight_.size(); ++l) {
      out.emplace_back("gcn.layer" + std::to_string(l) + ".W", weight_[l]);
      out.emplace_back("gcn.layer" + std::to_string(l) + ".b", bias_[l]);
    }
    return out;
  }

  const std::vector<int>& widths() const { return widths_; }
  double dropout() const { return dropout_; }
  std::vector<ad::Value>& weights() { return weight_; }
  std::vector<ad::Value>& biases() { return bias_; }
  const std::vector<ad::Value>& weights() const { return weight_; }
  const std::vector<ad::Value>& biases() const { return bias_; }

 private:
  std::vector<int> widths_;
  double dropout_;
  std::vector<ad::Value> weight_;
  std::vector<ad::Value> bias_;
};

}  // namespace lgd
