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
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lgd/autodiff.hpp"
#include "lgd/datagen.hpp"
#include "lgd/error.hpp"
#include "lgd/matrix.hpp"
#include "lgd/model.hpp"
#include "lgd/objectives.hpp"

// Optimization loop: Adam over the trainable weights, EMA updates of the
// per-channel statistics after every epoch, early stopping on the
// validation metric, and metric computation.

namespace lgd {

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  struct Slot {
    Mat m, v;
  };
  std::vector<Slot> slots;
  std::int64_t t = 0;
  double lr = 1e-2;
  double weight_decay = 0.0;  // coupled L2, added to the gradient
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  static AdamState init(const std::vector<std::pair<std::string, ad::Value>>& params,
                        double lr, double weight_decay) {
    AdamState s;
    s.lr = lr;
    s.weight_decay = weight_decay;
    for (const auto& [name, p] : params)
      s.slots.push_back({Mat::Zero(p.rows(), p.cols()), Mat::Zero(p.rows(), p.cols())});
    return s;
  }
};

/// One bias-corrected Adam update over all parameters.
inline void adam_step(AdamState& state,
                      std::vector<std::pair<std::string, ad::Value>>& params) {
  if (state.slots.size() != params.size())
    throw ParamError("adam_step: state tracks " + std::to_string(state.slots.size()) +
                     " parameters, got " + std::to_string(params.size()));
  state.t += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, p] = params[i];
    if (!p.grad().allFinite())
      throw NumericalError("adam_step: non-finite gradient in " + name);
    Mat g = p.grad() + state.weight_decay * p.data();
    auto& slot = state.slots[i];
    slot.m = state.beta1 * slot.m + (1.0 - state.beta1) * g;
    slot.v = state.beta2 * slot.v + (1.0 - state.beta2) * g.cwiseProduct(g);
    Mat m_hat = slot.m / bc1;
    Mat v_hat = slot.v / bc2;
    p.data() -= state.lr *
                m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + state.eps).matrix());
  }
}

// ---------------------------------------------------------------------------
// EMA statistics
// ---------------------------------------------------------------------------

/// Blends the per-channel mean and covariance toward the batch statistics
/// of the aggregated units. The batch covariance is taken around the
/// PRE-update mean, matching the optimization procedure's literal order.
inline void ema_update_stats(ChannelStats& stats, const std::vector<Mat>& z_breve,
                             double update_rate) {
  if (update_rate < 0.0 || update_rate > 1.0)
    throw ParamError("ema_update_stats: update rate must lie in [0, 1]");
  for (std::size_t m = 0; m < z_breve.size(); ++m) {
    const Mat& z = z_breve[m];
    double inv_n = 1.0 / static_cast<double>(z.rows());
    Mat mu_batch = z.colwise().mean();
    Mat centered = z.rowwise() - stats.mu[m].row(0);
    Mat sigma_batch = inv_n * (centered.transpose() * centered);
    stats.mu[m] = (1.0 - update_rate) * stats.mu[m] + update_rate * mu_batch;
    stats.sigma[m] = (1.0 - update_rate) * stats.sigma[m] + update_rate * sigma_batch;
    stats.refresh(static_cast<int>(m));
  }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct Metrics {
  double accuracy = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  LabelMode mode = LabelMode::Single;

  double primary() const {
    return mode == LabelMode::Single ? accuracy : micro_f1;
  }
};

/// Accuracy / micro-F1 / macro-F1 of raw logits over the masked nodes.
/// Single-label predicts argmax (first max on ties); multi-label predicts
/// sigmoid(x) > 0.5, i.e. x > 0.
inline Metrics evaluate(const Mat& logits, const GraphBundle& bundle,
                        const std::vector<int>& mask_indices) {
  if (mask_indices.empty()) throw ParamError("evaluate: empty mask");
  Metrics met;
  met.mode = bundle.meta.mode;
  const int classes = bundle.meta.num_classes;
  if (bundle.meta.mode == LabelMode::Single) {
    int correct = 0;
    std::vector<double> tp(classes, 0), fp(classes, 0), fn(classes, 0);
    for (int i : mask_indices) {
      Index arg = 0;
      logits.row(i).maxCoeff(&arg);
      int pred = static_cast<int>(arg);
      int truth = bundle.labels_single[static_cast<std::size_t>(i)];
      if (pred == truth) {
        ++correct;
        tp[pred] += 1;
      } else {
        fp[pred] += 1;
        fn[truth] += 1;
      }
    }
    met.accuracy = static_cast<double>(correct) /
                   static_cast<double>(mask_indices.size());
    double tp_all = 0, fp_all = 0, fn_all = 0, macro = 0;
    for (int c = 0; c < classes; ++c) {
      tp_all += tp[c];
      fp_all += fp[c];
      fn_all += fn[c];
      double denom = 2 * tp[c] + fp[c] + fn[c];
      macro += denom > 0 ? 2 * tp[c] / denom : 0.0;
    }
    double denom = 2 * tp_all + fp_all + fn_all;
    met.micro_f1 = denom > 0 ? 2 * tp_all / denom : 0.0;
    met.macro_f1 = macro / classes;
  } else {
    double tp_all = 0, fp_all = 0, fn_all = 0, macro = 0;
    for (int c = 0; c < classes; ++c) {
      double tp = 0, fp = 0, fn = 0;
      for (int i : mask_indices) {
        bool pred = logits(i, c) > 0.0;
        bool truth = bundle.labels_multi(i, c) != 0.0;
        if (pred && truth) tp += 1;
        else if (pred && !truth) fp += 1;
        else if (!pred && truth) fn += 1;
      }
      tp_all += tp;
      fp_all += fp;
      fn_all += fn;
      double denom = 2 * tp + fp + fn;
      macro += denom > 0 ? 2 * tp / denom : 0.0;
    }
    double denom = 2 * tp_all + fp_all + fn_all;
    met.micro_f1 = denom > 0 ? 2 * tp_all / denom : 0.0;
    met.macro_f1 = macro / classes;
    // Subset accuracy, reported for completeness.
    int exact = 0;
    for (int i : mask_indices) {
      bool ok = true;
      for (int c = 0; c < classes && ok; ++c)
        ok = (logits(i, c) > 0.0) == (bundle.labels_multi(i, c) != 0.0);
      exact += ok;
    }
    met.accuracy = static_cast<double>(exact) /
                   static_cast<double>(mask_indices.size());
  }
  return met;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 1000;
  int patience = 100;
  double lr = 1e-2;
  double weight_decay = 5e-4;
  double update_rate = 0.5;   // U_r for the statistics EMA
  double lambda_space = 0.3;
  double lambda_div = 0.01;
  std::uint64_t seed = 1;

  void check() const {
    if (epochs < 1) throw ParamError("train: epochs must be >= 1");
    if (patience < 0 || patience > epochs)
      throw ParamError("train: patience must lie in [0, epochs]");
    if (update_rate < 0.0 || update_rate > 1.0)
      throw ParamError("train: update rate must lie in [0, 1]");
    if (lr <= 0.0) throw ParamError("train: learning rate must be positive");
  }
};

struct EpochRecord {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_cls = 0.0;
  std::vector<double> loss_space;  // per layer
  std::vector<double> loss_div;    // per layer
  double val_metric = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val = -std::numeric_limits<double>::infinity();
  bool diverged = false;
  Metrics val_metrics;
  Metrics test_metrics;
};

namespace detail {

struct ParamSnapshot {
  std::vector<Mat> data;

  static ParamSnapshot take(const std::vector<std::pair<std::string, ad::Value>>& params) {
    ParamSnapshot s;
    for (const auto& [name, p] : params) s.data.push_back(p.data());
    return s;
  }
  void restore(std::vector<std::pair<std::string, ad::Value>>& params) const {
    for (std::size_t i = 0; i < params.size(); ++i) params[i].second.data() = data[i];
  }
};

struct StatsSnapshot {
  std::vector<ChannelStats> stats;
};

}  // namespace detail

/// Trains an LGD model per the epoch scheme: forward in train mode, total
/// loss, backward, Adam step, then a fresh eval-mode forward that feeds the
/// statistics EMA and the validation metric. Keeps the best-validation
/// parameters; stops after `patience` epochs without improvement.
inline TrainResult train_lgd(LgdModel& model, const GraphBundle& bundle,
                             const TrainConfig& tcfg) {
  tcfg.check();
  bundle.validate();
  auto params = model.named_params();
  AdamState adam = AdamState::init(params, tcfg.lr, tcfg.weight_decay);
  auto train_idx = bundle.mask_indices(bundle.train_mask);
  auto val_idx = bundle.mask_indices(bundle.val_mask);
  auto test_idx = bundle.mask_indices(bundle.test_mask);
  if (val_idx.empty()) val_idx = train_idx;  // degenerate bundles fall back

  const int layers = model.config().layers;
  const bool use_space = tcfg.lambda_space != 0.0;
  const bool use_div = tcfg.lambda_div != 0.0;

  TrainResult result;

  // Populate the statistics from one untrained eval pass (a one-time full
  // replacement), so the first epoch's losses see data-scale moments.
  try {
    ForwardRecord warm = model.forward(bundle.graph, bundle.features, false);
    for (int l = 0; l < layers; ++l) {
      std::vector<Mat> z;
      for (const auto& v : warm.z_breve[l]) z.push_back(v.data());
      ema_update_stats(model.stats()[l], z, 1.0);
    }
  } catch (const NumericalError&) {
    result.diverged = true;
    return result;
  }
  detail::ParamSnapshot best_params = detail::ParamSnapshot::take(params);
  std::vector<ChannelStats> best_stats = model.stats();
  Metrics best_val_metrics;

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    for (auto& [name, p] : params) p.zero_grad();
    std::uint64_t mask_seed = child_seed(tcfg.seed, 0x10000ULL + epoch);
    ForwardRecord fwd =
        model.forward(bundle.graph, bundle.features, true, mask_seed);
    ad::Value cls = cls_loss(fwd.logits, bundle, train_idx);
    std::vector<ad::Value> space_terms, div_terms;
    for (int l = 0; l < layers; ++l) {
      space_terms.push_back(use_space ? space_loss(fwd.z_hat[l], model.stats()[l])
                                      : ad::Value::scalar(0.0));
      div_terms.push_back(use_div ? diversity_loss(fwd.z_hat[l], model.stats()[l])
                                  : ad::Value::scalar(0.0));
    }
    LossBreakdown lb =
        total_loss(cls, space_terms, div_terms, tcfg.lambda_space, tcfg.lambda_div);

    bool finite = std::isfinite(lb.total_value);
    if (finite) {
      ad::backward(lb.total);
      try {
        adam_step(adam, params);
      } catch (const NumericalError&) {
        finite = false;
      }
    }
    if (!finite) {
      result.diverged = true;
      best_params.restore(params);
      model.stats() = best_stats;
      break;
    }

    // Eval-mode pass: statistics update and validation metric.
    ForwardRecord eval = model.forward(bundle.graph, bundle.features, false);
    try {
      for (int l = 0; l < layers; ++l) {
        std::vector<Mat> z;
        for (const auto& v : eval.z_breve[l]) z.push_back(v.data());
        ema_update_stats(model.stats()[l], z, tcfg.update_rate);
      }
    } catch (const NumericalError&) {
      result.diverged = true;
      best_params.restore(params);
      model.stats() = best_stats;
      break;
    }
    Metrics val = evaluate(eval.logits.data(), bundle, val_idx);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_total = lb.total_value;
    rec.loss_cls = lb.cls_value;
    rec.loss_space = lb.space_values;
    rec.loss_div = lb.div_values;
    rec.val_metric = val.primary();
    result.history.push_back(rec);

    if (val.primary() > result.best_val) {
      result.best_val = val.primary();
      result.best_epoch = epoch;
      best_params = detail::ParamSnapshot::take(params);
      best_stats = model.stats();
      best_val_metrics = val;
    }
    int stale = epoch - result.best_epoch;
    if (stale >= 1 && stale >= tcfg.patience && epoch < tcfg.epochs) break;
  }

  best_params.restore(params);
  model.stats() = best_stats;
  result.val_metrics = best_val_metrics;
  if (!test_idx.empty()) {
    ForwardRecord fin = model.forward(bundle.graph, bundle.features, false);
    result.test_metrics = evaluate(fin.logits.data(), bundle, test_idx);
  }
  return result;
}

/// Same loop for the plain GCN baseline (no statistics, no regularizers).
inline TrainResult train_gcn(GcnModel& model, const GraphBundle& bundle,
                             const TrainConfig& tcfg) {
  tcfg.check();
  bundle.validate();
  auto params = model.named_params();
  AdamState adam = AdamState::init(params, tcfg.lr, tcfg.weight_decay);
  auto train_idx = bundle.mask_indices(bundle.train_mask);
  auto val_idx = bundle.mask_indices(bundle.val_mask);
  auto test_idx = bundle.mask_indices(bundle.test_mask);
  if (val_idx.empty()) val_idx = train_idx;
  CsrGraph normalized = sym_normalize(bundle.graph);

  TrainResult result;
  detail::ParamSnapshot best_params = detail::ParamSnapshot::take(params);
  Metrics best_val_metrics;

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    for (auto& [name, p] : params) p.zero_grad();
    std::uint64_t mask_seed = child_seed(tcfg.seed, 0x10000ULL + epoch);
    ad::Value logits = model.forward(normalized, bundle.features, true, mask_seed);
    ad::Value loss = cls_loss(logits, bundle, train_idx);
    double loss_value = loss.item();

    bool finite = std::isfinite(loss_value);
    if (finite) {
      ad::backward(loss);
      try {
        adam_step(adam, params);
      } catch (const NumericalError&) {
        finite = false;
      }
    }
    if (!finite) {
      result.diverged = true;
      best_params.restore(params);
      break;
    }

    ad::Value eval_logits = model.forward(normalized, bundle.features, false);
    Metrics val = evaluate(eval_logits.data(), bundle, val_idx);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_total = loss_value;
    rec.loss_cls = loss_value;
    rec.val_metric = val.primary();
    result.history.push_back(rec);

    if (val.primary() > result.best_val) {
      result.best_val = val.primary();
      result.best_epoch = epoch;
      best_params = detail::ParamSnapshot::take(params);
      best_val_metrics = val;
    }
    int stale = epoch - result.best_epoch;
    if (stale >= 1 && stale >= tcfg.patience && epoch < tcfg.epochs) break;
  }

  best_params.restore(params);
  result.val_metrics = best_val_metrics;
  if (!test_idx.empty()) {
    ad::Value fin = model.forward(normalized, bundle.features, false);
    result.test_metrics = evaluate(fin.data(), bundle, test_idx);
  }
  return result;
}

/// History CSV: epoch,loss_total,loss_cls,loss_space_l1..L,loss_div_l1..L,val_metric
inline void write_history_csv(const std::vector<EpochRecord>& history, int layers,
                              const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("write_history_csv: cannot open " + path);
  os << "epoch,loss_total,loss_cls";
  for (int l = 1; l <= layers; ++l) os << ",loss_space_l" << l;
  for (int l = 1; l <= layers; ++l) os << ",loss_div_l" << l;
  os << ",val_metric\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    os << ',' << buf;
  };
  for (const auto& r : history) {
    os << r.epoch;
    put(r.loss_total);
    put(r.loss_cls);
    for (int l = 0; l < layers; ++l)
      put(l < static_cast<int>(r.loss_space.size()) ? r.loss_space[l] : 0.0);
    for (int l = 0; l < layers; ++l)
      put(l < static_cast<int>(r.loss_div.size()) ? r.loss_div[l] : 0.0);
    put(r.val_metric);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Checkpoints (flat little-endian binary; round-trips exactly)
// ---------------------------------------------------------------------------

namespace detail {

constexpr std::uint32_t kCheckpointMagic = 0x4C474443;  // "LGDC"
constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_mat(std::ostream& os, const Mat& m) {
  write_u64(os, static_cast<std::uint64_t>(m.rows()));
  write_u64(os, static_cast<std::uint64_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * m.size()));
}
inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
inline double read_f64(std::istream& is) {
  double v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
inline Mat read_mat(std::istream& is) {
  auto rows = static_cast<Index>(read_u64(is));
  auto cols = static_cast<Index>(read_u64(is));
  Mat m(rows, cols);
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  return m;
}

}  // namespace detail

struct Checkpoint {
  enum class Kind : std::uint32_t { Lgd = 1, Gcn = 2 };
  Kind kind = Kind::Lgd;
  std::optional<LgdModel> lgd;
  std::optional<GcnModel> gcn;
};

inline void save_checkpoint(const LgdModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("save_checkpoint: cannot open " + path);
  using namespace detail;
  write_u32(os, kCheckpointMagic);
  write_u32(os, kCheckpointVersion);
  write_u32(os, static_cast<std::uint32_t>(Checkpoint::Kind::Lgd));
  const ModelConfig& c = model.config();
  write_u32(os, static_cast<std::uint32_t>(c.channels));
  write_u32(os, static_cast<std::uint32_t>(c.routing_iters));
  write_u32(os, static_cast<std::uint32_t>(c.layers));
  write_u32(os, static_cast<std::uint32_t>(c.d_out));
  write_f64(os, c.dropout);
  write_u32(os, c.rule == GraphRule::Knn ? 0u : 1u);
  write_u32(os, static_cast<std::uint32_t>(c.k));
  write_u32(os, c.use_latent_agg ? 1u : 0u);
  write_u32(os, static_cast<std::uint32_t>(model.input_dim()));
  write_u32(os, static_cast<std::uint32_t>(model.num_classes()));
  for (const auto& layer : model.layers())
    for (std::size_t m = 0; m < layer.weight.size(); ++m) {
      write_mat(os, layer.weight[m].data());
      write_mat(os, layer.bias[m].data());
    }
  for (const auto& st : model.stats())
    for (std::size_t m = 0; m < st.mu.size(); ++m) {
      write_mat(os, st.mu[m]);
      write_mat(os, st.sigma[m]);
    }
  write_mat(os, model.classifier_weight().data());
  write_mat(os, model.classifier_bias().data());
  if (!os) throw IoError("save_checkpoint: write failed for " + path);
}

inline void save_checkpoint(const GcnModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("save_checkpoint: cannot open " + path);
  using namespace detail;
  write_u32(os, kCheckpointMagic);
  write_u32(os, kCheckpointVersion);
  write_u32(os, static_cast<std::uint32_t>(Checkpoint::Kind::Gcn));
  write_u32(os, static_cast<std::uint32_t>(model.widths().size()));
  for (int w : model.widths()) write_u32(os, static_cast<std::uint32_t>(w));
  write_f64(os, model.dropout());
  for (std::size_t l = 0; l < model.widths().size() - 1; ++l) {
    write_mat(os, model.weights()[l].data());
    write_mat(os, model.biases()[l].data());
  }
  if (!os) throw IoError("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_checkpoint: cannot open " + path);
  using namespace detail;
  if (read_u32(is) != kCheckpointMagic)
    throw ParseError("checkpoint: bad magic in " + path, 1);
  if (read_u32(is) != kCheckpointVersion)
    throw ParseError("checkpoint: unsupported version in " + path, 1);
  Checkpoint ck;
  ck.kind = static_cast<Checkpoint::Kind>(read_u32(is));
  if (ck.kind == Checkpoint::Kind::Lgd) {
    ModelConfig c;
    c.channels = static_cast<int>(read_u32(is));
    c.routing_iters = static_cast<int>(read_u32(is));
    c.layers = static_cast<int>(read_u32(is));
    c.d_out = static_cast<int>(read_u32(is));
    c.dropout = read_f64(is);
    c.rule = read_u32(is) == 0 ? GraphRule::Knn : GraphRule::Cknn;
    c.k = static_cast<int>(read_u32(is));
    c.use_latent_agg = read_u32(is) != 0;
    int d_in = static_cast<int>(read_u32(is));
    int classes = static_cast<int>(read_u32(is));
    LgdModel model(c, d_in, classes, 0);
    for (auto& layer : model.layers())
      for (std::size_t m = 0; m < layer.weight.size(); ++m) {
        layer.weight[m].data() = read_mat(is);
        layer.bias[m].data() = read_mat(is);
      }
    for (auto& st : model.stats())
      for (std::size_t m = 0; m < st.mu.size(); ++m) {
        st.mu[m] = read_mat(is);
        st.sigma[m] = read_mat(is);
        st.refresh(static_cast<int>(m));
      }
    model.classifier_weight().data() = read_mat(is);
    model.classifier_bias().data() = read_mat(is);
    if (!is) throw ParseError("checkpoint: truncated file " + path, 1);
    ck.lgd.emplace(std::move(model));
  } else if (ck.kind == Checkpoint::Kind::Gcn) {
    auto n_widths = static_cast<std::size_t>(read_u32(is));
    std::vector<int> widths(n_widths);
    for (auto& w : widths) w = static_cast<int>(read_u32(is));
    double dropout = read_f64(is);
    GcnModel model(widths, dropout, 0);
    for (std::size_t l = 0; l + 1 < n_widths; ++l) {
      model.weights()[l].data() = read_mat(is);
      model.biases()[l].data() = read_mat(is);
    }
    if (!is) throw ParseError("checkpoint: truncated file " + path, 1);
    ck.gcn.emplace(std::move(model));
  } else {
    throw ParseError("checkpoint: unknown model kind in " + path, 1);
  }
  return ck;
}

}  // namespace lgd
