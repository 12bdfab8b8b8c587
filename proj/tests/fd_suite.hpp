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

// Finite-difference checks for every differentiable operation and for the
// composite loss paths. Shared between the unit tests and the acceptance
// suite (criterion: relative error < 1e-4 over 20 random seeds).

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lgd/autodiff.hpp"
#include "lgd/graph.hpp"
#include "lgd/model.hpp"
#include "lgd/objectives.hpp"
#include "oracles.hpp"

namespace fd_suite {

using lgd::Index;
using lgd::Mat;
using lgd::Rng;
using lgd::ad::Value;
using oracles::FdReport;

struct Case {
  std::string name;
  std::function<FdReport(std::uint64_t seed)> run;
};

namespace detail {

/// Contracts a matrix output to a scalar with a fixed random weighting, so
/// upstream gradients are non-trivial.
inline Value weighted(const Value& v, const Mat& c) {
  return lgd::ad::sum(lgd::ad::mul(v, Value::constant(c)));
}

inline std::shared_ptr<const std::vector<int>> idx(std::vector<int> v) {
  return std::make_shared<const std::vector<int>>(std::move(v));
}

}  // namespace detail

inline std::vector<Case> all_cases() {
  using namespace lgd;
  using oracles::random_mat;
  using oracles::random_mat_margin;
  using oracles::random_spd;
  std::vector<Case> cases;

  auto simple = [&](const std::string& name,
                    std::function<Value(const std::vector<Value>&, Rng&)> body,
                    std::function<std::vector<Mat>(Rng&)> make_inputs,
                    double tol = 1e-4) {
    cases.push_back({name, [=](std::uint64_t seed) {
                       Rng gen(seed * 7919 + 13);
                       auto inputs = make_inputs(gen);
                       return oracles::check_gradients(
                           [&, body](const std::vector<Value>& leaves) {
                             // Auxiliary constants replay per evaluation.
                             Rng g2(seed * 104729 + 7);
                             return body(leaves, g2);
                           },
                           inputs, 1e-5, tol);
                     }});
  };

  auto two_mats = [](Index r, Index c) {
    return [r, c](Rng& gen) {
      return std::vector<Mat>{oracles::random_mat(gen, r, c),
                              oracles::random_mat(gen, r, c)};
    };
  };

  simple("add",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), in[0].cols());
           return detail::weighted(ad::add(in[0], in[1]), c);
         },
         two_mats(3, 4));

  simple("sub",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), in[0].cols());
           return detail::weighted(ad::sub(in[0], in[1]), c);
         },
         two_mats(3, 4));

  simple("mul",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), in[0].cols());
           return detail::weighted(ad::mul(in[0], in[1]), c);
         },
         two_mats(3, 4));

  simple("scale",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), in[0].cols());
           return detail::weighted(ad::scale(in[0], -1.7), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 3, 4)}; });

  simple("add_scalar",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), in[0].cols());
           return detail::weighted(ad::add_scalar(in[0], 0.37), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 3, 4)}; });

  simple("add_rowvec",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), in[0].cols());
           return detail::weighted(ad::add_rowvec(in[0], in[1]), c);
         },
         [](Rng& gen) {
           return std::vector<Mat>{random_mat(gen, 4, 3), random_mat(gen, 1, 3)};
         });

  simple("matmul",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, 3, 2);
           return detail::weighted(ad::matmul(in[0], in[1]), c);
         },
         [](Rng& gen) {
           return std::vector<Mat>{random_mat(gen, 3, 4), random_mat(gen, 4, 2)};
         });

  simple("transpose",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].cols(), in[0].rows());
           return detail::weighted(ad::transpose(in[0]), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 3, 5)}; });

  simple("relu",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), in[0].cols());
           return detail::weighted(ad::relu(in[0]), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat_margin(gen, 3, 4)}; });

  simple("exp",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), in[0].cols());
           return detail::weighted(ad::exp(in[0]), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 3, 4)}; });

  simple("log",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), in[0].cols());
           return detail::weighted(ad::log(in[0]), c);
         },
         [](Rng& gen) {
           return std::vector<Mat>{random_mat(gen, 3, 4, 0.5, 2.0)};
         });

  simple("l2_normalize_rows",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), in[0].cols());
           return detail::weighted(ad::l2_normalize_rows(in[0]), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat_margin(gen, 4, 3)}; });

  simple("softmax_rows",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), in[0].cols());
           return detail::weighted(ad::softmax_rows(in[0]), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 4, 5)}; });

  simple("apply_mask",
         [](const std::vector<Value>& in, Rng& g) {
           Mat mask(in[0].rows(), in[0].cols());
           for (Index i = 0; i < mask.rows(); ++i)
             for (Index j = 0; j < mask.cols(); ++j)
               mask(i, j) = lgd::bernoulli(g, 0.4) ? 0.0 : 2.0;
           Mat c = oracles::random_mat(g, in[0].rows(), in[0].cols());
           return detail::weighted(ad::apply_mask(in[0], mask), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 3, 4)}; });

  simple("sum",
         [](const std::vector<Value>& in, Rng&) { return ad::sum(in[0]); },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 3, 4)}; });

  simple("mean",
         [](const std::vector<Value>& in, Rng&) { return ad::mean(in[0]); },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 3, 4)}; });

  simple("sum_cols",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), 1);
           return detail::weighted(ad::sum_cols(in[0]), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 4, 3)}; });

  simple("rowwise_dot",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), 1);
           return detail::weighted(ad::rowwise_dot(in[0], in[1]), c);
         },
         two_mats(4, 3));

  simple("concat_cols",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, 3, 5);
           return detail::weighted(ad::concat_cols({in[0], in[1]}), c);
         },
         [](Rng& gen) {
           return std::vector<Mat>{random_mat(gen, 3, 2), random_mat(gen, 3, 3)};
         });

  simple("concat_rows",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, 5, 3);
           return detail::weighted(ad::concat_rows({in[0], in[1]}), c);
         },
         [](Rng& gen) {
           return std::vector<Mat>{random_mat(gen, 2, 3), random_mat(gen, 3, 3)};
         });

  simple("slice_cols",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), 2);
           return detail::weighted(ad::slice_cols(in[0], 1, 2), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 3, 4)}; });

  simple("slice_rows",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, 2, in[0].cols());
           return detail::weighted(ad::slice_rows(in[0], 1, 2), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 4, 3)}; });

  simple("gather_rows",
         [](const std::vector<Value>& in, Rng& g) {
           auto index = detail::idx({2, 0, 1, 2, 3});
           Mat c = oracles::random_mat(g, 5, in[0].cols());
           return detail::weighted(ad::gather_rows(in[0], index), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 4, 3)}; });

  simple("scatter_rows_weighted",
         [](const std::vector<Value>& in, Rng& g) {
           auto dst = detail::idx({0, 2, 2, 1, 0});
           Mat c = oracles::random_mat(g, 3, in[1].cols());
           return detail::weighted(
               ad::scatter_rows_weighted(in[0], in[1], dst, 3), c);
         },
         [](Rng& gen) {
           return std::vector<Mat>{random_mat(gen, 5, 1), random_mat(gen, 5, 3)};
         });

  simple("mahalanobis",
         [](const std::vector<Value>& in, Rng& g) {
           Rng stats_gen(99);
           Mat sigma = random_spd(stats_gen, in[0].cols());
           Mat mu = random_mat(stats_gen, 1, in[0].cols());
           auto f = lgd::SpdFactor::from(sigma);
           Mat c = oracles::random_mat(g, in[0].rows(), 1);
           return detail::weighted(ad::mahalanobis(in[0], mu, f), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 4, 3)}; });

  simple("gaussian_pdf",
         [](const std::vector<Value>& in, Rng& g) {
           Rng stats_gen(7);
           Mat sigma = random_spd(stats_gen, in[0].cols());
           Mat mu = random_mat(stats_gen, 1, in[0].cols());
           auto f = lgd::SpdFactor::from(sigma);
           Mat c = oracles::random_mat(g, in[0].rows(), 1);
           return detail::weighted(ad::gaussian_pdf(in[0], mu, f), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 4, 3)}; });

  simple("logdet_gram",
         [](const std::vector<Value>& in, Rng&) {
           return ad::logdet_gram(in[0]);
         },
         [](Rng& gen) { return std::vector<Mat>{random_spd(gen, 4)}; }, 1e-5);

  simple("logdet_rows",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), 1);
           return detail::weighted(ad::logdet_rows(in[0], 3), c);
         },
         [](Rng& gen) {
           Mat rows(2, 9);
           for (int r = 0; r < 2; ++r) {
             Mat spd = random_spd(gen, 3);
             rows.row(r) = Eigen::Map<Mat>(spd.data(), 1, 9);
           }
           return std::vector<Mat>{rows};
         });

  simple("likelihood_normalize",
         [](const std::vector<Value>& in, Rng& g) {
           Mat c = oracles::random_mat(g, in[0].rows(), in[0].cols());
           return detail::weighted(ad::likelihood_normalize(in[0], 1), c);
         },
         [](Rng& gen) {
           return std::vector<Mat>{random_mat(gen, 4, 3, 0.1, 1.0)};
         });

  simple("softmax_cross_entropy",
         [](const std::vector<Value>& in, Rng&) {
           auto labels = detail::idx({2, 0, 1, 2, 1});
           auto rows = detail::idx({0, 2, 3, 4});
           return ad::softmax_cross_entropy(in[0], labels, rows);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 5, 3)}; });

  simple("sigmoid_cross_entropy",
         [](const std::vector<Value>& in, Rng& g) {
           Mat targets(in[0].rows(), in[0].cols());
           for (Index i = 0; i < targets.rows(); ++i)
             for (Index j = 0; j < targets.cols(); ++j)
               targets(i, j) = lgd::bernoulli(g, 0.5) ? 1.0 : 0.0;
           auto rows = detail::idx({0, 1, 3});
           return ad::sigmoid_cross_entropy(in[0], targets, rows);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 4, 3)}; });

  simple("spmm",
         [](const std::vector<Value>& in, Rng& g) {
           lgd::CsrGraph graph = lgd::CsrGraph::from_undirected_edges(
               4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
           lgd::CsrGraph norm = lgd::sym_normalize(graph);
           Mat c = oracles::random_mat(g, 4, in[0].cols());
           return detail::weighted(lgd::spmm(norm, in[0]), c);
         },
         [](Rng& gen) { return std::vector<Mat>{random_mat(gen, 4, 3)}; });

  // --- composite paths ---

  simple("projection_chain",  // normalize(relu(h W + b))
         [](const std::vector<Value>& in, Rng& g) {
           Value pre = ad::add_rowvec(ad::matmul(in[0], in[1]), in[2]);
           Value z = ad::l2_normalize_rows(ad::relu(pre));
           Mat c = oracles::random_mat(g, in[0].rows(), in[1].cols());
           return detail::weighted(z, c);
         },
         [](Rng& gen) {
           // Keep pre-activations away from the ReLU kink.
           Mat h = random_mat(gen, 3, 4);
           Mat w = random_mat(gen, 4, 3);
           Mat b = random_mat(gen, 1, 3);
           for (;;) {
             Mat pre = (h * w).rowwise() + b.row(0);
             if (pre.cwiseAbs().minCoeff() > 5e-3) break;
             h = random_mat(gen, 3, 4);
           }
           return std::vector<Mat>{h, w, b};
         },
         1e-4);

  simple("routing_chain",
         [](const std::vector<Value>& in, Rng& g) {
           lgd::CsrGraph graph =
               lgd::CsrGraph::from_undirected_edges(4, {{0, 1}, {1, 2}, {2, 3}});
           std::vector<Value> z{in[0], in[1]};
           auto out = lgd::neighborhood_routing(z, graph, 2);
           Mat c0 = oracles::random_mat(g, 4, in[0].cols());
           Mat c1 = oracles::random_mat(g, 4, in[0].cols());
           return ad::add(detail::weighted(out[0], c0),
                          detail::weighted(out[1], c1));
         },
         [](Rng& gen) {
           return std::vector<Mat>{random_mat_margin(gen, 4, 3),
                                   random_mat_margin(gen, 4, 3)};
         });

  simple("space_loss_path",
         [](const std::vector<Value>& in, Rng&) {
           lgd::ChannelStats stats = lgd::ChannelStats::identity(2, 3);
           Rng sg(5);
           stats.mu[0] = random_mat(sg, 1, 3);
           stats.mu[1] = random_mat(sg, 1, 3);
           stats.sigma[0] = random_spd(sg, 3);
           stats.sigma[1] = random_spd(sg, 3);
           stats.refresh(0);
           stats.refresh(1);
           return lgd::space_loss({in[0], in[1]}, stats);
         },
         two_mats(4, 3));

  simple("diversity_loss_path",
         [](const std::vector<Value>& in, Rng&) {
           lgd::ChannelStats stats = lgd::ChannelStats::identity(2, 3);
           Rng sg(11);
           stats.mu[0] = random_mat(sg, 1, 3);
           stats.mu[1] = random_mat(sg, 1, 3);
           stats.sigma[0] = random_spd(sg, 3);
           stats.sigma[1] = random_spd(sg, 3);
           stats.refresh(0);
           stats.refresh(1);
           return lgd::diversity_loss({in[0], in[1]}, stats);
         },
         two_mats(4, 3));

  simple("total_loss_path",  // Eq. 7 composition over two layers
         [](const std::vector<Value>& in, Rng& g) {
           lgd::ChannelStats stats = lgd::ChannelStats::identity(2, 3);
           auto labels = detail::idx({1, 0, 2, 1});
           auto rows = detail::idx({0, 1, 2, 3});
           Value cls = ad::softmax_cross_entropy(in[0], labels, rows);
           std::vector<Value> space{lgd::space_loss({in[1], in[2]}, stats),
                                    lgd::space_loss({in[2], in[1]}, stats)};
           std::vector<Value> div{lgd::diversity_loss({in[1], in[2]}, stats),
                                  lgd::diversity_loss({in[2], in[1]}, stats)};
           return lgd::total_loss(cls, space, div, 0.4, 0.02).total;
         },
         [](Rng& gen) {
           return std::vector<Mat>{random_mat(gen, 4, 3), random_mat(gen, 4, 3),
                                   random_mat(gen, 4, 3)};
         });

  return cases;
}

/// Runs every case over `seeds` seeds; returns the failures.
inline std::vector<std::pair<std::string, FdReport>> run_all(int seeds = 20) {
  std::vector<std::pair<std::string, FdReport>> failures;
  for (const auto& c : all_cases())
    for (int s = 0; s < seeds; ++s) {
      FdReport r = c.run(static_cast<std::uint64_t>(s));
      if (!r.ok) failures.emplace_back(c.name + "/seed" + std::to_string(s), r);
    }
  return failures;
}

}  // namespace fd_suite
