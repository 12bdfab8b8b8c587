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

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "fd_suite.hpp"
#include "lgd/autodiff.hpp"
#include "oracles.hpp"

using lgd::Mat;
using lgd::Rng;
using lgd::ad::Value;
namespace ad = lgd::ad;

static Mat mat2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

TEST_CASE("matmul basics") {
  SECTION("identity leaves the operand unchanged") {
    Mat m = mat2(1.5, -2, 3, 0.25);
    Value out = ad::matmul(Value::constant(Mat::Identity(2, 2)), Value::constant(m));
    REQUIRE(out.data().isApprox(m));
  }
  SECTION("hand product") {
    Mat a = mat2(1, 2, 3, 4);
    Mat b(2, 1);
    b << 1, 1;
    Value out = ad::matmul(Value::constant(a), Value::constant(b));
    REQUIRE(out.data()(0, 0) == 3.0);
    REQUIRE(out.data()(1, 0) == 7.0);
  }
  SECTION("dimension mismatch names both shapes") {
    Value a = Value::constant(Mat::Zero(3, 4));
    Value b = Value::constant(Mat::Zero(5, 2));
    REQUIRE_THROWS_WITH(ad::matmul(a, b),
                        Catch::Matchers::ContainsSubstring("3x4") &&
                            Catch::Matchers::ContainsSubstring("5x2"));
  }
  SECTION("gradient of sum(a*b) matches finite differences") {
    Rng gen(42);
    Mat a = oracles::random_mat(gen, 3, 4);
    Mat b = oracles::random_mat(gen, 4, 2);
    auto rep = oracles::check_gradients(
        [](const std::vector<Value>& in) { return ad::sum(ad::matmul(in[0], in[1])); },
        {a, b}, 1e-5, 1e-6);
    INFO(rep.detail);
    REQUIRE(rep.ok);
  }
}

TEST_CASE("relu") {
  Mat x(1, 3);
  x << -1, 0, 2;
  Value out = ad::relu(Value::constant(x));
  REQUIRE(out.data()(0, 0) == 0.0);
  REQUIRE(out.data()(0, 1) == 0.0);
  REQUIRE(out.data()(0, 2) == 2.0);

  Mat pos(2, 2);
  pos << 1, 2, 3, 4;
  REQUIRE(ad::relu(Value::constant(pos)).data().isApprox(pos));

  // Subgradient: 0 at negatives and at exactly zero.
  Mat x2(1, 2);
  x2 << -1, 2;
  Value leaf = Value::param(x2);
  ad::backward(ad::sum(ad::relu(leaf)));
  REQUIRE(leaf.grad()(0, 0) == 0.0);
  REQUIRE(leaf.grad()(0, 1) == 1.0);
}

TEST_CASE("l2_normalize_rows") {
  SECTION("3-4-5 row") {
    Mat x(1, 2);
    x << 3, 4;
    Value out = ad::l2_normalize_rows(Value::constant(x));
    REQUIRE_THAT(out.data()(0, 0), Catch::Matchers::WithinAbs(0.6, 1e-15));
    REQUIRE_THAT(out.data()(0, 1), Catch::Matchers::WithinAbs(0.8, 1e-15));
  }
  SECTION("unit row unchanged") {
    Mat x(1, 2);
    x << 1, 0;
    REQUIRE(ad::l2_normalize_rows(Value::constant(x)).data().isApprox(x));
  }
  SECTION("zero row stays zero under the eps clamp, with zero gradient") {
    Mat x = Mat::Zero(2, 3);
    x.row(1) << 1, 2, 2;
    Value leaf = Value::param(x);
    Value out = ad::l2_normalize_rows(leaf);
    REQUIRE(out.data().row(0).norm() == 0.0);
    ad::backward(ad::sum(out));
    REQUIRE(leaf.grad().row(0).norm() == 0.0);
  }
  SECTION("rows have norm 0 or 1") {
    Rng gen(7);
    Mat x = oracles::random_mat(gen, 10, 4);
    x.row(3).setZero();
    Mat out = ad::l2_normalize_rows(Value::constant(x)).data();
    for (lgd::Index i = 0; i < out.rows(); ++i) {
      double r = out.row(i).norm();
      REQUIRE((std::abs(r - 1.0) < 1e-10 || r == 0.0));
    }
  }
}

TEST_CASE("softmax_rows") {
  SECTION("symmetry") {
    Mat x = Mat::Zero(1, 2);
    Mat out = ad::softmax_rows(Value::constant(x)).data();
    REQUIRE_THAT(out(0, 0), Catch::Matchers::WithinAbs(0.5, 1e-15));
    REQUIRE_THAT(out(0, 1), Catch::Matchers::WithinAbs(0.5, 1e-15));
  }
  SECTION("large logits do not overflow") {
    Mat x(1, 2);
    x << 1000, 0;
    Mat out = ad::softmax_rows(Value::constant(x)).data();
    REQUIRE(out.allFinite());
    REQUIRE_THAT(out(0, 0), Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  SECTION("rows sum to one") {
    Rng gen(3);
    Mat x = oracles::random_mat(gen, 6, 5, -30, 30);
    Mat out = ad::softmax_rows(Value::constant(x)).data();
    for (lgd::Index i = 0; i < out.rows(); ++i)
      REQUIRE_THAT(out.row(i).sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  SECTION("gradient matches finite differences") {
    Rng gen(11);
    Mat x = oracles::random_mat(gen, 3, 4);
    Mat c = oracles::random_mat(gen, 3, 4);
    auto rep = oracles::check_gradients(
        [&](const std::vector<Value>& in) {
          return ad::sum(ad::mul(ad::softmax_rows(in[0]), Value::constant(c)));
        },
        {x}, 1e-5, 1e-6);
    INFO(rep.detail);
    REQUIRE(rep.ok);
  }
}

TEST_CASE("mahalanobis") {
  Mat sigma = Mat::Identity(3, 3);
  auto factor = lgd::SpdFactor::from(sigma);
  Mat mu(1, 3);
  mu << 0.3, -0.2, 1.0;

  SECTION("zero at the mean") {
    Value out = ad::mahalanobis(Value::constant(mu), mu, factor);
    REQUIRE_THAT(out.item(), Catch::Matchers::WithinAbs(0.0, 1e-15));
  }
  SECTION("identity covariance unit offset") {
    Mat z = mu;
    z(0, 0) += 1.0;
    Value out = ad::mahalanobis(Value::constant(z), mu, factor);
    REQUIRE_THAT(out.item(), Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  SECTION("explicit 2x2 diagonal") {
    Mat s2 = Mat::Zero(2, 2);
    s2(0, 0) = 2.0;
    s2(1, 1) = 0.5;
    Mat mu2 = Mat::Zero(1, 2);
    Mat z(1, 2);
    z << 1, 1;
    Value out = ad::mahalanobis(Value::constant(z), mu2, lgd::SpdFactor::from(s2));
    REQUIRE_THAT(out.item(), Catch::Matchers::WithinAbs(2.5, 1e-12));
  }
  SECTION("non-negative, zero only at the mean") {
    Rng gen(5);
    Mat s = oracles::random_spd(gen, 3);
    auto f = lgd::SpdFactor::from(s);
    for (int trial = 0; trial < 50; ++trial) {
      Mat z = oracles::random_mat(gen, 1, 3);
      double d = ad::mahalanobis(Value::constant(z), mu, f).item();
      REQUIRE(d >= 0.0);
      if ((z - mu).norm() > 1e-6) REQUIRE(d > 0.0);
    }
  }
  SECTION("dimension mismatch") {
    REQUIRE_THROWS_AS(ad::mahalanobis(Value::constant(Mat::Zero(1, 2)), mu, factor),
                      lgd::ShapeError);
  }
}

TEST_CASE("gaussian_pdf") {
  SECTION("standard normal at the mean") {
    Mat mu = Mat::Zero(1, 1);
    auto f = lgd::SpdFactor::from(Mat::Identity(1, 1));
    double v = ad::gaussian_pdf(Value::constant(Mat::Zero(1, 1)), mu, f).item();
    REQUIRE_THAT(v, Catch::Matchers::WithinAbs(0.3989422804014327, 1e-6));
  }
  SECTION("2d closed form at unit offset") {
    Mat mu = Mat::Zero(1, 2);
    auto f = lgd::SpdFactor::from(Mat::Identity(2, 2));
    Mat z(1, 2);
    z << 1, 0;
    double v = ad::gaussian_pdf(Value::constant(z), mu, f).item();
    REQUIRE_THAT(v, Catch::Matchers::WithinAbs(std::exp(-0.5) / (2.0 * M_PI), 1e-6));
  }
  SECTION("strictly positive while exp stays in range") {
    Rng gen(17);
    Mat sigma = oracles::random_spd(gen, 3);
    auto f = lgd::SpdFactor::from(sigma);
    Mat mu = oracles::random_mat(gen, 1, 3);
    for (int trial = 0; trial < 20; ++trial) {
      Mat z = oracles::random_mat(gen, 1, 3, -8, 8);
      REQUIRE(ad::gaussian_pdf(Value::constant(z), mu, f).item() > 0.0);
    }
  }
  SECTION("matches the closed-form reference on random inputs") {
    Rng gen(23);
    Mat sigma = oracles::random_spd(gen, 4);
    auto f = lgd::SpdFactor::from(sigma);
    Mat mu = oracles::random_mat(gen, 1, 4);
    Mat z = oracles::random_mat(gen, 1, 4);
    double got = ad::gaussian_pdf(Value::constant(z), mu, f).item();
    double want = oracles::gaussian_pdf_reference(
        z.row(0).transpose(), mu.row(0).transpose(), f.matrix);
    REQUIRE_THAT(got, Catch::Matchers::WithinRel(want, 1e-10));
  }
}

TEST_CASE("logdet_gram") {
  SECTION("identity") {
    double eps = 1e-8;
    double v = ad::logdet_gram(Value::constant(Mat::Identity(3, 3)), eps).item();
    REQUIRE_THAT(v, Catch::Matchers::WithinAbs(3.0 * std::log1p(eps), 1e-12));
    REQUIRE_THAT(v, Catch::Matchers::WithinAbs(0.0, 1e-6));
  }
  SECTION("two unit vectors at 60 degrees") {
    Mat g(2, 2);
    g << 1.0, 0.5, 0.5, 1.0;  // det = 1 - cos^2(60deg) = 0.75
    double v = ad::logdet_gram(Value::constant(g), 1e-8).item();
    REQUIRE_THAT(v, Catch::Matchers::WithinAbs(std::log(0.75), 1e-6));
  }
  SECTION("gradient matches finite differences on random SPD") {
    Rng gen(29);
    Mat spd = oracles::random_spd(gen, 4);
    auto rep = oracles::check_gradients(
        [](const std::vector<Value>& in) { return ad::logdet_gram(in[0]); }, {spd},
        1e-5, 1e-5);
    INFO(rep.detail);
    REQUIRE(rep.ok);
  }
  SECTION("Hadamard bound for unit-norm-column grams") {
    Rng gen(31);
    const int m = 4;
    double eps = 1e-8;
    for (int trial = 0; trial < 20; ++trial) {
      Mat cols = oracles::random_mat(gen, 5, m);
      for (int c = 0; c < m; ++c) cols.col(c) /= cols.col(c).norm();
      Mat gram = cols.transpose() * cols;
      double v = ad::logdet_gram(Value::constant(gram), eps).item();
      REQUIRE(v <= std::log1p(eps * m) + 1e-9);
    }
  }
  SECTION("hard asymmetry is rejected") {
    Mat g(2, 2);
    g << 1.0, 0.5, 0.1, 1.0;
    REQUIRE_THROWS_AS(ad::logdet_gram(Value::constant(g)), lgd::ShapeError);
  }
}

TEST_CASE("backward semantics") {
  SECTION("sum gives ones") {
    Value x = Value::param(mat2(1, 2, 3, 4));
    ad::backward(ad::sum(x));
    REQUIRE(x.grad().isApprox(Mat::Ones(2, 2)));
  }
  SECTION("disconnected input gets zero gradient") {
    Value x = Value::param(mat2(1, 2, 3, 4));
    Value y = Value::param(mat2(5, 6, 7, 8));
    ad::backward(ad::sum(y));
    REQUIRE(x.grad().norm() == 0.0);
  }
  SECTION("repeated calls accumulate") {
    Value x = Value::param(mat2(1, 2, 3, 4));
    Value loss = ad::sum(x);
    ad::backward(loss);
    loss.zero_grad();
    ad::backward(loss);
    REQUIRE(x.grad().isApprox(2.0 * Mat::Ones(2, 2)));
  }
  SECTION("non-scalar loss is rejected") {
    Value x = Value::param(mat2(1, 2, 3, 4));
    REQUIRE_THROWS_AS(ad::backward(x), lgd::ShapeError);
  }
  SECTION("diamond-shaped graph visits each node once") {
    Value x = Value::param(mat2(1, 2, 3, 4));
    Value y = ad::mul(x, x);
    Value loss = ad::sum(ad::add(y, y));
    ad::backward(loss);
    // d/dx of 2*x^2 summed = 4x
    REQUIRE(x.grad().isApprox(4.0 * mat2(1, 2, 3, 4)));
  }
  SECTION("composite projection chain matches finite differences") {
    Rng gen(37);
    Mat h = oracles::random_mat_margin(gen, 3, 4);
    Mat w = oracles::random_mat(gen, 4, 3);
    Mat b = oracles::random_mat(gen, 1, 3);
    Mat c = oracles::random_mat(gen, 3, 3);
    auto rep = oracles::check_gradients(
        [&](const std::vector<Value>& in) {
          Value z = ad::l2_normalize_rows(
              ad::relu(ad::add_rowvec(ad::matmul(in[0], in[1]), in[2])));
          return ad::sum(ad::mul(z, Value::constant(c)));
        },
        {h, w, b}, 1e-5, 1e-5);
    INFO(rep.detail);
    REQUIRE(rep.ok);
  }
}

TEST_CASE("value invariants") {
  Value x = Value::param(mat2(1, 2, 3, 4));
  REQUIRE(x.grad().rows() == x.data().rows());
  REQUIRE(x.grad().cols() == x.data().cols());
  Value y = ad::relu(x);
  REQUIRE(y.grad().rows() == y.data().rows());
  REQUIRE(y.requires_grad());
  Value z = ad::relu(Value::constant(mat2(1, 2, 3, 4)));
  REQUIRE_FALSE(z.requires_grad());
  ad::backward(ad::sum(z));  // no-op, nothing requires grad
  REQUIRE(z.grad().norm() == 0.0);
}

TEST_CASE("finite differences hold for every operation across seeds",
          "[fd][slow]") {
  auto failures = fd_suite::run_all(20);
  for (const auto& [name, rep] : failures) {
    INFO(name << ": " << rep.detail);
  }
  REQUIRE(failures.empty());
}
