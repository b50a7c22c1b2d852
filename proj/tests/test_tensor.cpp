// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "voxelpipe/common/error.hpp"
#include "voxelpipe/common/rng.hpp"
#include "voxelpipe/tensor/adamw.hpp"
#include "voxelpipe/tensor/tensor.hpp"

using namespace voxelpipe;

TEST_CASE("tensor construction and element access") {
  Tensor t = Tensor::zeros({2, 3}, Dtype::F32);
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.dim(1) == 3);
  for (int64_t i = 0; i < 6; ++i) CHECK(t.at(i) == 0.0);

  Tensor f = Tensor::full({4}, Dtype::F64, 2.5);
  CHECK(f.at(3) == 2.5);

  Tensor v = Tensor::from_values({2, 2}, Dtype::F32, {1, 2, 3, 4});
  CHECK(v.at(0) == 1.0);
  CHECK(v.at(3) == 4.0);

  v.set(2, -7.0);
  CHECK(v.at(2) == -7.0);

  CHECK(Tensor::scalar(3.0, Dtype::F64).numel() == 1);
  CHECK(v.shape_str() == "[2,2]");
}

TEST_CASE("tensor value semantics share buffers, clone copies") {
  Tensor a = Tensor::full({3}, Dtype::F32, 1.0);
  Tensor b = a;  // shares storage
  b.set(0, 9.0);
  CHECK(a.at(0) == 9.0);

  Tensor c = a.clone();
  c.set(1, 5.0);
  CHECK(a.at(1) == 1.0);

  Tensor r = a.reshaped({3, 1});
  CHECK(r.rank() == 2);
  r.set(2, 4.0);
  CHECK(a.at(2) == 4.0);
  CHECK_THROWS_AS((void)a.reshaped({2, 2}), Error);
}

TEST_CASE("astype saturates and rounds to nearest") {
  Tensor f = Tensor::from_values({5}, Dtype::F32, {-5.0, 0.4, 0.6, 300.7, 255.0});
  Tensor u = f.astype(Dtype::U8);
  CHECK(u.dtype() == Dtype::U8);
  CHECK(u.at(0) == 0.0);    // clamped low
  CHECK(u.at(1) == 0.0);    // rounds down
  CHECK(u.at(2) == 1.0);    // rounds up
  CHECK(u.at(3) == 255.0);  // clamped high
  CHECK(u.at(4) == 255.0);

  Tensor i = Tensor::from_values({2}, Dtype::F64, {-3.2, 1e20}).astype(Dtype::I64);
  CHECK(i.at(0) == -3.0);

  // float -> float keeps values
  Tensor d = f.astype(Dtype::F64);
  CHECK(d.at(3) == doctest::Approx(300.7).epsilon(1e-6));
}

TEST_CASE("deterministic rng stream is frozen") {
  // values computed with a standalone transliteration of the generator
  Rng r(42);
  CHECK(r.next_u64() == 13930160852258120406ULL);
  CHECK(r.next_u64() == 11788048577503494824ULL);
  CHECK(r.next_u64() == 13874630024467741450ULL);

  Rng u(42);
  CHECK(u.uniform() == doctest::Approx(0.75515553295453897).epsilon(1e-15));

  Rng n(7);
  CHECK(n.normal() == doctest::Approx(0.71302983388758112).epsilon(1e-12));

  CHECK(mix_seed(1, 2) == 2092789425003139053ULL);
  CHECK(derive_seed(7ULL, 1, 2, 3) == 13438542925529834187ULL);
}

TEST_CASE("rng utility properties") {
  Rng r(123);
  for (int i = 0; i < 1000; ++i) {
    double x = r.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  for (int i = 0; i < 100; ++i) CHECK(r.below(7) < 7);

  std::vector<int> v(20);
  std::iota(v.begin(), v.end(), 0);
  Rng s(5);
  shuffle_indices(v, s);
  std::set<int> seen(v.begin(), v.end());
  CHECK(seen.size() == 20);  // permutation

  // same seed, same order
  std::vector<int> v2(20);
  std::iota(v2.begin(), v2.end(), 0);
  Rng s2(5);
  shuffle_indices(v2, s2);
  CHECK(v == v2);
}

TEST_CASE("adamw single step matches the hand-evaluated update") {
  // theta=1.0, g=0.5, lr=0.001, betas=(0.9,0.999), wd=0.01:
  // m_hat=0.5, sqrt(v_hat)=0.5, step=lr*0.5/(0.5+eps), decay=lr*wd*theta
  AdamWConfig cfg;
  cfg.lr = 0.001;
  cfg.weight_decay = 0.01;
  AdamW opt(cfg);
  std::vector<Tensor> params{Tensor::full({1}, Dtype::F64, 1.0)};
  std::vector<Tensor> grads{Tensor::full({1}, Dtype::F64, 0.5)};
  opt.step(params, grads);
  CHECK(params[0].at(0) == doctest::Approx(0.99899).epsilon(1e-7));
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adamw 100 steps track an independent scalar reference") {
  // implementation under test
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.01;
  AdamW opt(cfg);
  std::vector<Tensor> params{Tensor::full({1}, Dtype::F64, 0.0)};

  // plain-double transliteration of the update equations
  double theta = 0.0, m = 0.0, v = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01;

  for (int t = 1; t <= 100; ++t) {
    const double g = params[0].at(0) - 3.0;  // d/dθ of (θ-3)²/2
    std::vector<Tensor> grads{Tensor::full({1}, Dtype::F64, g)};
    opt.step(params, grads);

    const double gr = theta - 3.0;
    m = b1 * m + (1 - b1) * gr;
    v = b2 * v + (1 - b2) * gr * gr;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    theta = theta - lr * mh / (std::sqrt(vh) + eps) - lr * wd * theta;

    CHECK(std::abs(params[0].at(0) - theta) <= 1e-12);
  }
  CHECK(opt.step_count() == 100);
}

TEST_CASE("adamw rejects mismatched param and grad sets") {
  AdamW opt(AdamWConfig{});
  std::vector<Tensor> params{Tensor::zeros({2}, Dtype::F32)};
  std::vector<Tensor> grads{Tensor::zeros({3}, Dtype::F32)};
  CHECK_THROWS_AS(opt.step(params, grads), Error);
  std::vector<Tensor> none;
  CHECK_THROWS_AS(opt.step(params, none), Error);
}
