#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "stochesp/seqspace.hpp"
#include "test_helpers.hpp"

using namespace stochesp;
using Catch::Approx;

TEST_CASE("make_weights produces the truncated geometric family") {
  const WeightVector w = make_weights(2.0, 3);
  REQUIRE(w.weights.size() == 3);
  CHECK(w.weights[0] == Approx(0.5).margin(1e-15));
  CHECK(w.weights[1] == Approx(0.25).margin(1e-15));
  CHECK(w.weights[2] == Approx(0.125).margin(1e-15));
  CHECK(w.tail_mass == Approx(0.125).margin(1e-15));
  CHECK(w.growth() == 2.0);
}

TEST_CASE("weight sum plus tail mass is one") {
  for (int trial = 0; trial < 40; ++trial) {
    const double gamma = 1.0 + 2.0 * testutil::uniform(11, 0, trial, 0) + 1e-3;
    const int horizon = 1 + static_cast<int>(127 * testutil::uniform(11, 1, trial, 0));
    const WeightVector w = make_weights(gamma, horizon);
    double sum = 0.0;
    for (double x : w.weights) {
      CHECK(x > 0.0);
      sum += x;
    }
    CHECK(sum + w.tail_mass == Approx(1.0).margin(1e-12));
    for (std::size_t k = 1; k < w.weights.size(); ++k)
      CHECK(w.weights[k] < w.weights[k - 1]);
  }
}

TEST_CASE("tail mass matches a direct power evaluation") {
  const WeightVector w = make_weights(1.5, 10);
  double prod = 1.0;
  for (int i = 0; i < 10; ++i) prod /= 1.5;
  CHECK(w.tail_mass == Approx(prod).margin(1e-15));
  CHECK(w.tail_mass == Approx(0.017341).margin(1e-6));
}

TEST_CASE("make_weights rejects out-of-domain parameters") {
  CHECK_THROWS_AS(make_weights(1.0, 4), std::domain_error);
  CHECK_THROWS_AS(make_weights(0.5, 4), std::domain_error);
  CHECK_THROWS_AS(make_weights(2.0, 0), std::domain_error);
}

TEST_CASE("horizon_for_tail returns the smallest sufficient horizon") {
  const int t = horizon_for_tail(1.25, 1e-6);
  CHECK(std::pow(1.25, -t) < 1e-6);
  CHECK(std::pow(1.25, -(t - 1)) >= 1e-6);
}

TEST_CASE("state_seq_dist basics") {
  const WeightVector w = make_weights(2.0, 3);
  PathWindow a(1, 3), b(1, 3);
  CHECK(state_seq_dist(a, b, w) == 0.0);
  for (int k = 0; k < 3; ++k) b.at(k)[0] = 1.0;
  CHECK(state_seq_dist(a, b, w) == Approx(0.875).margin(1e-15));
}

TEST_CASE("state_seq_dist bounded by the largest pointwise gap") {
  const WeightVector w = make_weights(1.7, 12);
  for (int trial = 0; trial < 25; ++trial) {
    const auto a = testutil::random_window(100 + trial, 3, 12);
    const auto b = testutil::random_window(200 + trial, 3, 12);
    double worst = 0.0;
    const BaseMetric m = euclidean();
    for (int k = 0; k < 12; ++k) worst = std::max(worst, m(a.at(k), b.at(k)));
    CHECK(state_seq_dist(a, b, w) <= worst * (1.0 - w.tail_mass) + 1e-12);
  }
}

TEST_CASE("state_seq_dist rejects shape mismatches") {
  const WeightVector w = make_weights(2.0, 3);
  PathWindow a(1, 3), b(1, 4), c(2, 3);
  CHECK_THROWS_AS(state_seq_dist(a, b, w), std::invalid_argument);
  CHECK_THROWS_AS(state_seq_dist(a, c, w), std::invalid_argument);
  PathWindow d(1, 4), e(1, 4);
  CHECK_THROWS_AS(state_seq_dist(d, e, w), std::invalid_argument);
}

TEST_CASE("product_dist additivity and axioms") {
  const WeightVector w = make_weights(1.5, 8);
  const PathPair p1{testutil::random_window(1, 2, 8),
                    testutil::random_window(2, 1, 8)};
  CHECK(product_dist(p1, p1, w) == 0.0);

  PathPair p2 = p1;
  p2.input = testutil::random_window(3, 1, 8);
  CHECK(product_dist(p1, p2, w) ==
        Approx(state_seq_dist(p1.input, p2.input, w, capped_euclidean()))
            .margin(1e-15));

  for (int trial = 0; trial < 100; ++trial) {
    const PathPair x{testutil::random_window(10 + trial, 2, 8),
                     testutil::random_window(310 + trial, 1, 8)};
    const PathPair y{testutil::random_window(410 + trial, 2, 8),
                     testutil::random_window(510 + trial, 1, 8)};
    const PathPair z{testutil::random_window(610 + trial, 2, 8),
                     testutil::random_window(710 + trial, 1, 8)};
    const double dxy = product_dist(x, y, w);
    const double dyx = product_dist(y, x, w);
    const double dyz = product_dist(y, z, w);
    const double dxz = product_dist(x, z, w);
    CHECK(dxy == Approx(dyx).margin(1e-15));
    CHECK(dxz <= dxy + dyz + 1e-12);
  }
}

TEST_CASE("shifted weighted sums obey the growth bound") {
  const WeightVector w = make_weights(1.4, 16);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> a(16);
    for (int k = 0; k < 16; ++k) a[k] = testutil::uniform(900 + trial, 4, k, 0);
    for (int n = 1; n < 16; ++n) {
      double shifted = 0.0, plain = 0.0;
      for (int k = 0; k < 16; ++k) {
        plain += w.weights[k] * a[k];
        if (k + n < 16) shifted += w.weights[k] * a[k + n];
      }
      CHECK(shifted <= std::pow(w.gamma, n) * plain + 1e-12);
    }
  }
}

TEST_CASE("capped metric never exceeds one") {
  const BaseMetric m = capped_euclidean();
  const std::vector<double> a{10.0, -3.0}, b{-5.0, 4.0};
  CHECK(m(a, b) == 1.0);
  const std::vector<double> c{0.1, 0.0}, d{0.0, 0.0};
  CHECK(m(c, d) == Approx(0.1).margin(1e-15));
}

TEST_CASE("diag_scaled metric applies the diagonal weighting") {
  const BaseMetric m = diag_scaled({2.0, 0.5});
  const std::vector<double> a{1.0, 2.0}, b{0.0, 0.0};
  CHECK(m(a, b) == Approx(std::sqrt(4.0 + 1.0)).margin(1e-14));
}
