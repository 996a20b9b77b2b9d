#include <doctest.h>

#include <cmath>
#include <vector>

#include "percolab/estimate.hpp"
#include "percolab/parallel.hpp"
#include "percolab/rng.hpp"
#include "percolab/summation.hpp"

using namespace percolab;

TEST_CASE("rng streams replay and do not collide") {
  Rng a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  std::vector<std::uint64_t> seq;
  for (int i = 0; i < 64; ++i) seq.push_back(a.next_u64());
  for (int i = 0; i < 64; ++i) CHECK(seq[static_cast<std::size_t>(i)] == b.next_u64());
  int same_c = 0, same_d = 0;
  Rng a2(42, 7);
  for (int i = 0; i < 64; ++i) {
    std::uint64_t x = a2.next_u64();
    if (x == c.next_u64()) ++same_c;
    if (x == d.next_u64()) ++same_d;
  }
  CHECK(same_c == 0);
  CHECK(same_d == 0);
}

TEST_CASE("next_unit stays inside the open interval") {
  Rng r(1, 0);
  for (int i = 0; i < 100000; ++i) {
    double u = r.next_unit();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("next_index is within range and roughly uniform") {
  Rng r(5, 3);
  std::vector<int> hits(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    auto k = r.next_index(7);
    REQUIRE(k < 7);
    ++hits[static_cast<std::size_t>(k)];
  }
  for (int h : hits) {
    CHECK(h > 9000);  // expected 10000, > 9σ window
    CHECK(h < 11000);
  }
}

TEST_CASE("next_normal has standard moments") {
  Rng r(11, 2);
  NeumaierSum s1, s2;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = r.next_normal();
    s1.add(x);
    s2.add(x * x);
  }
  CHECK(std::abs(s1.value() / n) < 0.01);
  CHECK(std::abs(s2.value() / n - 1.0) < 0.02);
}

TEST_CASE("compensated sum keeps small terms") {
  NeumaierSum s;
  s.add(1.0);
  for (int i = 0; i < 10; ++i) s.add(1e-17);
  CHECK(s.value() == doctest::Approx(1.0 + 1e-16).epsilon(1e-15));
}

TEST_CASE("indicator estimates are worker-count invariant") {
  auto coin = [](std::uint64_t, Rng& rng) { return rng.next_bernoulli(0.37); };
  Estimate e1 = estimate_indicator(20000, 99, 1, coin);
  Estimate e4 = estimate_indicator(20000, 99, 4, coin);
  CHECK(e1.mean == e4.mean);
  CHECK(e1.se == e4.se);
  CHECK(std::abs(e1.mean - 0.37) < 4.0 * e1.se + 1e-12);
}

TEST_CASE("real mean reduction is replica-ordered, so worker invariant") {
  auto stat = [](std::uint64_t, Rng& rng) { return rng.next_normal() * 1e-8 + rng.next_unit(); };
  Estimate e1 = estimate_real_mean(5000, 7, 1, stat);
  Estimate e4 = estimate_real_mean(5000, 7, 4, stat);
  CHECK(e1.mean == e4.mean);
  CHECK(e1.se == e4.se);
}
