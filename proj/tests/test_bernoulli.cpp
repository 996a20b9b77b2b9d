#include <doctest.h>

#include <cstdint>
#include <utility>
#include <vector>

#include "percolab/bernoulli.hpp"
#include "percolab/connectivity.hpp"
#include "percolab/lattice.hpp"
#include "percolab/oracle.hpp"

using namespace percolab;

namespace {

oracle::EventFn event_on(const Lattice& box, bool (*fn)(const Lattice&, const std::uint8_t*, Scratch&)) {
  return [&box, fn](const std::vector<std::uint8_t>& open) {
    Scratch ws;
    return fn(box, open.data(), ws);
  };
}

bool crossing_wrap(const Lattice& box, const std::uint8_t* open, Scratch& ws) {
  return crossing_event(box, open, ws);
}

}  // namespace

TEST_CASE("one-arm radius zero is trivially true") {
  Lattice box = make_cube(2, 1);
  std::vector<std::uint8_t> closed(static_cast<std::size_t>(box.edge_count()), 0);
  Scratch ws;
  CHECK(one_arm_event(box, closed.data(), 0, ws));
  CHECK_FALSE(one_arm_event(box, closed.data(), 1, ws));
}

TEST_CASE("one-arm probability on the 12-edge box is 15/16 at p = 1/2") {
  Lattice box = make_cube(2, 1);
  auto event = [&](const std::vector<std::uint8_t>& open) {
    Scratch ws;
    return one_arm_event(box, open.data(), 1, ws);
  };
  const double v = oracle::enumerate_probability(static_cast<int>(box.edge_count()), 0.5, event);
  CHECK(v == doctest::Approx(15.0 / 16.0).epsilon(1e-14));
}

TEST_CASE("self-dual rectangles cross with probability exactly 1/2") {
  // (n+1) columns by n rows, crossing along axis 0.
  for (int n : {1, 2}) {
    Lattice rect = make_rect(n, n);
    const double v = oracle::enumerate_probability(static_cast<int>(rect.edge_count()), 0.5,
                                                   event_on(rect, &crossing_wrap));
    CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
  }
}

TEST_CASE("left-right open crossing and top-bottom closed-dual crossing partition everything") {
  for (auto [a, b] : {std::pair{2, 2}, std::pair{3, 2}, std::pair{1, 3}}) {
    Lattice rect = make_rect(a, b);
    const int m = static_cast<int>(rect.edge_count());
    REQUIRE(m <= 12);
    Scratch ws;
    std::vector<std::uint8_t> open(static_cast<std::size_t>(m));
    for (std::uint32_t bits = 0; bits < (1u << m); ++bits) {
      for (int e = 0; e < m; ++e) open[static_cast<std::size_t>(e)] = (bits >> e) & 1u;
      const bool lr = crossing_event(rect, open.data(), ws);
      const bool tb = rect_dual_tb_crossing(rect, open.data(), ws);
      CHECK(lr != tb);
    }
  }
}

TEST_CASE("two-arm at radius 1: frozen exact values") {
  Lattice box = make_cube(2, 1);
  auto event = [&](const std::vector<std::uint8_t>& open) {
    Scratch ws;
    return two_arm_event(box, open.data(), 1, ws);
  };
  const int m = static_cast<int>(box.edge_count());
  CHECK(oracle::enumerate_probability(m, 0.5, event) ==
        doctest::Approx(3825.0 / 4096.0).epsilon(1e-13));
  CHECK(oracle::enumerate_probability(m, 0.3, event) ==
        doctest::Approx(0.759850142961).epsilon(1e-11));
  // all edges open: primal arm but no dual arm
  std::vector<std::uint8_t> allopen(static_cast<std::size_t>(m), 1);
  Scratch ws;
  CHECK_FALSE(two_arm_event(box, allopen.data(), 1, ws));
  // all closed: dual arm but no primal arm
  std::vector<std::uint8_t> closed(static_cast<std::size_t>(m), 0);
  CHECK(dual_arm_event(box, closed.data(), 1, ws));
  CHECK_FALSE(two_arm_event(box, closed.data(), 1, ws));
}

TEST_CASE("two-arm is dominated by one-arm") {
  Lattice box = make_cube(2, 1);
  Scratch ws;
  Rng rng(314, 0);
  std::vector<std::uint8_t> open;
  for (int trial = 0; trial < 2000; ++trial) {
    sample_bond_config(box, 0.5, rng, open);
    if (two_arm_event(box, open.data(), 1, ws)) CHECK(one_arm_event(box, open.data(), 1, ws));
  }
}

TEST_CASE("cluster size and two-point connectivity agree with hand cases") {
  Lattice box = make_cube(2, 1);
  std::vector<std::uint8_t> open(static_cast<std::size_t>(box.edge_count()), 0);
  Scratch ws;
  CHECK(cluster_size_within(box, open.data(), 1, ws) == 1);
  // open the edge (0,0)-(1,0): cluster size 2, the target (1,0) becomes reachable
  Coords origin{};
  std::int64_t e = box.edge_id(box.vertex_index(origin), 0);
  open[static_cast<std::size_t>(e)] = 1;
  CHECK(cluster_size_within(box, open.data(), 1, ws) == 2);
  Coords right{};
  right[0] = 1;
  CHECK(two_point_event(box, open.data(), box.vertex_index(right), ws));
  Coords up{};
  up[1] = 1;
  CHECK_FALSE(two_point_event(box, open.data(), box.vertex_index(up), ws));
}

TEST_CASE("threshold coupling is monotone edgewise") {
  Lattice box = make_cube(2, 2);
  Rng rng(77, 1);
  std::vector<double> u;
  sample_edge_uniforms(box, rng, u);
  std::vector<std::uint8_t> lo, hi;
  threshold_config(u, 0.3, lo);
  threshold_config(u, 0.6, hi);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(lo[i] <= hi[i]);
}

TEST_CASE("union-find labels match BFS clusters") {
  Lattice box = make_cube(2, 3);
  Rng rng(123, 9);
  std::vector<std::uint8_t> open;
  Scratch ws;
  for (int trial = 0; trial < 50; ++trial) {
    sample_bond_config(box, 0.5, rng, open);
    UnionFind uf = label_clusters(box, open.data());
    std::vector<std::int64_t> src{origin_index(box)};
    bfs_cluster(box, open.data(), src, ws);
    for (std::int64_t v = 0; v < box.vertex_count(); ++v) {
      CHECK(ws.seen(v) == uf.same(origin_index(box), v));
    }
  }
}
