#include <doctest.h>

#include <set>
#include <vector>

#include "percolab/error.hpp"
#include "percolab/lattice.hpp"

using namespace percolab;

TEST_CASE("cube counts match closed forms") {
  Lattice l1 = make_cube(2, 1);
  CHECK(l1.vertex_count() == 9);
  CHECK(l1.edge_count() == 12);
  Lattice l2 = make_cube(2, 2);
  CHECK(l2.vertex_count() == 25);
  CHECK(l2.edge_count() == 40);  // 2 * 4 * 5
  Lattice l3 = make_cube(3, 1);
  CHECK(l3.vertex_count() == 27);
  CHECK(l3.edge_count() == 54);  // 3 * 2 * 9
}

TEST_CASE("vertex indexing is lexicographic with axis 0 slowest") {
  Lattice box = make_cube(2, 1);
  std::int64_t expect = 0;
  for (int x = -1; x <= 1; ++x) {
    for (int y = -1; y <= 1; ++y) {
      Coords c{};
      c[0] = x;
      c[1] = y;
      CHECK(box.vertex_index(c) == expect);
      Coords back = box.coords(expect);
      CHECK(back[0] == x);
      CHECK(back[1] == y);
      ++expect;
    }
  }
}

TEST_CASE("edge ids enumerate (tail, axis) lexicographically and uniquely") {
  Lattice box = make_cube(2, 1);
  std::set<std::int64_t> seen;
  std::int64_t previous = -1;
  for (std::int64_t v = 0; v < box.vertex_count(); ++v) {
    Coords c = box.coords(v);
    for (int a = 0; a < 2; ++a) {
      if (c[a] >= 1) continue;  // no up-neighbour
      std::int64_t e = box.edge_id(v, a);
      CHECK(e > previous);
      previous = e;
      CHECK(seen.insert(e).second);
      CHECK(box.edge_tail(e) == v);
      CHECK(box.edge_axis(e) == a);
      CHECK(box.edge_head(e) == v + box.axis_stride(a));
    }
  }
  CHECK(static_cast<std::int64_t>(seen.size()) == box.edge_count());
}

TEST_CASE("rectangle helper builds (a+1) columns and b rows") {
  Lattice r = make_rect(2, 2);
  CHECK(r.lo()[0] == 0);
  CHECK(r.hi()[0] == 2);
  CHECK(r.lo()[1] == 0);
  CHECK(r.hi()[1] == 1);
  CHECK(r.vertex_count() == 6);
  CHECK(r.edge_count() == 7);
  Lattice r11 = make_rect(1, 1);
  CHECK(r11.vertex_count() == 2);
  CHECK(r11.edge_count() == 1);
}

TEST_CASE("aspect rounding is ceil with a float-noise guard") {
  CHECK(rounded_aspect(1.0, 7) == 7);
  CHECK(rounded_aspect(1.5, 3) == 5);   // ceil(4.5)
  CHECK(rounded_aspect(2.0, 4) == 8);
  CHECK(rounded_aspect(1.0 / 3.0, 6) == 2);  // 2.0 up to float noise, not 3
  CHECK(rounded_aspect(0.1, 30) == 3);
  CHECK(rounded_aspect(1.0 / 8.0, 8) == 1);
}

TEST_CASE("box_k geometry") {
  Lattice b = make_box_k(2, 4, 2.0);
  CHECK(b.lo()[0] == -4);
  CHECK(b.hi()[0] == 4);
  CHECK(b.lo()[1] == -8);
  CHECK(b.hi()[1] == 8);
}

TEST_CASE("sup norm and region predicates") {
  Lattice box = make_cube(2, 2);
  Coords c{};
  c[0] = -2;
  c[1] = 1;
  CHECK(box.sup_norm(box.vertex_index(c)) == 2);
  int shell = 0;
  for (std::int64_t v = 0; v < box.vertex_count(); ++v)
    if (box.sup_norm(v) == 2) ++shell;
  CHECK(shell == 16);  // 8R for d=2

  // right-half / top-right-quarter edge predicates need both endpoints inside
  for (std::int64_t e = 0; e < box.edge_count(); ++e) {
    Coords t = box.coords(box.edge_tail(e));
    Coords h = box.coords(box.edge_head(e));
    CHECK(edge_in_right_half(box, e) == (t[0] >= 0 && h[0] >= 0));
    CHECK(edge_in_top_right_quarter(box, e) == (t[0] >= 0 && h[0] >= 0 && t[1] >= 0 && h[1] >= 0));
  }
}

TEST_CASE("invalid geometry is rejected") {
  CHECK_THROWS_AS(make_cube(2, -1), Error);
  CHECK_THROWS_AS(make_rect(0, 1), Error);
  CHECK_THROWS_AS(Lattice(4, Coords{}, Coords{}), Error);
  try {
    make_cube(2, -1);
  } catch (const Error& err) {
    CHECK(exit_code_for(err.kind()) == 2);
  }
}
