#pragma once

#include <cstdint>
#include <vector>

#include "percolab/connectivity.hpp"
#include "percolab/lattice.hpp"
#include "percolab/rng.hpp"

namespace percolab {

// Edges are sampled in edge-index order, so a configuration is a pure
// function of (box, p, rng stream).
inline void sample_bond_config(const Lattice& box, double p, Rng& rng, std::vector<std::uint8_t>& open) {
  open.resize(static_cast<std::size_t>(box.edge_count()));
  for (auto& bit : open) bit = rng.next_bernoulli(p) ? 1 : 0;
}

// Shared-uniform sampling for monotone coupling: thresholding the same draws
// at p1 < p2 gives configurations ordered edgewise.
inline void sample_edge_uniforms(const Lattice& box, Rng& rng, std::vector<double>& u) {
  u.resize(static_cast<std::size_t>(box.edge_count()));
  for (auto& x : u) x = rng.next_unit();
}

inline void threshold_config(const std::vector<double>& u, double p, std::vector<std::uint8_t>& open) {
  open.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) open[i] = (u[i] < p) ? 1 : 0;
}

inline std::vector<std::int64_t> boundary_shell(const Lattice& box, int R) {
  std::vector<std::int64_t> shell;
  for (std::int64_t v = 0; v < box.vertex_count(); ++v) {
    if (box.sup_norm(v) == R) shell.push_back(v);
  }
  return shell;
}

// A_1(R): the origin reaches the sup-norm-R shell inside Λ_R. An empty path
// counts, so R = 0 is trivially true.
inline bool one_arm_event(const Lattice& box, const std::uint8_t* open, int R, Scratch& ws) {
  if (R == 0) return true;
  std::vector<std::int64_t> src{origin_index(box)};
  return bfs_connected(box, open, src, [&](std::int64_t v) { return box.sup_norm(v) == R; }, ws);
}

// A_1(r, R): some vertex of Λ_r reaches the sup-norm-R shell. r = R counts
// as trivially true.
inline bool arm_event(const Lattice& box, const std::uint8_t* open, int r, int R, Scratch& ws) {
  require_that(0 <= r && r <= R, ErrorKind::invalid_query, "arm event needs 0 <= r <= R");
  if (r == R) return true;
  std::vector<std::int64_t> src;
  for (std::int64_t v = 0; v < box.vertex_count(); ++v) {
    if (box.sup_norm(v) <= r) src.push_back(v);
  }
  return bfs_connected(box, open, src, [&](std::int64_t v) { return box.sup_norm(v) == R; }, ws);
}

// Left-to-right open crossing along axis 0.
inline bool crossing_event(const Lattice& box, const std::uint8_t* open, Scratch& ws) {
  std::vector<std::int64_t> left;
  for (std::int64_t v = 0; v < box.vertex_count(); ++v) {
    if (box.coords(v)[0] == box.lo()[0]) left.push_back(v);
  }
  const int right = box.hi()[0];
  return bfs_connected(box, open, left, [&](std::int64_t v) { return box.coords(v)[0] == right; }, ws);
}

// |C(0) ∩ Λ_R| where C(0) is the open cluster of the origin inside the box.
inline std::int64_t cluster_size_within(const Lattice& box, const std::uint8_t* open, int R, Scratch& ws) {
  std::vector<std::int64_t> src{origin_index(box)};
  bfs_cluster(box, open, src, ws);
  std::int64_t count = 0;
  for (std::int64_t v : ws.queue) {
    if (box.sup_norm(v) <= R) ++count;
  }
  return count;
}

inline bool two_point_event(const Lattice& box, const std::uint8_t* open, std::int64_t target, Scratch& ws) {
  std::vector<std::int64_t> src{origin_index(box)};
  return bfs_connected(box, open, src, [&](std::int64_t v) { return v == target; }, ws);
}

// Planar dual of a d = 2 box. Dual vertex (i, j) stands for the point
// (i + 1/2, j + 1/2); the grid extends one layer beyond the primal box on the
// low side of each axis. A dual bond is open iff the primal edge it crosses
// lies inside the box and is closed.
class DualGrid {
 public:
  explicit DualGrid(const Lattice& box) : box_(&box) {
    require_that(box.dim() == 2, ErrorKind::unsupported_dimension, "dual grid needs d = 2");
    lo_[0] = box.lo()[0] - 1;
    lo_[1] = box.lo()[1] - 1;
    n_[0] = box.hi()[0] - lo_[0] + 1;
    n_[1] = box.hi()[1] - lo_[1] + 1;
  }

  std::int64_t vertex_count() const { return static_cast<std::int64_t>(n_[0]) * n_[1]; }
  std::int64_t index(int i, int j) const {
    return static_cast<std::int64_t>(i - lo_[0]) * n_[1] + (j - lo_[1]);
  }
  int i_of(std::int64_t id) const { return lo_[0] + static_cast<int>(id / n_[1]); }
  int j_of(std::int64_t id) const { return lo_[1] + static_cast<int>(id % n_[1]); }
  int lo(int axis) const { return lo_[axis]; }
  int hi(int axis) const { return lo_[axis] + n_[axis] - 1; }

  // Primal edge crossed by the dual bond from (i, j) one step along axis;
  // returns -1 when that primal edge is not inside the box.
  std::int64_t crossed_primal_edge(int i, int j, int axis) const {
    Coords tail{};
    int a;
    if (axis == 0) {  // (i+1/2, j+1/2) -- (i+3/2, j+1/2) crosses vertical edge at x = i+1
      tail[0] = i + 1;
      tail[1] = j;
      a = 1;
    } else {  // (i+1/2, j+1/2) -- (i+1/2, j+3/2) crosses horizontal edge at y = j+1
      tail[0] = i;
      tail[1] = j + 1;
      a = 0;
    }
    Coords head = tail;
    head[a] += 1;
    if (!box_->contains(tail) || !box_->contains(head)) return -1;
    return box_->edge_id(box_->vertex_index(tail), a);
  }

  bool dual_open(const std::uint8_t* open, int i, int j, int axis) const {
    std::int64_t e = crossed_primal_edge(i, j, axis);
    return e >= 0 && !open[e];
  }

  // The four dual neighbours of a primal vertex.
  std::array<std::int64_t, 4> star(const Coords& c) const {
    return {index(c[0] - 1, c[1] - 1), index(c[0] - 1, c[1]), index(c[0], c[1] - 1), index(c[0], c[1])};
  }

 private:
  const Lattice* box_;
  int lo_[2];
  int n_[2];
};

// BFS over open dual bonds from dual sources until target holds.
template <class TargetPred>
bool dual_bfs_connected(const DualGrid& dual, const std::uint8_t* open, const std::vector<std::int64_t>& sources,
                        TargetPred&& target, Scratch& ws) {
  ws.begin(static_cast<std::size_t>(dual.vertex_count()));
  for (std::int64_t s : sources) {
    if (ws.visit(s) && target(s)) return true;
  }
  std::size_t head = 0;
  ws.queue.assign(sources.begin(), sources.end());
  while (head < ws.queue.size()) {
    std::int64_t v = ws.queue[head++];
    int i = dual.i_of(v);
    int j = dual.j_of(v);
    const int di[4] = {1, -1, 0, 0};
    const int dj[4] = {0, 0, 1, -1};
    for (int dir = 0; dir < 4; ++dir) {
      int ni = i + di[dir];
      int nj = j + dj[dir];
      if (ni < dual.lo(0) || ni > dual.hi(0) || nj < dual.lo(1) || nj > dual.hi(1)) continue;
      bool step_open = (dir == 0)   ? dual.dual_open(open, i, j, 0)
                       : (dir == 1) ? dual.dual_open(open, ni, nj, 0)
                       : (dir == 2) ? dual.dual_open(open, i, j, 1)
                                    : dual.dual_open(open, ni, nj, 1);
      if (!step_open) continue;
      std::int64_t w = dual.index(ni, nj);
      if (ws.visit(w)) {
        if (target(w)) return true;
        ws.queue.push_back(w);
      }
    }
  }
  return false;
}

// Dual arm for the polychromatic two-arm event: a path of open dual bonds
// from the four dual neighbours of the origin to the dual ring just outside
// ∂Λ_R (dual points of sup norm R + 1/2). With every primal edge open there
// are no open dual bonds at all, so the event fails.
inline bool dual_arm_event(const Lattice& box, const std::uint8_t* open, int R, Scratch& ws) {
  DualGrid dual(box);
  Coords zero{};
  auto s = dual.star(zero);
  std::vector<std::int64_t> sources(s.begin(), s.end());
  auto on_ring = [&](std::int64_t v) {
    int i = dual.i_of(v);
    int j = dual.j_of(v);
    return i == -R - 1 || i == R || j == -R - 1 || j == R;
  };
  if (R < 1) fail(ErrorKind::invalid_query, "two-arm radius must be >= 1");
  return dual_bfs_connected(dual, open, sources, on_ring, ws);
}

// A_2(R) in d = 2: both a primal arm 0 -> ∂Λ_R and a dual arm 0* -> outside.
inline bool two_arm_event(const Lattice& box, const std::uint8_t* open, int R, Scratch& ws) {
  require_that(box.dim() == 2, ErrorKind::unsupported_dimension, "two-arm event needs d = 2");
  return one_arm_event(box, open, R, ws) && dual_arm_event(box, open, R, ws);
}

// Top-to-bottom crossing by open dual bonds of a rectangle lattice; the
// planar complement of the left-right primal crossing.
inline bool rect_dual_tb_crossing(const Lattice& rect, const std::uint8_t* open, Scratch& ws) {
  DualGrid dual(rect);
  std::vector<std::int64_t> top;
  const int jtop = rect.hi()[1];  // dual row at y = top + 1/2
  for (int i = dual.lo(0); i <= dual.hi(0); ++i) top.push_back(dual.index(i, jtop));
  const int jbot = rect.lo()[1] - 1;  // dual row at y = bottom - 1/2
  return dual_bfs_connected(dual, open, top, [&](std::int64_t v) { return dual.j_of(v) == jbot; }, ws);
}

}  // namespace percolab
