#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "percolab/bernoulli.hpp"
#include "percolab/connectivity.hpp"
#include "percolab/error.hpp"
#include "percolab/lattice.hpp"
#include "percolab/rng.hpp"

namespace percolab {

// One reveal: which unit (edge or noise box) was examined and what was seen.
struct RevealStep {
  std::int64_t unit;
  std::int8_t state;  // edges: 1 open / 0 closed; boxes: -1 (contents are a vector)
};

struct Trace {
  std::vector<RevealStep> steps;
  std::vector<std::int64_t> aux;  // auxiliary randomness (e.g. a random line index)
  bool output = false;
};

struct NullSink {
  void on_reveal(std::int64_t, std::int8_t) {}
  void on_aux(std::int64_t) {}
};

struct TraceSink {
  Trace* trace;
  void on_reveal(std::int64_t unit, std::int8_t state) { trace->steps.push_back({unit, state}); }
  void on_aux(std::int64_t value) { trace->aux.push_back(value); }
};

struct CountSink {
  std::uint64_t* counts;
  void on_reveal(std::int64_t unit, std::int8_t) { ++counts[unit]; }
  void on_aux(std::int64_t) {}
};

// Edge state providers. Each algorithm queries any edge at most once, so the
// lazy provider can draw fresh Bernoulli variables on demand; the replayed
// sequence depends only on the (deterministic) reveal order.
struct ConfigEdgeSource {
  const std::uint8_t* open;
  bool query(std::int64_t e) { return open[e] != 0; }
};

struct LazyEdgeSource {
  double p;
  Rng* rng;
  bool query(std::int64_t) { return rng->next_bernoulli(p); }
};

// Scratch for the exploration algorithms; one per thread, reused between
// replicas through the epoch trick.
struct ExploreScratch {
  std::vector<std::uint32_t> vert_stamp;   // primal certification / membership
  std::vector<std::uint32_t> edge_stamp;   // revealed
  std::vector<std::uint32_t> push_stamp;   // queued in the reveal heap
  std::vector<std::uint32_t> dual_stamp;   // dual certification
  std::vector<std::int8_t> edge_state;     // valid where revealed
  std::vector<std::int64_t> heap;          // min-heap of candidate edges
  std::vector<std::int64_t> vert_queue;
  std::vector<std::int64_t> dual_queue;
  std::uint32_t epoch = 0;

  void begin(std::size_t nv, std::size_t ne, std::size_t nd) {
    if (vert_stamp.size() < nv) vert_stamp.assign(nv, 0);
    if (edge_stamp.size() < ne) edge_stamp.assign(ne, 0);
    if (push_stamp.size() < ne) push_stamp.assign(ne, 0);
    if (dual_stamp.size() < nd) dual_stamp.assign(nd, 0);
    if (edge_state.size() < ne) edge_state.assign(ne, -1);
    ++epoch;
    if (epoch == 0) {
      std::fill(vert_stamp.begin(), vert_stamp.end(), 0);
      std::fill(edge_stamp.begin(), edge_stamp.end(), 0);
      std::fill(push_stamp.begin(), push_stamp.end(), 0);
      std::fill(dual_stamp.begin(), dual_stamp.end(), 0);
      epoch = 1;
    }
    heap.clear();
    vert_queue.clear();
    dual_queue.clear();
  }

  bool mark(std::vector<std::uint32_t>& stamp, std::int64_t i) {
    if (stamp[static_cast<std::size_t>(i)] == epoch) return false;
    stamp[static_cast<std::size_t>(i)] = epoch;
    return true;
  }
  bool marked(const std::vector<std::uint32_t>& stamp, std::int64_t i) const {
    return stamp[static_cast<std::size_t>(i)] == epoch;
  }

  void heap_push(std::int64_t e) {
    if (!mark(push_stamp, e)) return;
    heap.push_back(e);
    std::push_heap(heap.begin(), heap.end(), std::greater<std::int64_t>());
  }
  std::int64_t heap_pop() {
    std::pop_heap(heap.begin(), heap.end(), std::greater<std::int64_t>());
    std::int64_t e = heap.back();
    heap.pop_back();
    return e;
  }
};

namespace detail {

template <class Fn>
void for_incident_edges(const Lattice& box, std::int64_t v, Fn&& fn) {
  Coords c = box.coords(v);
  std::uint8_t up = box.up_mask(v);
  for (int a = 0; a < box.dim(); ++a) {
    if (up & (1u << a)) fn(box.edge_id(v, a), v + box.axis_stride(a));
    if (c[a] > box.lo()[a]) {
      std::int64_t u = v - box.axis_stride(a);
      fn(box.edge_id(u, a), u);
    }
  }
}

}  // namespace detail

// Cluster growth from the origin inside Λ_R. Reveals, in increasing edge-id
// order among candidates, every unexamined edge touching the known cluster;
// open edges extend the cluster. The revealed set is exactly the set of edges
// with an endpoint joined to the origin, so the expected number of reveals is
// bounded by twice the expected cluster volume. Output: cluster meets the
// sup-norm-R shell. Determines A_1(R).
template <class Src, class Sink>
bool run_origin_cluster(const Lattice& box, int R, Src&& src, Sink&& sink, ExploreScratch& ws) {
  require_that(R >= 1, ErrorKind::invalid_query, "origin cluster growth needs R >= 1");
  ws.begin(static_cast<std::size_t>(box.vertex_count()), static_cast<std::size_t>(box.edge_count()), 0);
  bool reached = false;
  std::int64_t o = origin_index(box);
  ws.mark(ws.vert_stamp, o);
  detail::for_incident_edges(box, o, [&](std::int64_t e, std::int64_t) { ws.heap_push(e); });
  while (!ws.heap.empty()) {
    std::int64_t e = ws.heap_pop();
    ws.mark(ws.edge_stamp, e);
    bool open = src.query(e);
    sink.on_reveal(e, open ? 1 : 0);
    if (!open) continue;
    for (std::int64_t w : {box.edge_tail(e), box.edge_head(e)}) {
      if (ws.mark(ws.vert_stamp, w)) {
        if (box.sup_norm(w) == R) reached = true;
        detail::for_incident_edges(box, w, [&](std::int64_t f, std::int64_t) {
          if (!ws.marked(ws.edge_stamp, f)) ws.heap_push(f);
        });
      }
    }
  }
  return reached;
}

// Sweep of B_k(R) from the left face: grows the set of vertices joined to the
// left hyperplane, revealing candidate edges in increasing id order. Output:
// the right face is reached. Determines Cross_k(R); any revealed edge has an
// endpoint joined to the left face.
template <class Src, class Sink>
bool run_hyperplane_sweep(const Lattice& box, Src&& src, Sink&& sink, ExploreScratch& ws) {
  ws.begin(static_cast<std::size_t>(box.vertex_count()), static_cast<std::size_t>(box.edge_count()), 0);
  bool reached = false;
  const int left = box.lo()[0];
  const int right = box.hi()[0];
  require_that(left < right, ErrorKind::invalid_geometry, "box has no extent along axis 0");
  for (std::int64_t v = 0; v < box.vertex_count(); ++v) {
    if (box.coords(v)[0] != left) continue;
    ws.mark(ws.vert_stamp, v);
    detail::for_incident_edges(box, v, [&](std::int64_t e, std::int64_t) { ws.heap_push(e); });
  }
  while (!ws.heap.empty()) {
    std::int64_t e = ws.heap_pop();
    ws.mark(ws.edge_stamp, e);
    bool open = src.query(e);
    sink.on_reveal(e, open ? 1 : 0);
    if (!open) continue;
    for (std::int64_t w : {box.edge_tail(e), box.edge_head(e)}) {
      if (ws.mark(ws.vert_stamp, w)) {
        if (box.coords(w)[0] == right) reached = true;
        detail::for_incident_edges(box, w, [&](std::int64_t f, std::int64_t) {
          if (!ws.marked(ws.edge_stamp, f)) ws.heap_push(f);
        });
      }
    }
  }
  return reached;
}

// Interface exploration of B_k(R), d = 2. Seeds: the left column L and the
// bottom row B. A vertex is primally certified when a revealed-open path
// joins it to L ∪ B; a dual vertex is dually certified when a revealed-closed
// dual path joins it to (L ∪ B)*. An edge is revealed once some endpoint is
// primally certified and carries a dually certified dual neighbour, i.e. the
// edge sits on an interface met by the seed lines. Any revealed edge
// therefore has an endpoint with both a primal and a dual arm to the lines.
// Output: the revealed data alone decides the left-right crossing (an open
// crossing among revealed edges, or else a top-bottom blocking path of
// revealed-closed dual bonds).
template <class Src, class Sink>
bool run_interface(const Lattice& box, Src&& src, Sink&& sink, ExploreScratch& ws, Scratch& bfs_ws) {
  require_that(box.dim() == 2, ErrorKind::unsupported_dimension, "interface algorithm needs d = 2");
  DualGrid dual(box);
  ws.begin(static_cast<std::size_t>(box.vertex_count()), static_cast<std::size_t>(box.edge_count()),
           static_cast<std::size_t>(dual.vertex_count()));

  // Dual bond endpoints crossed by edge e, as dual indices.
  auto dual_ends = [&](std::int64_t e, std::int64_t& d1, std::int64_t& d2) {
    Coords t = box.coords(box.edge_tail(e));
    if (box.edge_axis(e) == 0) {  // horizontal edge: vertical dual bond
      d1 = dual.index(t[0], t[1] - 1);
      d2 = dual.index(t[0], t[1]);
    } else {  // vertical edge: horizontal dual bond
      d1 = dual.index(t[0] - 1, t[1]);
      d2 = dual.index(t[0], t[1]);
    }
  };

  auto dual_near = [&](std::int64_t v) {
    for (std::int64_t dv : dual.star(box.coords(v))) {
      if (ws.marked(ws.dual_stamp, dv)) return true;
    }
    return false;
  };

  auto consider_edges_of = [&](std::int64_t v) {
    if (!ws.marked(ws.vert_stamp, v) || !dual_near(v)) return;
    detail::for_incident_edges(box, v, [&](std::int64_t e, std::int64_t) {
      if (!ws.marked(ws.edge_stamp, e)) ws.heap_push(e);
    });
  };

  auto certify_vertex = [&](std::int64_t v) {
    if (ws.mark(ws.vert_stamp, v)) ws.vert_queue.push_back(v);
  };
  auto certify_dual = [&](std::int64_t dv) {
    if (ws.mark(ws.dual_stamp, dv)) ws.dual_queue.push_back(dv);
  };

  // Seeds: left column and bottom row, plus their dual stars.
  for (std::int64_t v = 0; v < box.vertex_count(); ++v) {
    Coords c = box.coords(v);
    if (c[0] == box.lo()[0] || c[1] == box.lo()[1]) {
      certify_vertex(v);
      for (std::int64_t dv : dual.star(c)) certify_dual(dv);
    }
  }

  auto drain_queues = [&]() {
    std::size_t vh = 0;
    std::size_t dh = 0;
    while (vh < ws.vert_queue.size() || dh < ws.dual_queue.size()) {
      while (vh < ws.vert_queue.size()) {
        std::int64_t v = ws.vert_queue[vh++];
        // propagate along already revealed open edges
        detail::for_incident_edges(box, v, [&](std::int64_t e, std::int64_t w) {
          if (ws.marked(ws.edge_stamp, e) && ws.edge_state[static_cast<std::size_t>(e)] == 1) certify_vertex(w);
        });
        consider_edges_of(v);
      }
      while (dh < ws.dual_queue.size()) {
        std::int64_t dv = ws.dual_queue[dh++];
        int i = dual.i_of(dv);
        int j = dual.j_of(dv);
        // propagate along already revealed closed dual bonds
        const int di[4] = {1, -1, 0, 0};
        const int dj[4] = {0, 0, 1, -1};
        for (int dir = 0; dir < 4; ++dir) {
          int ni = i + di[dir];
          int nj = j + dj[dir];
          if (ni < dual.lo(0) || ni > dual.hi(0) || nj < dual.lo(1) || nj > dual.hi(1)) continue;
          std::int64_t e = (dir == 0)   ? dual.crossed_primal_edge(i, j, 0)
                           : (dir == 1) ? dual.crossed_primal_edge(ni, nj, 0)
                           : (dir == 2) ? dual.crossed_primal_edge(i, j, 1)
                                        : dual.crossed_primal_edge(ni, nj, 1);
          if (e < 0 || !ws.marked(ws.edge_stamp, e)) continue;
          if (ws.edge_state[static_cast<std::size_t>(e)] == 0) certify_dual(dual.index(ni, nj));
        }
        // vertices around dv may have become eligible
        Coords c{};
        for (int dx = 0; dx <= 1; ++dx) {
          for (int dy = 0; dy <= 1; ++dy) {
            c[0] = i + dx;
            c[1] = j + dy;
            if (box.contains(c)) consider_edges_of(box.vertex_index(c));
          }
        }
      }
    }
    ws.vert_queue.clear();
    ws.dual_queue.clear();
  };

  drain_queues();
  while (!ws.heap.empty()) {
    std::int64_t e = ws.heap_pop();
    ws.mark(ws.edge_stamp, e);
    bool open = src.query(e);
    ws.edge_state[static_cast<std::size_t>(e)] = open ? 1 : 0;
    sink.on_reveal(e, open ? 1 : 0);
    if (open) {
      std::int64_t u = box.edge_tail(e);
      std::int64_t w = box.edge_head(e);
      if (ws.marked(ws.vert_stamp, u)) certify_vertex(w);
      if (ws.marked(ws.vert_stamp, w)) certify_vertex(u);
    } else {
      std::int64_t d1, d2;
      dual_ends(e, d1, d2);
      if (ws.marked(ws.dual_stamp, d1)) certify_dual(d2);
      if (ws.marked(ws.dual_stamp, d2)) certify_dual(d1);
    }
    drain_queues();
  }

  // Decide the crossing from revealed edges only.
  std::vector<std::int64_t> left;
  for (std::int64_t v = 0; v < box.vertex_count(); ++v) {
    if (box.coords(v)[0] == box.lo()[0]) left.push_back(v);
  }
  const int right = box.hi()[0];
  auto revealed_open = [&](std::int64_t e) {
    return ws.marked(ws.edge_stamp, e) && ws.edge_state[static_cast<std::size_t>(e)] == 1;
  };
  {
    bfs_ws.begin(static_cast<std::size_t>(box.vertex_count()));
    std::size_t head = 0;
    bool found = false;
    for (std::int64_t s : left) {
      bfs_ws.visit(s);
      bfs_ws.queue.push_back(s);
    }
    while (head < bfs_ws.queue.size() && !found) {
      std::int64_t v = bfs_ws.queue[head++];
      if (box.coords(v)[0] == right) {
        found = true;
        break;
      }
      detail::for_incident_edges(box, v, [&](std::int64_t e, std::int64_t w) {
        if (revealed_open(e) && bfs_ws.visit(w)) bfs_ws.queue.push_back(w);
      });
    }
    if (found) return true;
  }
  // No revealed open crossing: a revealed-closed dual blocking path must
  // exist; verify rather than assume.
  {
    bfs_ws.begin(static_cast<std::size_t>(dual.vertex_count()));
    std::size_t head = 0;
    const int jtop = box.hi()[1];
    const int jbot = box.lo()[1] - 1;
    for (int i = dual.lo(0); i <= dual.hi(0); ++i) {
      std::int64_t s = dual.index(i, jtop);
      bfs_ws.visit(s);
      bfs_ws.queue.push_back(s);
    }
    auto revealed_closed_step = [&](std::int64_t e) {
      return e >= 0 && ws.marked(ws.edge_stamp, e) && ws.edge_state[static_cast<std::size_t>(e)] == 0;
    };
    while (head < bfs_ws.queue.size()) {
      std::int64_t v = bfs_ws.queue[head++];
      int i = dual.i_of(v);
      int j = dual.j_of(v);
      if (j == jbot) return false;
      const int di[4] = {1, -1, 0, 0};
      const int dj[4] = {0, 0, 1, -1};
      for (int dir = 0; dir < 4; ++dir) {
        int ni = i + di[dir];
        int nj = j + dj[dir];
        if (ni < dual.lo(0) || ni > dual.hi(0) || nj < dual.lo(1) || nj > dual.hi(1)) continue;
        std::int64_t e = (dir == 0)   ? dual.crossed_primal_edge(i, j, 0)
                         : (dir == 1) ? dual.crossed_primal_edge(ni, nj, 0)
                         : (dir == 2) ? dual.crossed_primal_edge(i, j, 1)
                                      : dual.crossed_primal_edge(ni, nj, 1);
        if (!revealed_closed_step(e)) continue;
        std::int64_t w = dual.index(ni, nj);
        if (bfs_ws.visit(w)) bfs_ws.queue.push_back(w);
      }
    }
  }
  fail(ErrorKind::internal, "interface exploration ended without a crossing certificate");
}

// Per-unit reveal frequencies over n independent runs.
struct RevealmentTable {
  std::vector<std::uint64_t> counts;
  std::uint64_t runs = 0;
  std::uint64_t output_count = 0;

  double rev(std::int64_t unit) const {
    return runs ? static_cast<double>(counts[static_cast<std::size_t>(unit)]) / static_cast<double>(runs) : 0.0;
  }
  double rev_se(std::int64_t unit) const {
    double r = rev(unit);
    return runs ? std::sqrt(r * (1.0 - r) / static_cast<double>(runs)) : 0.0;
  }
  double sum_rev() const {
    double s = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) s += rev(static_cast<std::int64_t>(i));
    return s;
  }
  template <class Pred>
  double max_rev(Pred&& pred) const {
    double m = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (pred(static_cast<std::int64_t>(i))) m = std::max(m, rev(static_cast<std::int64_t>(i)));
    }
    return m;
  }
  double output_rate() const { return runs ? static_cast<double>(output_count) / static_cast<double>(runs) : 0.0; }
};

}  // namespace percolab
