#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "percolab/lattice.hpp"

namespace percolab {

// Reusable traversal buffers. The epoch trick avoids clearing the visited
// array between replicas; one Scratch per thread.
struct Scratch {
  std::vector<std::uint32_t> stamp;
  std::vector<std::int64_t> queue;
  std::uint32_t epoch = 0;

  void begin(std::size_t n) {
    if (stamp.size() < n) stamp.assign(n, 0);
    ++epoch;
    if (epoch == 0) {  // wrapped: reset stamps once every 2^32 traversals
      std::fill(stamp.begin(), stamp.end(), 0);
      epoch = 1;
    }
    queue.clear();
  }

  bool visit(std::int64_t v) {
    if (stamp[static_cast<std::size_t>(v)] == epoch) return false;
    stamp[static_cast<std::size_t>(v)] = epoch;
    return true;
  }

  bool seen(std::int64_t v) const { return stamp[static_cast<std::size_t>(v)] == epoch; }
};

// Breadth-first search over open edges from a set of sources. Stops early
// when target(v) holds for a reached vertex. domain, if given, restricts the
// traversal to edges with domain[e] != 0.
template <class TargetPred>
bool bfs_connected(const Lattice& box, const std::uint8_t* open, const std::vector<std::int64_t>& sources,
                   TargetPred&& target, Scratch& ws, const std::uint8_t* domain = nullptr) {
  ws.begin(static_cast<std::size_t>(box.vertex_count()));
  for (std::int64_t s : sources) {
    if (ws.visit(s) && target(s)) return true;
  }
  std::size_t head = 0;
  ws.queue.assign(sources.begin(), sources.end());
  const int d = box.dim();
  while (head < ws.queue.size()) {
    std::int64_t v = ws.queue[head++];
    Coords c = box.coords(v);
    std::uint8_t up = box.up_mask(v);
    for (int a = 0; a < d; ++a) {
      if (up & (1u << a)) {
        std::int64_t e = box.edge_id(v, a);
        if (open[e] && (!domain || domain[e])) {
          std::int64_t w = v + box.axis_stride(a);
          if (ws.visit(w)) {
            if (target(w)) return true;
            ws.queue.push_back(w);
          }
        }
      }
      if (c[a] > box.lo()[a]) {
        std::int64_t u = v - box.axis_stride(a);
        std::int64_t e = box.edge_id(u, a);
        if (open[e] && (!domain || domain[e])) {
          if (ws.visit(u)) {
            if (target(u)) return true;
            ws.queue.push_back(u);
          }
        }
      }
    }
  }
  return false;
}

// Collects the full open cluster of the sources into ws.queue.
inline void bfs_cluster(const Lattice& box, const std::uint8_t* open, const std::vector<std::int64_t>& sources,
                        Scratch& ws, const std::uint8_t* domain = nullptr) {
  bfs_connected(box, open, sources, [](std::int64_t) { return false; }, ws, domain);
}

// Union-find with path halving and union by size; the batch counterpart of
// the single-query BFS above. Both routes are kept and cross-checked.
class UnionFind {
 public:
  explicit UnionFind(std::int64_t n) : parent_(static_cast<std::size_t>(n)), size_(static_cast<std::size_t>(n), 1) {
    std::iota(parent_.begin(), parent_.end(), std::int64_t{0});
  }

  std::int64_t find(std::int64_t x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      parent_[static_cast<std::size_t>(x)] = parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(x)])];
      x = parent_[static_cast<std::size_t>(x)];
    }
    return x;
  }

  void unite(std::int64_t a, std::int64_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[static_cast<std::size_t>(a)] < size_[static_cast<std::size_t>(b)]) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;
    size_[static_cast<std::size_t>(a)] += size_[static_cast<std::size_t>(b)];
  }

  bool same(std::int64_t a, std::int64_t b) { return find(a) == find(b); }

 private:
  std::vector<std::int64_t> parent_;
  std::vector<std::int64_t> size_;
};

// Labels every vertex with its open-cluster representative.
inline UnionFind label_clusters(const Lattice& box, const std::uint8_t* open) {
  UnionFind uf(box.vertex_count());
  for (std::int64_t e = 0; e < box.edge_count(); ++e) {
    if (open[e]) uf.unite(box.edge_tail(e), box.edge_head(e));
  }
  return uf;
}

}  // namespace percolab
