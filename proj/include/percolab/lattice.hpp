#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "percolab/error.hpp"

namespace percolab {

inline constexpr int kMaxDim = 3;

using Coords = std::array<int, kMaxDim>;

// Finite axis-aligned box of Z^d with nearest-neighbour bonds. Vertices are
// indexed lexicographically (axis 0 slowest, last axis fastest); edges are
// indexed lexicographically by (tail vertex, axis), where the tail is the
// endpoint with the smaller coordinate. The indexing is part of the on-disk
// and RNG-replay contract and must not change.
class Lattice {
 public:
  Lattice(int d, Coords lo, Coords hi) : d_(d), lo_(lo), hi_(hi) {
    require_that(d >= 1 && d <= kMaxDim, ErrorKind::unsupported_dimension, "dimension must be 1..3");
    for (int a = 0; a < d_; ++a) {
      require_that(lo_[a] <= hi_[a], ErrorKind::invalid_geometry, "box has empty axis");
      extent_[a] = hi_[a] - lo_[a] + 1;
    }
    for (int a = d_; a < kMaxDim; ++a) {
      lo_[a] = hi_[a] = 0;
      extent_[a] = 1;
    }
    stride_[d_ - 1] = 1;
    for (int a = d_ - 2; a >= 0; --a) stride_[a] = stride_[a + 1] * extent_[a + 1];
    nv_ = stride_[0] * extent_[0];

    up_mask_.assign(static_cast<std::size_t>(nv_), 0);
    edge_base_.assign(static_cast<std::size_t>(nv_) + 1, 0);
    std::int64_t edges = 0;
    for (std::int64_t v = 0; v < nv_; ++v) {
      edge_base_[static_cast<std::size_t>(v)] = edges;
      Coords c = coords(v);
      std::uint8_t mask = 0;
      for (int a = 0; a < d_; ++a) {
        if (c[a] < hi_[a]) mask |= static_cast<std::uint8_t>(1u << a);
      }
      up_mask_[static_cast<std::size_t>(v)] = mask;
      edges += std::popcount(mask);
    }
    edge_base_[static_cast<std::size_t>(nv_)] = edges;
    ne_ = edges;

    edge_tail_.resize(static_cast<std::size_t>(ne_));
    edge_axis_.resize(static_cast<std::size_t>(ne_));
    for (std::int64_t v = 0; v < nv_; ++v) {
      std::int64_t e = edge_base_[static_cast<std::size_t>(v)];
      std::uint8_t mask = up_mask_[static_cast<std::size_t>(v)];
      for (int a = 0; a < d_; ++a) {
        if (mask & (1u << a)) {
          edge_tail_[static_cast<std::size_t>(e)] = v;
          edge_axis_[static_cast<std::size_t>(e)] = static_cast<std::uint8_t>(a);
          ++e;
        }
      }
    }
  }

  int dim() const { return d_; }
  const Coords& lo() const { return lo_; }
  const Coords& hi() const { return hi_; }
  std::int64_t vertex_count() const { return nv_; }
  std::int64_t edge_count() const { return ne_; }
  std::int64_t axis_stride(int a) const { return stride_[a]; }

  std::int64_t vertex_index(const Coords& c) const {
    std::int64_t idx = 0;
    for (int a = 0; a < d_; ++a) idx += static_cast<std::int64_t>(c[a] - lo_[a]) * stride_[a];
    return idx;
  }

  Coords coords(std::int64_t v) const {
    Coords c{};
    for (int a = 0; a < d_; ++a) {
      c[a] = lo_[a] + static_cast<int>(v / stride_[a]);
      v %= stride_[a];
    }
    return c;
  }

  bool contains(const Coords& c) const {
    for (int a = 0; a < d_; ++a) {
      if (c[a] < lo_[a] || c[a] > hi_[a]) return false;
    }
    return true;
  }

  std::uint8_t up_mask(std::int64_t v) const { return up_mask_[static_cast<std::size_t>(v)]; }

  // Edge id of the bond (v, v + e_axis); v must have that neighbour.
  std::int64_t edge_id(std::int64_t v, int axis) const {
    std::uint8_t mask = up_mask_[static_cast<std::size_t>(v)];
    return edge_base_[static_cast<std::size_t>(v)] +
           std::popcount(static_cast<unsigned>(mask & ((1u << axis) - 1u)));
  }

  std::int64_t edge_tail(std::int64_t e) const { return edge_tail_[static_cast<std::size_t>(e)]; }
  int edge_axis(std::int64_t e) const { return edge_axis_[static_cast<std::size_t>(e)]; }
  std::int64_t edge_head(std::int64_t e) const {
    return edge_tail_[static_cast<std::size_t>(e)] + stride_[edge_axis_[static_cast<std::size_t>(e)]];
  }
  std::int64_t first_edge_of(std::int64_t v) const { return edge_base_[static_cast<std::size_t>(v)]; }

  int sup_norm(std::int64_t v) const {
    Coords c = coords(v);
    int m = 0;
    for (int a = 0; a < d_; ++a) m = std::max(m, std::abs(c[a]));
    return m;
  }

 private:
  int d_;
  Coords lo_{};
  Coords hi_{};
  Coords extent_{};
  std::array<std::int64_t, kMaxDim> stride_{};
  std::int64_t nv_ = 0;
  std::int64_t ne_ = 0;
  std::vector<std::uint8_t> up_mask_;
  std::vector<std::int64_t> edge_base_;
  std::vector<std::int64_t> edge_tail_;
  std::vector<std::uint8_t> edge_axis_;
};

// Λ_R = [-R, R]^d.
inline Lattice make_cube(int d, int R) {
  require_that(R >= 0, ErrorKind::invalid_geometry, "R must be >= 0");
  Coords lo{}, hi{};
  for (int a = 0; a < d; ++a) {
    lo[a] = -R;
    hi[a] = R;
  }
  return Lattice(d, lo, hi);
}

// Half-width of the long sides of B_k(R): k*R rounded up, guarded against
// float noise in k*R for rational k.
inline int rounded_aspect(double k, int R) {
  double v = k * static_cast<double>(R);
  return static_cast<int>(std::ceil(v - 1e-9));
}

// B_k(R) = [-R, R] x [-kR, kR]^{d-1}.
inline Lattice make_box_k(int d, int R, double k) {
  require_that(R >= 1, ErrorKind::invalid_geometry, "R must be >= 1");
  require_that(k > 0.0, ErrorKind::invalid_geometry, "aspect ratio must be positive");
  int kr = rounded_aspect(k, R);
  Coords lo{}, hi{};
  lo[0] = -R;
  hi[0] = R;
  for (int a = 1; a < d; ++a) {
    lo[a] = -kr;
    hi[a] = kr;
  }
  return Lattice(d, lo, hi);
}

// Vertex rectangle with a+1 columns and b rows: x in [0, a], y in [0, b-1].
inline Lattice make_rect(int a, int b) {
  require_that(a >= 1 && b >= 1, ErrorKind::invalid_geometry, "rectangle needs a >= 1, b >= 1");
  Coords lo{}, hi{};
  hi[0] = a;
  hi[1] = b - 1;
  return Lattice(2, lo, hi);
}

inline std::int64_t origin_index(const Lattice& box) {
  Coords zero{};
  require_that(box.contains(zero), ErrorKind::invalid_query, "origin not inside box");
  return box.vertex_index(zero);
}

// Edge containment in sub-boxes of the form used by the revealment bounds:
// an edge belongs to a region iff both endpoints do.
inline bool edge_in_right_half(const Lattice& box, std::int64_t e) {
  return box.coords(box.edge_tail(e))[0] >= 0;
}

inline bool edge_in_top_right_quarter(const Lattice& box, std::int64_t e) {
  Coords c = box.coords(box.edge_tail(e));
  return c[0] >= 0 && c[1] >= 0;
}

}  // namespace percolab
