#pragma once
// Discretized stationary Gaussian fields built as moving averages of white
// noise: f(x) = sum_c q(x - y_c) W_c with i.i.d. cell weights of variance
// mesh^d. Kernels live on a centred grid box and vanish outside it, so every
// field point of the (shrunken) field grid sees the full kernel window and
// the field is exactly stationary there.

#include <cmath>
#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <vector>

#include "percolab/connectivity.hpp"
#include "percolab/error.hpp"
#include "percolab/lattice.hpp"
#include "percolab/rng.hpp"
#include "percolab/summation.hpp"

namespace percolab {

// ---- grid geometry ----

// Centred cell grid: cells are indexed by integer coordinates in
// [-half[a], half[a]] per axis and sit at continuum positions c * mesh.
struct GridGeom {
  int d = 2;
  double mesh = 0.25;
  Coords half{};

  int side(int a) const { return 2 * half[a] + 1; }

  std::int64_t count() const {
    std::int64_t n = 1;
    for (int a = 0; a < d; ++a) n *= side(a);
    return n;
  }

  std::int64_t stride(int a) const {
    std::int64_t s = 1;
    for (int b = a + 1; b < d; ++b) s *= side(b);
    return s;
  }

  bool contains(const Coords& c) const {
    for (int a = 0; a < d; ++a) {
      if (c[a] < -half[a] || c[a] > half[a]) return false;
    }
    return true;
  }

  std::int64_t index(const Coords& c) const {
    std::int64_t idx = 0;
    for (int a = 0; a < d; ++a) idx += (static_cast<std::int64_t>(c[a]) + half[a]) * stride(a);
    return idx;
  }

  Coords cell(std::int64_t idx) const {
    Coords c{};
    for (int a = d - 1; a >= 0; --a) {
      c[a] = static_cast<int>(idx % side(a)) - half[a];
      idx /= side(a);
    }
    return c;
  }
};

inline GridGeom make_grid(int d, double mesh, int half_cells) {
  require_that(d >= 1 && d <= kMaxDim, ErrorKind::unsupported_dimension, "grid dimension out of range");
  require_that(mesh > 0.0, ErrorKind::invalid_parameter, "mesh must be positive");
  require_that(half_cells >= 0, ErrorKind::invalid_parameter, "grid extent must be >= 0");
  GridGeom g;
  g.d = d;
  g.mesh = mesh;
  for (int a = 0; a < d; ++a) g.half[a] = half_cells;
  return g;
}

inline GridGeom make_grid_box(int d, double mesh, const Coords& half) {
  require_that(d >= 1 && d <= kMaxDim, ErrorKind::unsupported_dimension, "grid dimension out of range");
  require_that(mesh > 0.0, ErrorKind::invalid_parameter, "mesh must be positive");
  GridGeom g;
  g.d = d;
  g.mesh = mesh;
  for (int a = 0; a < d; ++a) {
    require_that(half[a] >= 0, ErrorKind::invalid_parameter, "grid extent must be >= 0");
    g.half[a] = half[a];
  }
  return g;
}

// cells within continuum length len of the origin along one axis
inline int cells_for_length(double mesh, double len) {
  require_that(len >= 0.0, ErrorKind::invalid_parameter, "length must be >= 0");
  return static_cast<int>(std::floor(len / mesh + 1e-9));
}

// ---- kernels ----

struct Kernel {
  GridGeom geom;  // square window, half[a] identical for all axes
  double support_radius = 0.0;
  std::vector<double> values;

  int half() const { return geom.half[0]; }
  double value(const Coords& u) const { return values[geom.index(u)]; }

  double l2() const {
    NeumaierSum s;
    for (double v : values) s.add(v * v);
    return std::sqrt(s.value() * std::pow(geom.mesh, geom.d));
  }

  double integral() const {
    NeumaierSum s;
    for (double v : values) s.add(v);
    return s.value() * std::pow(geom.mesh, geom.d);
  }
};

// q(x) = (2/pi)^{d/4} exp(-|x|^2); its self-convolution is exp(-|x|^2/2).
// The window must be wide enough that the discarded tail is negligible.
Kernel make_bargmann_fock_kernel(int d, double mesh, double support_radius);

// q_r(x) = q(x) phi(|x|/r) with a smooth radial cutoff: phi = 1 on [0,1/2],
// 0 on [1,inf), strictly decreasing in between.
Kernel truncate_kernel(const Kernel& k, double r_cut);

double smooth_cutoff(double t);  // the phi above

// Discrete covariance table K = q * q on the doubled window, K(x) = E f(0)f(x).
Kernel kernel_self_convolution(const Kernel& k);

void kernel_to_csv(const Kernel& k, std::ostream& out);
Kernel kernel_from_csv(std::istream& in);

// ---- noise and field samples ----

struct NoiseGrid {
  GridGeom geom;
  std::vector<double> w;  // i.i.d. centred Gaussian, Var = mesh^d
};

struct FieldSample {
  GridGeom geom;
  std::vector<double> f;
};

inline void white_noise_fill(const GridGeom& geom, Rng& rng, NoiseGrid& out) {
  require_that(geom.mesh > 0.0, ErrorKind::invalid_parameter, "mesh must be positive");
  out.geom = geom;
  const std::int64_t n = geom.count();
  out.w.resize(static_cast<std::size_t>(n));
  const double sd = std::pow(geom.mesh, geom.d / 2.0);
  for (std::int64_t i = 0; i < n; ++i) out.w[static_cast<std::size_t>(i)] = sd * rng.next_normal();
}

inline NoiseGrid white_noise_grid(const GridGeom& geom, Rng& rng) {
  NoiseGrid out;
  white_noise_fill(geom, rng, out);
  return out;
}

// field grid of a noise grid seen through a kernel: shrunk by the window so
// every field point is fully covered
inline GridGeom field_geom_for(const GridGeom& noise, const Kernel& q) {
  require_that(noise.d == q.geom.d, ErrorKind::invalid_parameter, "kernel dimension mismatch");
  require_that(std::abs(noise.mesh - q.geom.mesh) <= 1e-12, ErrorKind::invalid_parameter,
               "kernel and noise mesh must match");
  GridGeom g = noise;
  for (int a = 0; a < g.d; ++a) {
    g.half[a] = noise.half[a] - q.half();
    require_that(g.half[a] >= 0, ErrorKind::invalid_geometry,
                 "noise grid too small for the kernel window");
  }
  return g;
}

// f at one cell: the sum over kernel offsets in row-major order. This is the
// canonical per-cell summation order; partial-reveal explorers and full-field
// evaluation both use it, so their cell values agree bit for bit.
double field_value_at(const Kernel& q, const GridGeom& noise_geom, const double* w,
                      const Coords& x);

// Direct convolution, serial reference. The inner sum runs over kernel
// offsets in row-major order; the parallel variant keeps the same per-point
// order and is bit-identical for any worker count.
void moving_average_direct_serial(const Kernel& q, const NoiseGrid& noise, FieldSample& out);
void moving_average_direct(const Kernel& q, const NoiseGrid& noise, FieldSample& out, int workers);

// Production sampler: frequency-domain convolution when FFTW is available
// (d = 2), direct otherwise. Plans are built once; sample() is safe to call
// concurrently from replica threads.
class FieldSampler {
 public:
  FieldSampler(const Kernel& q, const GridGeom& noise_geom);
  ~FieldSampler();
  FieldSampler(const FieldSampler&) = delete;
  FieldSampler& operator=(const FieldSampler&) = delete;

  const Kernel& kernel() const;
  const GridGeom& noise_geom() const;
  const GridGeom& field_geom() const;
  bool uses_fft() const;

  void sample(const NoiseGrid& noise, FieldSample& out) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---- excursion masks and connectivity events ----

struct CellMask {
  GridGeom geom;
  std::vector<std::uint8_t> bits;  // 1 iff f + ell >= 0
};

inline void excursion_fill(const FieldSample& field, double ell, CellMask& out) {
  out.geom = field.geom;
  out.bits.resize(field.f.size());
  for (std::size_t i = 0; i < field.f.size(); ++i) out.bits[i] = field.f[i] + ell >= 0.0 ? 1 : 0;
}

inline CellMask excursion_set(const FieldSample& field, double ell) {
  CellMask m;
  excursion_fill(field, ell, m);
  return m;
}

// BFS over grid cells holding value `want`, restricted to the cell rectangle
// [lo, hi]. diag = false is 4-adjacency (2d neighbours), true is 8-adjacency
// (3^d - 1). Set cells use 4-adjacency and complement cells 8-adjacency so
// that exactly one of the two dual crossings holds on any rectangle.
template <class SourcePred, class TargetPred>
bool mask_search(const CellMask& m, bool want, bool diag, const Coords& lo, const Coords& hi,
                 SourcePred&& is_source, TargetPred&& is_target, Scratch& ws) {
  const GridGeom& g = m.geom;
  const std::uint8_t wanted = want ? 1 : 0;
  for (int a = 0; a < g.d; ++a) {
    require_that(lo[a] >= -g.half[a] && hi[a] <= g.half[a] && lo[a] <= hi[a], ErrorKind::invalid_query,
                 "query rectangle leaves the mask");
  }
  ws.begin(static_cast<std::size_t>(g.count()));
  ws.queue.clear();
  // neighbour offsets: axis steps first, then (optionally) the diagonals
  Coords offs[26];
  int n_offs = 0;
  if (!diag) {
    for (int a = 0; a < g.d; ++a) {
      Coords c{};
      c[a] = 1;
      offs[n_offs++] = c;
      c[a] = -1;
      offs[n_offs++] = c;
    }
  } else {
    Coords c{};
    for (int a = 0; a < g.d; ++a) c[a] = -1;
    while (true) {
      bool zero = true;
      for (int a = 0; a < g.d; ++a) zero = zero && c[a] == 0;
      if (!zero) offs[n_offs++] = c;
      int a = g.d - 1;
      while (a >= 0 && c[a] == 1) c[a--] = -1;
      if (a < 0) break;
      ++c[a];
    }
  }

  // seed in ascending cell order for determinism
  {
    Coords c = lo;
    while (true) {
      if (m.bits[static_cast<std::size_t>(g.index(c))] == wanted && is_source(c)) {
        const std::int64_t idx = g.index(c);
        if (ws.visit(idx)) {
          if (is_target(c)) return true;
          ws.queue.push_back(idx);
        }
      }
      int a = g.d - 1;
      while (a >= 0 && c[a] == hi[a]) c[a] = lo[a], --a;
      if (a < 0) break;
      ++c[a];
    }
  }

  std::size_t head = 0;
  while (head < ws.queue.size()) {
    const Coords c = g.cell(ws.queue[head++]);
    for (int o = 0; o < n_offs; ++o) {
      Coords nb = c;
      bool in = true;
      for (int a = 0; a < g.d; ++a) {
        nb[a] += offs[o][a];
        in = in && nb[a] >= lo[a] && nb[a] <= hi[a];
      }
      if (!in) continue;
      const std::int64_t idx = g.index(nb);
      if (m.bits[static_cast<std::size_t>(idx)] != wanted || !ws.visit(idx)) continue;
      if (is_target(nb)) return true;
      ws.queue.push_back(idx);
    }
  }
  return false;
}

namespace detail {
inline int mask_sup(const Coords& c, int d) {
  int m = 0;
  for (int a = 0; a < d; ++a) m = std::max(m, std::abs(c[a]));
  return m;
}
}  // namespace detail

// positive cells of Lambda_r reach the sup-norm shell at R (4-adjacency)
inline bool field_one_arm_event(const CellMask& m, double r, double R, Scratch& ws) {
  const int cr = cells_for_length(m.geom.mesh, r);
  const int cR = cells_for_length(m.geom.mesh, R);
  require_that(cr <= cR, ErrorKind::invalid_query, "needs r <= R");
  Coords lo{}, hi{};
  for (int a = 0; a < m.geom.d; ++a) lo[a] = -cR, hi[a] = cR;
  const int d = m.geom.d;
  if (cr == cR) return true;
  return mask_search(
      m, true, false, lo, hi, [&](const Coords& c) { return detail::mask_sup(c, d) <= cr; },
      [&](const Coords& c) { return detail::mask_sup(c, d) == cR; }, ws);
}

// negative cells next to Lambda_r reach the shell at R (8-adjacency)
inline bool field_negative_arm_event(const CellMask& m, double r, double R, Scratch& ws) {
  const int cr = cells_for_length(m.geom.mesh, r);
  const int cR = cells_for_length(m.geom.mesh, R);
  require_that(cr < cR, ErrorKind::invalid_query, "needs r < R");
  Coords lo{}, hi{};
  for (int a = 0; a < m.geom.d; ++a) lo[a] = -cR, hi[a] = cR;
  const int d = m.geom.d;
  return mask_search(
      m, false, true, lo, hi, [&](const Coords& c) { return detail::mask_sup(c, d) <= cr + 1; },
      [&](const Coords& c) { return detail::mask_sup(c, d) == cR; }, ws);
}

// both signs reach the shell: the zero level line passes near Lambda_r
inline bool field_two_arm_event(const CellMask& m, double r, double R, Scratch& ws) {
  if (!field_one_arm_event(m, r, R, ws)) return false;
  const int cr = cells_for_length(m.geom.mesh, r);
  const int cR = cells_for_length(m.geom.mesh, R);
  if (cr == cR) return true;  // degenerate annulus, same convention as the one-arm
  return field_negative_arm_event(m, r, R, ws);
}

// both signs reach the shell under the same 4-adjacency and the same source
// box. At the symmetric level the negative arm then has exactly the positive
// arm's law, which the squared one-arm bound needs; the interface form above
// gives the negative side the diagonal moves instead and is strictly more
// likely on a coarse mesh.
inline bool field_two_arm_matched_event(const CellMask& m, double r, double R, Scratch& ws) {
  if (!field_one_arm_event(m, r, R, ws)) return false;
  const int cr = cells_for_length(m.geom.mesh, r);
  const int cR = cells_for_length(m.geom.mesh, R);
  if (cr == cR) return true;
  Coords lo{}, hi{};
  for (int a = 0; a < m.geom.d; ++a) lo[a] = -cR, hi[a] = cR;
  const int d = m.geom.d;
  return mask_search(
      m, false, false, lo, hi, [&](const Coords& c) { return detail::mask_sup(c, d) <= cr; },
      [&](const Coords& c) { return detail::mask_sup(c, d) == cR; }, ws);
}

// left-right crossing of [-R,R] x [-kR,kR]^{d-1} by positive cells
inline bool field_crossing_event(const CellMask& m, double k, double R, Scratch& ws) {
  require_that(k > 0.0, ErrorKind::invalid_parameter, "aspect must be positive");
  const int cR = cells_for_length(m.geom.mesh, R);
  const int ckR = cells_for_length(m.geom.mesh, k * R);
  Coords lo{}, hi{};
  lo[0] = -cR, hi[0] = cR;
  for (int a = 1; a < m.geom.d; ++a) lo[a] = -ckR, hi[a] = ckR;
  return mask_search(
      m, true, false, lo, hi, [&](const Coords& c) { return c[0] == -cR; },
      [&](const Coords& c) { return c[0] == cR; }, ws);
}

// positive 4-path between two cell rectangles, anywhere in the mask
inline bool field_link_event(const CellMask& m, const Coords& a_lo, const Coords& a_hi,
                             const Coords& b_lo, const Coords& b_hi, Scratch& ws) {
  Coords lo{}, hi{};
  for (int a = 0; a < m.geom.d; ++a) lo[a] = -m.geom.half[a], hi[a] = m.geom.half[a];
  const int d = m.geom.d;
  auto in_rect = [d](const Coords& c, const Coords& rlo, const Coords& rhi) {
    for (int a = 0; a < d; ++a) {
      if (c[a] < rlo[a] || c[a] > rhi[a]) return false;
    }
    return true;
  };
  return mask_search(
      m, true, false, lo, hi, [&](const Coords& c) { return in_rect(c, a_lo, a_hi); },
      [&](const Coords& c) { return in_rect(c, b_lo, b_hi); }, ws);
}

// complementary top-bottom crossing of the same rectangle (negative cells,
// 8-adjacency); on every mask exactly one of this and the crossing holds
inline bool field_dual_tb_crossing(const CellMask& m, double k, double R, Scratch& ws) {
  require_that(m.geom.d == 2, ErrorKind::unsupported_dimension, "dual crossing needs d = 2");
  const int cR = cells_for_length(m.geom.mesh, R);
  const int ckR = cells_for_length(m.geom.mesh, k * R);
  Coords lo{}, hi{};
  lo[0] = -cR, hi[0] = cR;
  lo[1] = -ckR, hi[1] = ckR;
  return mask_search(
      m, false, true, lo, hi, [&](const Coords& c) { return c[1] == ckR; },
      [&](const Coords& c) { return c[1] == -ckR; }, ws);
}

// ---- box partition of the noise grid ----

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Translates of [0, scale)^d on the continuum tile the noise cells by
// integer division; boundary boxes are clipped to the grid.
struct BoxPartition {
  int d = 2;
  double mesh = 0.25;
  double scale = 0.25;
  int box_cells = 1;  // scale / mesh
  Coords lo{}, hi{};  // box-index range per axis, inclusive

  int side(int a) const { return hi[a] - lo[a] + 1; }

  std::int64_t count() const {
    std::int64_t n = 1;
    for (int a = 0; a < d; ++a) n *= side(a);
    return n;
  }

  std::int64_t index(const Coords& b) const {
    std::int64_t idx = 0;
    for (int a = 0; a < d; ++a) {
      std::int64_t s = 1;
      for (int c = a + 1; c < d; ++c) s *= side(c);
      idx += (static_cast<std::int64_t>(b[a]) - lo[a]) * s;
    }
    return idx;
  }

  Coords box_coords(std::int64_t idx) const {
    Coords b{};
    for (int a = d - 1; a >= 0; --a) {
      b[a] = static_cast<int>(idx % side(a)) + lo[a];
      idx /= side(a);
    }
    return b;
  }

  Coords box_of_cell(const Coords& cell) const {
    Coords b{};
    for (int a = 0; a < d; ++a)
      b[a] = static_cast<int>(floor_div(cell[a], box_cells));
    return b;
  }

  // cell range of box b along axis a, clipped to the grid
  int cell_lo(const Coords& b, int a, const GridGeom& g) const {
    return std::max(b[a] * box_cells, -g.half[a]);
  }
  int cell_hi(const Coords& b, int a, const GridGeom& g) const {
    return std::min(b[a] * box_cells + box_cells - 1, g.half[a]);
  }
};

inline BoxPartition partition_for(const GridGeom& g, double scale) {
  require_that(scale > 0.0, ErrorKind::invalid_parameter, "box scale must be positive");
  const int cells = static_cast<int>(std::llround(scale / g.mesh));
  require_that(cells >= 1 && std::abs(cells * g.mesh - scale) <= 1e-9, ErrorKind::invalid_parameter,
               "box scale must be a multiple of the mesh");
  BoxPartition p;
  p.d = g.d;
  p.mesh = g.mesh;
  p.scale = scale;
  p.box_cells = cells;
  for (int a = 0; a < g.d; ++a) {
    p.lo[a] = static_cast<int>(floor_div(-g.half[a], cells));
    p.hi[a] = static_cast<int>(floor_div(g.half[a], cells));
  }
  return p;
}

// field component generated by the noise cells of one box alone;
// vanishes at distance > support_radius from the box
FieldSample box_component(const NoiseGrid& noise, const BoxPartition& part, const Coords& box,
                          const Kernel& q);

// fresh weights for the listed boxes (in list order, cells ascending),
// all other cells bit-identical
NoiseGrid resample_boxes(const NoiseGrid& noise, const BoxPartition& part,
                         const std::vector<Coords>& boxes, Rng& rng);

// ---- orthogonal decomposition diagnostics ----

// Max absolute covariance error, over all point pairs within the kernel
// window of S, of the rank-n decomposition built from the first n cell
// indicators of S (row-major). n equal to the cell count of S is exact.
double orthogonal_decomposition_check(const Kernel& q, const Coords& s_lo, const Coords& s_hi,
                                      std::int64_t n_basis);

// component recovered from the constant unit-norm function on S:
// (q * 1_S)(x) / sqrt(Vol S)
double constant_component_value(const Kernel& q, const Coords& s_lo, const Coords& s_hi,
                                const Coords& x);

}  // namespace percolab
