#include "percolab/gaussian_explorer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "percolab/parallel.hpp"

namespace percolab {

namespace {

void atomic_add(std::uint64_t& slot, std::uint64_t v) {
#ifdef _OPENMP
#pragma omp atomic update
  slot += v;
#else
  slot += v;
#endif
}

// odometer over [lo, hi], row-major ascending
template <class Fn>
void walk_cells(int d, const Coords& lo, const Coords& hi, Fn&& fn) {
  for (int a = 0; a < d; ++a) {
    if (lo[a] > hi[a]) return;
  }
  Coords c = lo;
  while (true) {
    fn(c);
    int a = d - 1;
    while (a >= 0 && c[a] == hi[a]) c[a] = lo[a], --a;
    if (a < 0) break;
    ++c[a];
  }
}

// a box and all in-partition boxes within Chebyshev 1 of it
template <class Fn>
void closed_neighbourhood(const BoxPartition& part, std::int64_t box, Fn&& fn) {
  const Coords b = part.box_coords(box);
  Coords off{};
  for (int a = 0; a < part.d; ++a) off[a] = -1;
  while (true) {
    Coords c{};
    bool ok = true;
    for (int a = 0; a < part.d; ++a) {
      c[a] = b[a] + off[a];
      ok = ok && c[a] >= part.lo[a] && c[a] <= part.hi[a];
    }
    if (ok) fn(part.index(c));
    int a = part.d - 1;
    while (a >= 0 && off[a] == 1) off[a--] = -1;
    if (a < 0) break;
    ++off[a];
  }
}

struct Engine {
  const FieldProblem& prob;
  const std::uint64_t replica_key;
  FieldTrace& trace;
  FieldScratch& ws;
  const int d;
  const double sd;  // noise cell standard deviation
  bool decided = false;
  bool output = false;
  int line_col = 0;  // random-line column
  int ring = 0;      // annulus shell radius in cells

  Engine(const FieldProblem& p, std::uint64_t key, FieldTrace& t, FieldScratch& w)
      : prob(p), replica_key(key), trace(t), ws(w), d(p.field_geom.d),
        sd(std::pow(p.field_geom.mesh, p.field_geom.d / 2.0)) {}

  bool in_rect(const Coords& c) const {
    for (int a = 0; a < d; ++a) {
      if (c[a] < prob.rect_lo[a] || c[a] > prob.rect_hi[a]) return false;
    }
    return true;
  }

  int sup(const Coords& c) const { return detail::mask_sup(c, d); }

  bool on_lines(const Coords& c) const {  // level-line seeds
    return c[0] == prob.rect_lo[0] || c[1] == prob.rect_lo[1];
  }

  bool seed_cell(const Coords& c) const {
    switch (prob.spec.algo) {
      case FieldAlgo::one_arm_growth: return sup(c) <= prob.c_in;
      case FieldAlgo::left_line: return c[0] == prob.rect_lo[0];
      case FieldAlgo::random_line: return c[0] == line_col;
      default: return sup(c) == ring;  // annulus_seed
    }
  }

  bool flag_a(const Coords& c) const {
    switch (prob.spec.algo) {
      case FieldAlgo::one_arm_growth:
      case FieldAlgo::annulus_seed: return sup(c) <= prob.c_in;
      default: return c[0] == prob.rect_lo[0];
    }
  }

  bool flag_b(const Coords& c) const {
    switch (prob.spec.algo) {
      case FieldAlgo::one_arm_growth:
      case FieldAlgo::annulus_seed: return sup(c) == prob.c_out;
      default: return c[0] == prob.rect_hi[0];
    }
  }

  // ---- state ----

  void init() {
    const std::size_t nb = static_cast<std::size_t>(prob.part.count());
    const std::size_t nc = static_cast<std::size_t>(prob.field_geom.count());
    const std::size_t nn = static_cast<std::size_t>(prob.noise_geom.count());
    ws.w.assign(nn, 0.0);
    ws.box_revealed.assign(nb, 0);
    ws.box_interior.assign(nb, 0);
    ws.box_heapmark.assign(nb, 0);
    ws.box_core.assign(nb, 0);
    ws.box_missing.assign(nb, 0);
    for (std::int64_t b = 0; b < prob.part.count(); ++b) {
      std::int32_t members = 0;
      closed_neighbourhood(prob.part, b, [&](std::int64_t) { ++members; });
      ws.box_missing[static_cast<std::size_t>(b)] = members;
    }
    ws.heap.clear();
    ws.determined.assign(nc, 0);
    ws.mask.assign(nc, 0);
    ws.in_t.assign(nc, 0);
    ws.elig.assign(nc, 0);
    ws.uf_p.assign(nc, -1);
    ws.uf_n.assign(nc, -1);
    ws.fl_p.assign(nc, 0);
    ws.fl_n.assign(nc, 0);
    ws.new_cells.clear();
  }

  void box_range(std::int64_t b, Coords& lo, Coords& hi) const {
    const Coords bc = prob.part.box_coords(b);
    for (int a = 0; a < d; ++a) {
      lo[a] = prob.part.cell_lo(bc, a, prob.noise_geom);
      hi[a] = prob.part.cell_hi(bc, a, prob.noise_geom);
    }
  }

  void make_interior(std::int64_t b) {
    ws.box_interior[static_cast<std::size_t>(b)] = 1;
    Coords lo{}, hi{};
    box_range(b, lo, hi);
    bool empty = false;
    for (int a = 0; a < d; ++a) {
      lo[a] = std::max(lo[a], -prob.field_geom.half[a]);
      hi[a] = std::min(hi[a], prob.field_geom.half[a]);
      if (lo[a] > hi[a]) empty = true;
    }
    if (empty) return;
    walk_cells(d, lo, hi, [&](const Coords& x) {
      const double v = field_value_at(prob.q, prob.noise_geom, ws.w.data(), x);
      const std::int64_t idx = prob.field_geom.index(x);
      ws.mask[static_cast<std::size_t>(idx)] = v + prob.ell >= 0.0 ? 1 : 0;
      ws.determined[static_cast<std::size_t>(idx)] = 1;
      ws.new_cells.push_back(idx);
    });
  }

  void reveal_box(std::int64_t b) {
    if (ws.box_revealed[static_cast<std::size_t>(b)]) return;
    ws.box_revealed[static_cast<std::size_t>(b)] = 1;
    trace.boxes.push_back(b);
    Rng rng(replica_key, 1 + static_cast<std::uint64_t>(b));
    Coords lo{}, hi{};
    box_range(b, lo, hi);
    walk_cells(d, lo, hi, [&](const Coords& c) {
      ws.w[static_cast<std::size_t>(prob.noise_geom.index(c))] = sd * rng.next_normal();
    });
    closed_neighbourhood(prob.part, b, [&](std::int64_t t) {
      if (--ws.box_missing[static_cast<std::size_t>(t)] == 0) make_interior(t);
    });
  }

  void reveal_closed_neighbourhood(std::int64_t s) {
    ws.batch.clear();
    closed_neighbourhood(prob.part, s, [&](std::int64_t t) {
      if (!ws.box_revealed[static_cast<std::size_t>(t)]) ws.batch.push_back(t);
    });
    std::sort(ws.batch.begin(), ws.batch.end());
    for (std::int64_t b : ws.batch) reveal_box(b);
  }

  void push_frontier(const Coords& cell) {
    const std::int64_t b = prob.part.index(prob.part.box_of_cell(cell));
    if (ws.box_interior[static_cast<std::size_t>(b)] || ws.box_heapmark[static_cast<std::size_t>(b)])
      return;
    ws.box_heapmark[static_cast<std::size_t>(b)] = 1;
    ws.heap.push_back(b);
    std::push_heap(ws.heap.begin(), ws.heap.end(), std::greater<>());
  }

  // ---- union-find with decision flags ----

  static std::int64_t uf_find(std::vector<std::int64_t>& p, std::int64_t x) {
    while (p[static_cast<std::size_t>(x)] != x) {
      p[static_cast<std::size_t>(x)] = p[static_cast<std::size_t>(p[static_cast<std::size_t>(x)])];
      x = p[static_cast<std::size_t>(x)];
    }
    return x;
  }

  void decide(bool value) {
    if (!decided) {
      decided = true;
      output = value;
    }
  }

  void uf_insert(std::vector<std::int64_t>& p, std::vector<std::uint8_t>& fl, std::int64_t idx,
                 std::uint8_t flags, bool value_when_spanning) {
    p[static_cast<std::size_t>(idx)] = idx;
    fl[static_cast<std::size_t>(idx)] = flags;
    if (flags == 3) decide(value_when_spanning);
  }

  void uf_union(std::vector<std::int64_t>& p, std::vector<std::uint8_t>& fl, std::int64_t x,
                std::int64_t y, bool value_when_spanning) {
    x = uf_find(p, x);
    y = uf_find(p, y);
    if (x == y) return;
    if (y < x) std::swap(x, y);
    p[static_cast<std::size_t>(y)] = x;
    fl[static_cast<std::size_t>(x)] |= fl[static_cast<std::size_t>(y)];
    if (fl[static_cast<std::size_t>(x)] == 3) decide(value_when_spanning);
  }

  // ---- growth of the tracked positive set (all variants except level_line) ----

  void process_generic() {
    auto& join = ws.queue;
    join.clear();
    for (std::int64_t idx : ws.new_cells) {
      if (ws.in_t[static_cast<std::size_t>(idx)] || ws.mask[static_cast<std::size_t>(idx)] != 1)
        continue;
      const Coords c = prob.field_geom.cell(idx);
      if (!in_rect(c)) continue;
      bool j = seed_cell(c);
      if (!j) {
        for (int a = 0; a < d && !j; ++a) {
          for (int s = -1; s <= 1 && !j; s += 2) {
            Coords nb = c;
            nb[a] += s;
            if (!in_rect(nb)) continue;
            j = ws.in_t[static_cast<std::size_t>(prob.field_geom.index(nb))] != 0;
          }
        }
      }
      if (j) join.push_back(idx);
    }
    std::size_t head = 0;
    while (head < join.size() && !decided) {
      const std::int64_t idx = join[head++];
      if (ws.in_t[static_cast<std::size_t>(idx)]) continue;
      ws.in_t[static_cast<std::size_t>(idx)] = 1;
      const Coords c = prob.field_geom.cell(idx);
      std::uint8_t flags = 0;
      if (flag_a(c)) flags |= 1;
      if (flag_b(c)) flags |= 2;
      uf_insert(ws.uf_p, ws.fl_p, idx, flags, true);
      for (int a = 0; a < d; ++a) {
        for (int s = -1; s <= 1; s += 2) {
          Coords nb = c;
          nb[a] += s;
          if (!in_rect(nb)) continue;
          const std::int64_t nidx = prob.field_geom.index(nb);
          push_frontier(nb);
          if (!ws.determined[static_cast<std::size_t>(nidx)] ||
              ws.mask[static_cast<std::size_t>(nidx)] != 1)
            continue;
          if (ws.in_t[static_cast<std::size_t>(nidx)])
            uf_union(ws.uf_p, ws.fl_p, idx, nidx, true);
          else
            join.push_back(nidx);
        }
      }
    }
    ws.new_cells.clear();
  }

  // ---- level-line tracing ----

  void level_maybe_join(std::int64_t idx, std::vector<std::int64_t>& join) {
    if (ws.in_t[static_cast<std::size_t>(idx)]) return;
    const Coords c = prob.field_geom.cell(idx);
    if (on_lines(c)) {
      join.push_back(idx);
      return;
    }
    for (int d0 = -1; d0 <= 1; ++d0) {
      for (int d1 = -1; d1 <= 1; ++d1) {
        if (d0 == 0 && d1 == 0) continue;
        const Coords nb{c[0] + d0, c[1] + d1, 0};
        if (!in_rect(nb)) continue;
        if (ws.in_t[static_cast<std::size_t>(prob.field_geom.index(nb))]) {
          join.push_back(idx);
          return;
        }
      }
    }
  }

  void process_level() {
    auto& join = ws.queue;
    join.clear();
    for (std::int64_t idx : ws.new_cells) {
      const Coords c = prob.field_geom.cell(idx);
      if (!in_rect(c)) continue;
      const bool one = ws.mask[static_cast<std::size_t>(idx)] != 0;
      // decision components: positive 4-adjacent left-right, negative
      // 8-adjacent top-bottom; exactly one of them eventually spans
      if (one) {
        std::uint8_t flags = 0;
        if (c[0] == prob.rect_lo[0]) flags |= 1;
        if (c[0] == prob.rect_hi[0]) flags |= 2;
        uf_insert(ws.uf_p, ws.fl_p, idx, flags, true);
        for (int a = 0; a < 2; ++a) {
          for (int s = -1; s <= 1; s += 2) {
            Coords nb = c;
            nb[a] += s;
            if (!in_rect(nb)) continue;
            const std::int64_t nidx = prob.field_geom.index(nb);
            if (ws.determined[static_cast<std::size_t>(nidx)] &&
                ws.mask[static_cast<std::size_t>(nidx)] == 1 &&
                ws.uf_p[static_cast<std::size_t>(nidx)] >= 0)
              uf_union(ws.uf_p, ws.fl_p, idx, nidx, true);
          }
        }
      } else {
        std::uint8_t flags = 0;
        if (c[1] == prob.rect_hi[1]) flags |= 1;
        if (c[1] == prob.rect_lo[1]) flags |= 2;
        uf_insert(ws.uf_n, ws.fl_n, idx, flags, false);
        for (int d0 = -1; d0 <= 1; ++d0) {
          for (int d1 = -1; d1 <= 1; ++d1) {
            if (d0 == 0 && d1 == 0) continue;
            const Coords nb{c[0] + d0, c[1] + d1, 0};
            if (!in_rect(nb)) continue;
            const std::int64_t nidx = prob.field_geom.index(nb);
            if (ws.determined[static_cast<std::size_t>(nidx)] &&
                ws.mask[static_cast<std::size_t>(nidx)] == 0 &&
                ws.uf_n[static_cast<std::size_t>(nidx)] >= 0)
              uf_union(ws.uf_n, ws.fl_n, idx, nidx, false);
          }
        }
      }
      if (decided) return;
      // interface eligibility: a determined cell next to the opposite sign
      // (or on the seed lines) can carry the traced level line
      bool e = on_lines(c);
      for (int a = 0; a < 2; ++a) {
        for (int s = -1; s <= 1; s += 2) {
          Coords nb = c;
          nb[a] += s;
          if (!in_rect(nb)) continue;
          const std::int64_t nidx = prob.field_geom.index(nb);
          if (!ws.determined[static_cast<std::size_t>(nidx)]) continue;
          if ((ws.mask[static_cast<std::size_t>(nidx)] != 0) == one) continue;
          e = true;
          if (!ws.elig[static_cast<std::size_t>(nidx)]) {
            ws.elig[static_cast<std::size_t>(nidx)] = 1;
            level_maybe_join(nidx, join);
          }
        }
      }
      if (e) ws.elig[static_cast<std::size_t>(idx)] = 1;
      if (ws.elig[static_cast<std::size_t>(idx)]) level_maybe_join(idx, join);
    }
    // flood the traced set through eligible cells (8-adjacency)
    std::size_t head = 0;
    while (head < join.size()) {
      const std::int64_t idx = join[head++];
      if (ws.in_t[static_cast<std::size_t>(idx)]) continue;
      ws.in_t[static_cast<std::size_t>(idx)] = 1;
      const Coords c = prob.field_geom.cell(idx);
      for (int d0 = -1; d0 <= 1; ++d0) {
        for (int d1 = -1; d1 <= 1; ++d1) {
          if (d0 == 0 && d1 == 0) continue;
          const Coords nb{c[0] + d0, c[1] + d1, 0};
          if (!in_rect(nb)) continue;
          push_frontier(nb);
          const std::int64_t nidx = prob.field_geom.index(nb);
          if (ws.elig[static_cast<std::size_t>(nidx)] && !ws.in_t[static_cast<std::size_t>(nidx)])
            join.push_back(nidx);
        }
      }
    }
    ws.new_cells.clear();
  }

  void process() {
    if (prob.spec.algo == FieldAlgo::level_line)
      process_level();
    else
      process_generic();
  }

  // ---- seeding ----

  void mark_core_rect(const Coords& lo, const Coords& hi) {
    for (std::int64_t b = 0; b < prob.part.count(); ++b) {
      Coords bl{}, bh{};
      box_range(b, bl, bh);
      bool hit = true;
      for (int a = 0; a < d; ++a) hit = hit && bl[a] <= hi[a] + 1 && bh[a] >= lo[a] - 1;
      if (hit) ws.box_core[static_cast<std::size_t>(b)] = 1;
    }
  }

  void mark_core_ring(int radius) {
    for (std::int64_t b = 0; b < prob.part.count(); ++b) {
      Coords bl{}, bh{};
      box_range(b, bl, bh);
      int min_sup = 0, max_sup = 0;
      for (int a = 0; a < d; ++a) {
        const int lo_d = bl[a] > 0 ? bl[a] : (bh[a] < 0 ? -bh[a] : 0);
        min_sup = std::max(min_sup, lo_d);
        max_sup = std::max(max_sup, std::max(std::abs(bl[a]), std::abs(bh[a])));
      }
      if (min_sup <= radius + 1 && max_sup >= radius - 1)
        ws.box_core[static_cast<std::size_t>(b)] = 1;
    }
  }

  void seed() {
    Coords lo{}, hi{};
    switch (prob.spec.algo) {
      case FieldAlgo::one_arm_growth:
        for (int a = 0; a < d; ++a) lo[a] = -prob.c_in, hi[a] = prob.c_in;
        mark_core_rect(lo, hi);
        break;
      case FieldAlgo::left_line:
        lo = prob.rect_lo;
        hi = prob.rect_hi;
        hi[0] = prob.rect_lo[0];
        mark_core_rect(lo, hi);
        break;
      case FieldAlgo::random_line:
        lo = prob.rect_lo;
        hi = prob.rect_hi;
        lo[0] = hi[0] = line_col;
        mark_core_rect(lo, hi);
        break;
      case FieldAlgo::level_line:
        lo = prob.rect_lo;
        hi = prob.rect_hi;
        hi[0] = prob.rect_lo[0];
        mark_core_rect(lo, hi);  // left column
        lo = prob.rect_lo;
        hi = prob.rect_hi;
        hi[1] = prob.rect_lo[1];
        mark_core_rect(lo, hi);  // bottom row
        break;
      case FieldAlgo::annulus_seed:
        mark_core_ring(ring);
        break;
    }
    for (std::int64_t b = 0; b < prob.part.count(); ++b) {
      bool near_core = ws.box_core[static_cast<std::size_t>(b)] != 0;
      closed_neighbourhood(prob.part, b, [&](std::int64_t t) {
        near_core = near_core || ws.box_core[static_cast<std::size_t>(t)] != 0;
      });
      if (near_core) reveal_box(b);
    }
  }

  // ---- level-line completion: open up enclosed pockets bordering the
  // determined region until the crossing is decided ----

  void drain_heap() {
    while (!decided && !ws.heap.empty()) {
      std::pop_heap(ws.heap.begin(), ws.heap.end(), std::greater<>());
      const std::int64_t s = ws.heap.back();
      ws.heap.pop_back();
      ws.box_heapmark[static_cast<std::size_t>(s)] = 0;
      if (ws.box_interior[static_cast<std::size_t>(s)]) continue;
      reveal_closed_neighbourhood(s);
      process();
    }
  }

  bool pocket_candidate(std::int64_t b) const {
    Coords lo{}, hi{};
    const Coords bc = prob.part.box_coords(b);
    bool empty = false;
    for (int a = 0; a < d; ++a) {
      lo[a] = std::max(prob.part.cell_lo(bc, a, prob.noise_geom), prob.rect_lo[a]);
      hi[a] = std::min(prob.part.cell_hi(bc, a, prob.noise_geom), prob.rect_hi[a]);
      if (lo[a] > hi[a]) empty = true;
    }
    if (empty) return false;
    bool found = false;
    walk_cells(d, lo, hi, [&](const Coords& c) {
      if (found || ws.determined[static_cast<std::size_t>(prob.field_geom.index(c))]) return;
      for (int d0 = -1; d0 <= 1 && !found; ++d0) {
        for (int d1 = -1; d1 <= 1 && !found; ++d1) {
          if (d0 == 0 && d1 == 0) continue;
          const Coords nb{c[0] + d0, c[1] + d1, 0};
          if (!in_rect(nb)) continue;
          found = ws.determined[static_cast<std::size_t>(prob.field_geom.index(nb))] != 0;
        }
      }
    });
    return found;
  }

  void level_completion() {
    while (!decided) {
      drain_heap();
      if (decided) return;
      std::int64_t pick = -1;
      for (std::int64_t b = 0; b < prob.part.count() && pick < 0; ++b) {
        if (ws.box_interior[static_cast<std::size_t>(b)]) continue;
        if (pocket_candidate(b)) pick = b;
      }
      require_that(pick >= 0, ErrorKind::internal, "level-line run failed to decide the crossing");
      reveal_closed_neighbourhood(pick);
      process();
    }
  }

  void run() {
    trace.boxes.clear();
    trace.aux.clear();
    // degenerate one-arm annulus: the event is identically true
    if ((prob.spec.algo == FieldAlgo::one_arm_growth || prob.spec.algo == FieldAlgo::annulus_seed) &&
        prob.c_in == prob.c_out) {
      trace.output = true;
      return;
    }
    init();
    Rng aux(replica_key, 0);
    if (prob.spec.algo == FieldAlgo::random_line) {
      const double t = (aux.next_unit() - 0.5) * prob.spec.R;
      trace.aux.push_back(t);
      line_col = static_cast<int>(std::llround(t / prob.field_geom.mesh));
    } else if (prob.spec.algo == FieldAlgo::annulus_seed) {
      const std::uint64_t r_max = static_cast<std::uint64_t>(std::floor(prob.spec.R + 1e-9));
      const std::uint64_t i = 2 + aux.next_index(r_max - 1);
      trace.aux.push_back(static_cast<double>(i));
      ring = cells_for_length(prob.field_geom.mesh, static_cast<double>(i));
    }
    seed();
    process();
    drain_heap();
    if (!decided && prob.spec.algo == FieldAlgo::level_line) level_completion();
    trace.output = decided ? output : false;
  }
};

}  // namespace

bool FieldProblem::direct_event(const CellMask& m, Scratch& ws) const {
  switch (spec.algo) {
    case FieldAlgo::one_arm_growth:
    case FieldAlgo::annulus_seed: return field_one_arm_event(m, spec.r_in, spec.R, ws);
    default: return field_crossing_event(m, spec.k, spec.R, ws);
  }
}

FieldProblem make_field_problem(const Kernel& q, double ell, const FieldAlgoSpec& spec) {
  const int d = q.geom.d;
  const double mesh = q.geom.mesh;
  require_that(spec.R > 0.0, ErrorKind::invalid_parameter, "scale must be positive");
  FieldProblem p;
  p.q = q;
  p.ell = ell;
  p.spec = spec;
  const bool crossing = spec.algo == FieldAlgo::random_line || spec.algo == FieldAlgo::left_line ||
                        spec.algo == FieldAlgo::level_line;
  const int cR = cells_for_length(mesh, spec.R);
  if (crossing) {
    require_that(spec.k >= 1.0, ErrorKind::invalid_parameter, "aspect must be >= 1");
    require_that(spec.R >= 4.0 * q.support_radius, ErrorKind::invalid_parameter,
                 "line algorithms need R >= 4 times the kernel support");
    if (spec.algo == FieldAlgo::level_line)
      require_that(d == 2, ErrorKind::unsupported_dimension, "level-line tracing needs d = 2");
    const int ckR = cells_for_length(mesh, spec.k * spec.R);
    Coords half{};
    half[0] = cR;
    for (int a = 1; a < d; ++a) half[a] = ckR;
    p.field_geom = make_grid_box(d, mesh, half);
  } else {
    require_that(spec.r_in >= 0.0, ErrorKind::invalid_parameter, "inner radius must be >= 0");
    p.c_in = cells_for_length(mesh, spec.r_in);
    if (spec.algo == FieldAlgo::annulus_seed) {
      require_that(spec.R >= 2.0, ErrorKind::invalid_parameter, "annulus seeding needs R >= 2");
      require_that(p.c_in <= cells_for_length(mesh, 2.0), ErrorKind::invalid_parameter,
                   "annulus seeding needs r_in <= 2");
    }
    require_that(p.c_in <= cR, ErrorKind::invalid_parameter, "inner radius exceeds the scale");
    p.field_geom = make_grid(d, mesh, cR);
  }
  p.c_out = cR;
  for (int a = 0; a < d; ++a) {
    p.rect_lo[a] = -p.field_geom.half[a];
    p.rect_hi[a] = p.field_geom.half[a];
  }
  Coords nh{};
  for (int a = 0; a < d; ++a) nh[a] = p.field_geom.half[a] + q.half();
  p.noise_geom = make_grid_box(d, mesh, nh);
  const double s = spec.box_scale > 0.0 ? spec.box_scale : q.support_radius;
  p.part = partition_for(p.noise_geom, s);
  require_that(p.part.box_cells >= q.half(), ErrorKind::invalid_geometry,
               "interior margin: the box scale must cover the kernel window");
  return p;
}

void run_field_algorithm(const FieldProblem& prob, std::uint64_t replica_key, FieldTrace& trace,
                         FieldScratch& ws) {
  Engine eng(prob, replica_key, trace, ws);
  eng.run();
}

void field_noise_by_boxes(const FieldProblem& prob, std::uint64_t replica_key, NoiseGrid& out) {
  out.geom = prob.noise_geom;
  out.w.assign(static_cast<std::size_t>(prob.noise_geom.count()), 0.0);
  const double sd = std::pow(prob.noise_geom.mesh, prob.noise_geom.d / 2.0);
  for (std::int64_t b = 0; b < prob.part.count(); ++b) {
    Rng rng(replica_key, 1 + static_cast<std::uint64_t>(b));
    const Coords bc = prob.part.box_coords(b);
    Coords lo{}, hi{};
    for (int a = 0; a < prob.part.d; ++a) {
      lo[a] = prob.part.cell_lo(bc, a, prob.noise_geom);
      hi[a] = prob.part.cell_hi(bc, a, prob.noise_geom);
    }
    walk_cells(prob.part.d, lo, hi, [&](const Coords& c) {
      out.w[static_cast<std::size_t>(prob.noise_geom.index(c))] = sd * rng.next_normal();
    });
  }
}

void field_mask_by_boxes(const FieldProblem& prob, std::uint64_t replica_key, CellMask& out) {
  NoiseGrid noise;
  field_noise_by_boxes(prob, replica_key, noise);
  out.geom = prob.field_geom;
  const std::int64_t n = prob.field_geom.count();
  out.bits.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const double v = field_value_at(prob.q, prob.noise_geom, noise.w.data(), prob.field_geom.cell(i));
    out.bits[static_cast<std::size_t>(i)] = v + prob.ell >= 0.0 ? 1 : 0;
  }
}

FieldRevealment measure_field_revealment(const FieldProblem& prob, std::uint64_t n,
                                         std::uint64_t seed, int workers) {
  require_that(n >= 1, ErrorKind::invalid_parameter, "need at least one replica");
  require_that(workers >= 1, ErrorKind::invalid_parameter, "workers must be >= 1");
  FieldRevealment table;
  table.counts.assign(static_cast<std::size_t>(prob.part.count()), 0);
  table.runs = n;
  std::vector<std::uint8_t> outputs(n, 0);
  std::vector<std::int64_t> sizes(n, 0);
  for_each_replica(n, seed, workers, [&](std::uint64_t i, Rng&) {
    thread_local FieldTrace trace;
    thread_local FieldScratch scratch;
    run_field_algorithm(prob, mix64(seed, i), trace, scratch);
    outputs[i] = trace.output ? 1 : 0;
    sizes[i] = static_cast<std::int64_t>(trace.boxes.size());
    for (std::int64_t b : trace.boxes) atomic_add(table.counts[static_cast<std::size_t>(b)], 1);
  });
  for (std::uint64_t i = 0; i < n; ++i) {
    table.output_count += outputs[i];
    const std::uint64_t sz = static_cast<std::uint64_t>(sizes[i]);
    table.revealed_total += sz;
    table.revealed_total_sq += sz * sz;
  }
  return table;
}

bool box_near_rect(const BoxPartition& part, const GridGeom& noise_geom, std::int64_t box,
                   const Coords& lo, const Coords& hi, int margin) {
  const Coords bc = part.box_coords(box);
  for (int a = 0; a < part.d; ++a) {
    const int bl = part.cell_lo(bc, a, noise_geom);
    const int bh = part.cell_hi(bc, a, noise_geom);
    if (bl > hi[a] + margin || bh < lo[a] - margin) return false;
  }
  return true;
}

void field_trace_to_jsonl(const FieldTrace& t, std::ostream& out) {
  for (std::size_t i = 0; i < t.boxes.size(); ++i)
    out << "{\"step\":" << i << ",\"unit\":" << t.boxes[i] << "}\n";
  out << "{\"output\":" << (t.output ? 1 : 0) << ",\"aux\":[";
  for (std::size_t i = 0; i < t.aux.size(); ++i) {
    if (i) out << ',';
    out << t.aux[i];
  }
  out << "]}\n";
}

}  // namespace percolab
