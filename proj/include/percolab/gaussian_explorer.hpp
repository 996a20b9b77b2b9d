#pragma once
// Exploration algorithms over Gaussian excursion masks with noise-box reveal
// units. A run reveals boxes adaptively (lowest-index frontier box first),
// determines its target event exactly, and records the reveal order for
// revealment accounting. A box's noise comes from a stream keyed by
// (replica, box), so its weights do not depend on when or whether any other
// box is revealed. The field is usable on the cells of a box only once the
// box and all its neighbours are revealed.

#include <cstdint>
#include <ostream>
#include <vector>

#include "percolab/connectivity.hpp"
#include "percolab/error.hpp"
#include "percolab/gaussian_field.hpp"
#include "percolab/rng.hpp"

namespace percolab {

enum class FieldAlgo {
  one_arm_growth,  // grows the positive cluster of Lambda_{r_in}
  random_line,     // seeds a uniform vertical line, grows its positive clusters
  left_line,       // seeds the left face of the crossing rectangle
  level_line,      // d = 2: traces sign interfaces from the left/bottom lines
  annulus_seed,    // seeds a uniform annulus shell, determines the one-arm
};

inline const char* field_algo_name(FieldAlgo a) {
  switch (a) {
    case FieldAlgo::one_arm_growth: return "one_arm_growth";
    case FieldAlgo::random_line: return "random_line";
    case FieldAlgo::left_line: return "left_line";
    case FieldAlgo::level_line: return "level_line";
    case FieldAlgo::annulus_seed: return "annulus_seed";
  }
  return "unknown";
}

struct FieldAlgoSpec {
  FieldAlgo algo = FieldAlgo::left_line;
  double k = 1.0;         // crossing aspect
  double R = 8.0;         // event scale
  double r_in = 1.0;      // inner radius of the one-arm events
  double box_scale = 0;   // reveal-unit size; 0 means the kernel support radius
};

struct FieldProblem {
  Kernel q;
  double ell = 0.0;
  FieldAlgoSpec spec;
  GridGeom field_geom;
  GridGeom noise_geom;
  BoxPartition part;
  Coords rect_lo{}, rect_hi{};  // event rectangle in field cells
  int c_in = 0;                 // cells of r_in
  int c_out = 0;                // cells of R

  // the event the run determines, evaluated directly on a full mask
  bool direct_event(const CellMask& m, Scratch& ws) const;
};

// Validates geometry: the box scale must be a mesh multiple and at least the
// kernel window (interior-margin requirement), line algorithms need R >= 4
// times the kernel support, the level-line variant needs d = 2.
FieldProblem make_field_problem(const Kernel& q, double ell, const FieldAlgoSpec& spec);

struct FieldTrace {
  bool output = false;
  std::vector<std::int64_t> boxes;  // reveal order, no repeats
  std::vector<double> aux;          // recorded auxiliary draws (line offset / annulus radius)
};

// Reusable per-run workspace. After a run, `determined` and `mask` hold the
// cells the algorithm computed (indexed by field cell), and `box_revealed`
// the revealed box set — kept for determination and resampling tests.
struct FieldScratch {
  std::vector<double> w;
  std::vector<std::uint8_t> box_revealed, box_interior, box_heapmark, box_core;
  std::vector<std::int32_t> box_missing;
  std::vector<std::int64_t> heap;
  std::vector<std::uint8_t> determined, mask, in_t, elig;
  std::vector<std::int64_t> uf_p, uf_n;
  std::vector<std::uint8_t> fl_p, fl_n;
  std::vector<std::int64_t> queue, batch, new_cells;
};

// One adapted run. Box noise comes from Rng(replica_key, 1 + box_index), the
// auxiliary draw from Rng(replica_key, 0). Deterministic given replica_key.
void run_field_algorithm(const FieldProblem& prob, std::uint64_t replica_key, FieldTrace& trace,
                         FieldScratch& ws);

// Full noise / mask from the same per-box streams a run reveals from: bits of
// cells the run determined agree bit for bit with this mask.
void field_noise_by_boxes(const FieldProblem& prob, std::uint64_t replica_key, NoiseGrid& out);
void field_mask_by_boxes(const FieldProblem& prob, std::uint64_t replica_key, CellMask& out);

struct FieldRevealment {
  std::vector<std::uint64_t> counts;  // per box
  std::uint64_t runs = 0;
  std::uint64_t output_count = 0;
  std::uint64_t revealed_total = 0;    // sum of trace lengths
  std::uint64_t revealed_total_sq = 0;  // sum of squared trace lengths

  double rev(std::size_t u) const {
    return runs ? static_cast<double>(counts[u]) / static_cast<double>(runs) : 0.0;
  }
  double rev_se(std::size_t u) const {
    if (runs == 0) return 0.0;
    const double p = rev(u);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(runs));
  }
  double output_rate() const {
    return runs ? static_cast<double>(output_count) / static_cast<double>(runs) : 0.0;
  }
  // mean revealed count per run, with its sample standard error
  double revealed_mean() const {
    return runs ? static_cast<double>(revealed_total) / static_cast<double>(runs) : 0.0;
  }
  double revealed_mean_se() const {
    if (runs < 2) return 0.0;
    const double m = revealed_mean();
    double var = static_cast<double>(revealed_total_sq) / static_cast<double>(runs) - m * m;
    if (var < 0.0) var = 0.0;
    return std::sqrt(var / static_cast<double>(runs));
  }
};

// Replica i uses replica_key = mix64(seed, i). Counts are integer tallies, so
// the result is identical for any worker count.
FieldRevealment measure_field_revealment(const FieldProblem& prob, std::uint64_t n,
                                         std::uint64_t seed, int workers);

// does the box come within `margin` cells of the cell rectangle [lo, hi]?
bool box_near_rect(const BoxPartition& part, const GridGeom& noise_geom, std::int64_t box,
                   const Coords& lo, const Coords& hi, int margin);

// one line per revealed unit, then a summary line with the output and aux draws
void field_trace_to_jsonl(const FieldTrace& t, std::ostream& out);

}  // namespace percolab
