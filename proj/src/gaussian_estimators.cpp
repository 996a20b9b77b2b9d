#include "percolab/gaussian_estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>

#include "percolab/error.hpp"
#include "percolab/parallel.hpp"
#include "percolab/summation.hpp"

namespace percolab {

namespace {

thread_local Scratch tl_ws;
thread_local NoiseGrid tl_noise;
thread_local NoiseGrid tl_noise_sub;
thread_local FieldSample tl_field;
thread_local CellMask tl_mask;
thread_local CellMask tl_mask_fd;
thread_local std::vector<double> tl_box_noise;
thread_local std::vector<std::int64_t> tl_changed;

constexpr double kLevelStep = 0.05;  // common-noise finite-difference step in the level

constexpr double kMcMarginClamp = 1e9;

double mc_margin(double slack, double sigma) {
  if (sigma > 0.0) return slack / sigma;
  if (std::abs(slack) <= 1e-12) return 0.0;
  return slack > 0.0 ? kMcMarginClamp : -kMcMarginClamp;
}

std::uint64_t subseed(std::uint64_t seed, std::uint64_t tag) { return mix64(seed, tag); }

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

GridGeom box_field_geom(const Kernel& q, double len0, double len_rest) {
  Coords half{};
  half[0] = cells_for_length(q.geom.mesh, len0);
  for (int a = 1; a < q.geom.d; ++a) half[a] = cells_for_length(q.geom.mesh, len_rest);
  return make_grid_box(q.geom.d, q.geom.mesh, half);
}

GridGeom noise_geom_for_field(const Kernel& q, const GridGeom& field) {
  Coords half{};
  for (int a = 0; a < field.d; ++a) half[a] = field.half[a] + q.half();
  return make_grid_box(field.d, field.mesh, half);
}

// Positive 4-adjacent flood from the positive cells of sup-norm <= c_src.
// Returns the largest sup-norm reached (-1 when no source cell is positive)
// and leaves the reached set marked in ws for window queries.
int positive_flood_sup(const CellMask& m, int c_src, Scratch& ws) {
  const GridGeom& g = m.geom;
  const std::int64_t count = g.count();
  ws.begin(static_cast<std::size_t>(count));
  int best = -1;
  std::size_t head = 0;
  for (std::int64_t i = 0; i < count; ++i) {
    if (!m.bits[static_cast<std::size_t>(i)]) continue;
    const Coords c = g.cell(i);
    int sup = 0;
    for (int a = 0; a < g.d; ++a) sup = std::max(sup, std::abs(c[a]));
    if (sup > c_src) continue;
    if (!ws.visit(i)) continue;
    ws.queue.push_back(i);
    best = std::max(best, sup);
  }
  while (head < ws.queue.size()) {
    const std::int64_t i = ws.queue[head++];
    const Coords c = g.cell(i);
    for (int a = 0; a < g.d; ++a) {
      for (int dir = -1; dir <= 1; dir += 2) {
        Coords nc = c;
        nc[a] += dir;
        if (nc[a] < -g.half[a] || nc[a] > g.half[a]) continue;
        const std::int64_t j = g.index(nc);
        if (!m.bits[static_cast<std::size_t>(j)] || !ws.visit(j)) continue;
        ws.queue.push_back(j);
        int sup = 0;
        for (int b = 0; b < g.d; ++b) sup = std::max(sup, std::abs(nc[b]));
        best = std::max(best, sup);
      }
    }
  }
  return best;
}

// Any flood-reached cell inside the rect [lo, hi] clipped to the grid.
bool window_hit(const GridGeom& g, const Scratch& ws, Coords lo, Coords hi) {
  for (int a = 0; a < g.d; ++a) {
    lo[a] = std::max(lo[a], -g.half[a]);
    hi[a] = std::min(hi[a], g.half[a]);
    if (lo[a] > hi[a]) return false;
  }
  Coords c = lo;
  while (true) {
    if (ws.seen(g.index(c))) return true;
    int a = g.d - 1;
    while (a >= 0 && c[a] == hi[a]) {
      c[a] = lo[a];
      --a;
    }
    if (a < 0) return false;
    ++c[a];
  }
}

// Integer statistic rows per replica, reduced to exact sums and sums of
// squares; the reductions are order-free, so the result is worker-invariant.
template <class Fn>
void replica_rows(std::uint64_t n, std::uint64_t seed, int workers, std::size_t n_stats,
                  std::vector<std::int64_t>& sum, std::vector<std::int64_t>& sum_sq, Fn&& fn) {
  std::vector<std::int64_t> rows(n * n_stats, 0);
  for_each_replica(n, seed, workers,
                   [&](std::uint64_t i, Rng& rng) { fn(i, rng, &rows[i * n_stats]); });
  sum.assign(n_stats, 0);
  sum_sq.assign(n_stats, 0);
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n_stats; ++j) {
      const std::int64_t v = rows[i * n_stats + j];
      sum[j] += v;
      sum_sq[j] += v * v;
    }
  }
}

Estimate stat_estimate(std::int64_t sum, std::int64_t sum_sq, std::uint64_t n,
                       std::uint64_t seed) {
  Estimate est;
  est.n = n;
  est.seed = seed;
  if (n == 0) return est;
  const double mean = static_cast<double>(sum) / static_cast<double>(n);
  double var = static_cast<double>(sum_sq) / static_cast<double>(n) - mean * mean;
  if (var < 0.0) var = 0.0;
  est.mean = mean;
  est.se = std::sqrt(var / static_cast<double>(n));
  return est;
}

double rel_se(const Estimate& e) { return e.mean != 0.0 ? e.se / std::abs(e.mean) : 0.0; }

// ||q - q_cut||_2 over the window of the full kernel.
double kernel_tail_l2(const Kernel& full, const Kernel& cut) {
  NeumaierSum acc;
  const std::int64_t count = full.geom.count();
  for (std::int64_t i = 0; i < count; ++i) {
    const Coords u = full.geom.cell(i);
    const double c = cut.geom.contains(u) ? cut.values[static_cast<std::size_t>(cut.geom.index(u))]
                                          : 0.0;
    const double dv = full.values[static_cast<std::size_t>(i)] - c;
    acc.add(dv * dv);
  }
  return std::sqrt(acc.value() * std::pow(full.geom.mesh, full.geom.d));
}

struct RatioTerm {
  double R;
  double value;
  double sigma;
};

// Stability verdict for fitted existential constants: spread across the R
// sweep must stay within a factor 2, judged at 3 sigma.
void finish_ratio_check(oracle::CheckResult& r, const std::vector<RatioTerm>& ratios, bool upper) {
  double lo = 0.0, lo_sigma = 0.0, hi = 0.0, hi_sigma = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const RatioTerm& t = ratios[i];
    if (i == 0 || t.value < lo) lo = t.value, lo_sigma = t.sigma;
    if (i == 0 || t.value > hi) hi = t.value, hi_sigma = t.sigma;
  }
  r.terms.push_back({"c_fit", upper ? hi : lo, upper ? hi_sigma : lo_sigma});
  r.terms.push_back({"ratio_min", lo, lo_sigma});
  r.terms.push_back({"ratio_max", hi, hi_sigma});
  if (ratios.size() < 2) {
    r.margin_sigma = kMcMarginClamp;
    r.holds = true;
    return;
  }
  const double slack = 2.0 * lo - hi;
  const double sigma = std::sqrt(4.0 * lo_sigma * lo_sigma + hi_sigma * hi_sigma);
  r.margin_sigma = mc_margin(slack, sigma);
  r.holds = r.margin_sigma >= -3.0;
}

// Shared replica loop: fresh excursion mask per replica, FFT-backed.
template <class Fn>
void for_each_mask(const Kernel& q, double ell, const GridGeom& field, std::uint64_t n,
                   std::uint64_t seed, int workers, Fn&& fn) {
  const GridGeom noise = noise_geom_for_field(q, field);
  const FieldSampler sampler(q, noise);
  for_each_replica(n, seed, workers, [&](std::uint64_t i, Rng& rng) {
    white_noise_fill(noise, rng, tl_noise);
    sampler.sample(tl_noise, tl_field);
    excursion_fill(tl_field, ell, tl_mask);
    fn(i, tl_mask);
  });
}

Estimate mask_indicator_estimate(const Kernel& q, double ell, const GridGeom& field,
                                 std::uint64_t n, std::uint64_t seed, int workers,
                                 bool (*event)(const CellMask&, double, double, Scratch&),
                                 double p0, double p1) {
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  std::vector<std::uint8_t> hit(n, 0);
  for_each_mask(q, ell, field, n, seed, workers,
                [&](std::uint64_t i, const CellMask& m) { hit[i] = event(m, p0, p1, tl_ws) ? 1 : 0; });
  std::uint64_t count = 0;
  for (std::uint8_t h : hit) count += h;
  Estimate est;
  est.mean = static_cast<double>(count) / static_cast<double>(n);
  est.se = binomial_se(est.mean, n);
  est.n = n;
  est.seed = seed;
  return est;
}

// Wrappers with the (mask, a, b, scratch) shape used above.
bool ev_crossing(const CellMask& m, double k, double R, Scratch& ws) {
  return field_crossing_event(m, k, R, ws);
}
bool ev_one_arm(const CellMask& m, double r, double R, Scratch& ws) {
  return field_one_arm_event(m, r, R, ws);
}
bool ev_two_arm(const CellMask& m, double r, double R, Scratch& ws) {
  return field_two_arm_event(m, r, R, ws);
}
bool ev_two_arm_matched(const CellMask& m, double r, double R, Scratch& ws) {
  return field_two_arm_matched_event(m, r, R, ws);
}

// Mean count of lattice targets v + Λ_{6r}, v in the r-lattice of Λ_{R+2r},
// linked to Λ_{r_src} by a positive path. One flood serves every target.
Estimate link_sum_estimate(const Kernel& q, double ell, double r_src, double R, std::uint64_t n,
                           std::uint64_t seed, int workers) {
  const double r = q.support_radius;
  const double mesh = q.geom.mesh;
  const GridGeom field = box_field_geom(q, R + 8.0 * r, R + 8.0 * r);
  const int c_src = cells_for_length(mesh, r_src);
  const int c_tgt = cells_for_length(mesh, 6.0 * r);
  const int jmax = static_cast<int>(std::floor((R + 2.0 * r) / r + 1e-9));
  std::vector<Coords> centers;
  Coords j{};
  for (int a = 0; a < field.d; ++a) j[a] = -jmax;
  while (true) {
    Coords c{};
    for (int a = 0; a < field.d; ++a)
      c[a] = static_cast<int>(std::llround(static_cast<double>(j[a]) * r / mesh));
    centers.push_back(c);
    int a = field.d - 1;
    while (a >= 0 && j[a] == jmax) {
      j[a] = -jmax;
      --a;
    }
    if (a < 0) break;
    ++j[a];
  }
  std::vector<std::int64_t> sum, sum_sq;
  const GridGeom noise = noise_geom_for_field(q, field);
  const FieldSampler sampler(q, noise);
  replica_rows(n, seed, workers, 1, sum, sum_sq, [&](std::uint64_t, Rng& rng, std::int64_t* row) {
    white_noise_fill(noise, rng, tl_noise);
    sampler.sample(tl_noise, tl_field);
    excursion_fill(tl_field, ell, tl_mask);
    positive_flood_sup(tl_mask, c_src, tl_ws);
    std::int64_t hits = 0;
    for (const Coords& c : centers) {
      Coords lo = c, hi = c;
      for (int a = 0; a < field.d; ++a) lo[a] -= c_tgt, hi[a] += c_tgt;
      if (window_hit(field, tl_ws, lo, hi)) ++hits;
    }
    row[0] = hits;
  });
  return stat_estimate(sum[0], sum_sq[0], n, seed);
}

// Mean count of indices i in [2, R/r] whose arm event A_1(2r, ir) occurs;
// the flood max-sup makes the indicators monotone in i.
Estimate arm_sum_estimate(const Kernel& q, double ell, double R, std::uint64_t n,
                          std::uint64_t seed, int workers) {
  const double r = q.support_radius;
  const double mesh = q.geom.mesh;
  const GridGeom field = box_field_geom(q, R, R);
  const int c_src = cells_for_length(mesh, 2.0 * r);
  const int imax = static_cast<int>(std::floor(R / r + 1e-9));
  std::vector<int> rings;
  for (int i = 2; i <= imax; ++i) rings.push_back(cells_for_length(mesh, i * r));
  std::vector<std::int64_t> sum, sum_sq;
  const GridGeom noise = noise_geom_for_field(q, field);
  const FieldSampler sampler(q, noise);
  replica_rows(n, seed, workers, 1, sum, sum_sq, [&](std::uint64_t, Rng& rng, std::int64_t* row) {
    white_noise_fill(noise, rng, tl_noise);
    sampler.sample(tl_noise, tl_field);
    excursion_fill(tl_field, ell, tl_mask);
    const int top = positive_flood_sup(tl_mask, c_src, tl_ws);
    std::int64_t cnt = 0;
    for (int ring : rings)
      if (top >= ring) ++cnt;
    row[0] = cnt;
  });
  return stat_estimate(sum[0], sum_sq[0], n, seed);
}

std::uint64_t indicator_count(const std::vector<std::uint8_t>& hits) {
  std::uint64_t c = 0;
  for (std::uint8_t h : hits) c += h;
  return c;
}

}  // namespace

const char* subset_name(BoxSubset s) {
  switch (s) {
    case BoxSubset::all: return "all";
    case BoxSubset::right_half: return "right_half";
    case BoxSubset::quarter: return "quarter";
  }
  return "unknown";
}

const char* gaussian_bound_name(GaussianBound b) {
  switch (b) {
    case GaussianBound::ubgf1: return "ubgf1";
    case GaussianBound::ubgf2: return "ubgf2";
    case GaussianBound::lbgf1: return "lbgf1";
    case GaussianBound::lbgf2: return "lbgf2";
  }
  return "unknown";
}

Estimate gaussian_crossing_estimate(const Kernel& q, double ell, double k, double R,
                                    std::uint64_t n, std::uint64_t seed, int workers) {
  require_that(k > 0.0 && R > 0.0, ErrorKind::invalid_parameter, "crossing box must be nonempty");
  return mask_indicator_estimate(q, ell, box_field_geom(q, R, k * R), n, seed, workers,
                                 &ev_crossing, k, R);
}

Estimate gaussian_one_arm_estimate(const Kernel& q, double ell, double r_in, double R,
                                   std::uint64_t n, std::uint64_t seed, int workers) {
  require_that(r_in >= 0.0 && R > 0.0, ErrorKind::invalid_parameter, "arm radii must be sane");
  require_that(cells_for_length(q.geom.mesh, r_in) <= cells_for_length(q.geom.mesh, R),
               ErrorKind::invalid_parameter, "inner radius exceeds the outer one");
  return mask_indicator_estimate(q, ell, box_field_geom(q, R, R), n, seed, workers, &ev_one_arm,
                                 r_in, R);
}

Estimate gaussian_two_arm_estimate(const Kernel& q, double ell, double r_in, double R,
                                   std::uint64_t n, std::uint64_t seed, int workers) {
  require_that(r_in >= 0.0 && R > 0.0, ErrorKind::invalid_parameter, "arm radii must be sane");
  require_that(cells_for_length(q.geom.mesh, r_in) <= cells_for_length(q.geom.mesh, R),
               ErrorKind::invalid_parameter, "inner radius exceeds the outer one");
  return mask_indicator_estimate(q, ell, box_field_geom(q, R, R), n, seed, workers, &ev_two_arm,
                                 r_in, R);
}

std::vector<Estimate> gaussian_one_arm_sweep(const Kernel& q, double ell, double r_in,
                                             const std::vector<double>& R_list, std::uint64_t n,
                                             std::uint64_t seed, int workers) {
  require_that(!R_list.empty(), ErrorKind::invalid_parameter, "needs at least one R");
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  const double mesh = q.geom.mesh;
  const int c_src = cells_for_length(mesh, r_in);
  std::vector<int> rings;
  for (std::size_t j = 0; j < R_list.size(); ++j) {
    require_that(j == 0 || R_list[j] > R_list[j - 1], ErrorKind::invalid_parameter,
                 "R list must increase");
    const int ring = cells_for_length(mesh, R_list[j]);
    require_that(ring > c_src, ErrorKind::invalid_parameter, "sweep radius inside the source box");
    rings.push_back(ring);
  }
  const GridGeom field = box_field_geom(q, R_list.back(), R_list.back());
  const GridGeom noise = noise_geom_for_field(q, field);
  const FieldSampler sampler(q, noise);
  std::vector<std::int64_t> sum, sum_sq;
  replica_rows(n, seed, workers, rings.size(), sum, sum_sq,
               [&](std::uint64_t, Rng& rng, std::int64_t* row) {
                 white_noise_fill(noise, rng, tl_noise);
                 sampler.sample(tl_noise, tl_field);
                 excursion_fill(tl_field, ell, tl_mask);
                 const int top = positive_flood_sup(tl_mask, c_src, tl_ws);
                 for (std::size_t j = 0; j < rings.size(); ++j) row[j] = top >= rings[j] ? 1 : 0;
               });
  std::vector<Estimate> out;
  for (std::size_t j = 0; j < rings.size(); ++j) {
    Estimate e;
    e.mean = static_cast<double>(sum[j]) / static_cast<double>(n);
    e.se = binomial_se(e.mean, n);
    e.n = n;
    e.seed = seed;
    out.push_back(e);
  }
  return out;
}

std::vector<Estimate> gaussian_theta_curve(const Kernel& q, const std::vector<double>& ells,
                                           double R, std::uint64_t n, std::uint64_t seed,
                                           int workers) {
  require_that(!ells.empty(), ErrorKind::invalid_parameter, "needs at least one level");
  require_that(R > 1.0, ErrorKind::invalid_parameter, "needs R > 1");
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  const GridGeom field = box_field_geom(q, R, R);
  const GridGeom noise = noise_geom_for_field(q, field);
  const FieldSampler sampler(q, noise);
  std::vector<std::int64_t> sum, sum_sq;
  replica_rows(n, seed, workers, ells.size(), sum, sum_sq,
               [&](std::uint64_t, Rng& rng, std::int64_t* row) {
                 white_noise_fill(noise, rng, tl_noise);
                 sampler.sample(tl_noise, tl_field);
                 for (std::size_t j = 0; j < ells.size(); ++j) {
                   excursion_fill(tl_field, ells[j], tl_mask);
                   row[j] = field_one_arm_event(tl_mask, 1.0, R, tl_ws) ? 1 : 0;
                 }
               });
  std::vector<Estimate> out;
  for (std::size_t j = 0; j < ells.size(); ++j) {
    Estimate e;
    e.mean = static_cast<double>(sum[j]) / static_cast<double>(n);
    e.se = binomial_se(e.mean, n);
    e.n = n;
    e.seed = seed;
    out.push_back(e);
  }
  return out;
}

Estimate gaussian_crossing_derivative(const Kernel& q, double ell, double k, double R, double h,
                                      std::uint64_t n, std::uint64_t seed, int workers) {
  require_that(h > 0.0, ErrorKind::invalid_parameter, "difference step must be positive");
  require_that(k > 0.0 && R > 0.0, ErrorKind::invalid_parameter, "crossing box must be nonempty");
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  const GridGeom field = box_field_geom(q, R, k * R);
  const GridGeom noise = noise_geom_for_field(q, field);
  const FieldSampler sampler(q, noise);
  std::vector<std::uint8_t> flip(n, 0);
  for_each_replica(n, seed, workers, [&](std::uint64_t i, Rng& rng) {
    white_noise_fill(noise, rng, tl_noise);
    sampler.sample(tl_noise, tl_field);
    excursion_fill(tl_field, ell + h, tl_mask);
    const bool up = field_crossing_event(tl_mask, k, R, tl_ws);
    // the event increases in the level, so no flip can occur when up fails
    bool down = false;
    if (up) {
      excursion_fill(tl_field, ell - h, tl_mask);
      down = field_crossing_event(tl_mask, k, R, tl_ws);
    }
    flip[i] = (up && !down) ? 1 : 0;
  });
  const double p = static_cast<double>(indicator_count(flip)) / static_cast<double>(n);
  Estimate est;
  est.mean = p / (2.0 * h);
  est.se = binomial_se(p, n) / (2.0 * h);
  est.n = n;
  est.seed = seed;
  return est;
}

oracle::CheckResult check_field_two_arm(const Kernel& q, double r, double R, double ell,
                                        std::uint64_t n, std::uint64_t seed, int workers) {
  require_that(r >= 0.0 && R > r, ErrorKind::invalid_parameter, "needs 0 <= r < R");
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  const GridGeom field = box_field_geom(q, R, R);
  const Estimate one =
      mask_indicator_estimate(q, ell, field, n, subseed(seed, 1), workers, &ev_one_arm, r, R);
  const Estimate two = mask_indicator_estimate(q, ell, field, n, subseed(seed, 2), workers,
                                               &ev_two_arm_matched, r, R);
  const double rhs = one.mean * one.mean;
  const double slack = rhs - two.mean;
  const double sigma =
      std::sqrt(two.se * two.se + 4.0 * one.mean * one.mean * one.se * one.se);
  oracle::CheckResult rep;
  rep.check = "two-arm-square-field";
  rep.terms.push_back({"lhs", two.mean, two.se});
  rep.terms.push_back({"rhs", rhs, 2.0 * one.mean * one.se});
  rep.terms.push_back({"one_arm", one.mean, one.se});
  rep.terms.push_back({"slack", slack, sigma});
  rep.margin_sigma = mc_margin(slack, sigma);
  rep.holds = rep.margin_sigma >= -3.0;
  return rep;
}

oracle::CheckResult check_truncation(const Kernel& q, const std::vector<double>& r_list, double k,
                                     double R, double ell, std::uint64_t n, std::uint64_t seed,
                                     int workers) {
  require_that(!r_list.empty(), ErrorKind::invalid_parameter, "needs at least one radius");
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  require_that(k > 0.0 && R > 0.0, ErrorKind::invalid_parameter, "crossing box must be nonempty");
  for (std::size_t i = 0; i < r_list.size(); ++i) {
    require_that(r_list[i] > 0.0, ErrorKind::invalid_parameter, "radii must be positive");
    require_that(i == 0 || r_list[i] > r_list[i - 1], ErrorKind::invalid_parameter,
                 "radius list must increase");
  }
  const std::size_t m = r_list.size();
  std::vector<Kernel> cuts;
  std::vector<double> tails;
  for (double rc : r_list) {
    cuts.push_back(truncate_kernel(q, rc));
    tails.push_back(kernel_tail_l2(q, cuts.back()));
  }
  const GridGeom field = box_field_geom(q, R, k * R);
  const GridGeom noise_full = noise_geom_for_field(q, field);
  const FieldSampler sampler_full(q, noise_full);
  std::vector<GridGeom> noise_cut;
  std::vector<std::unique_ptr<FieldSampler>> sampler_cut;
  for (const Kernel& qc : cuts) {
    noise_cut.push_back(noise_geom_for_field(qc, field));
    sampler_cut.push_back(std::make_unique<FieldSampler>(qc, noise_cut.back()));
  }

  // stats: per radius, counts of one-sided disagreements with the full field
  std::vector<std::int64_t> sum, sum_sq;
  replica_rows(n, seed, workers, 2 * m, sum, sum_sq,
               [&](std::uint64_t, Rng& rng, std::int64_t* row) {
                 white_noise_fill(noise_full, rng, tl_noise);
                 sampler_full.sample(tl_noise, tl_field);
                 excursion_fill(tl_field, ell, tl_mask);
                 const bool y = field_crossing_event(tl_mask, k, R, tl_ws);
                 for (std::size_t i = 0; i < m; ++i) {
                   // the truncated field reads the central block of the same noise
                   tl_noise_sub.geom = noise_cut[i];
                   tl_noise_sub.w.resize(static_cast<std::size_t>(noise_cut[i].count()));
                   const std::int64_t cnt = noise_cut[i].count();
                   for (std::int64_t c = 0; c < cnt; ++c) {
                     tl_noise_sub.w[static_cast<std::size_t>(c)] =
                         tl_noise.w[static_cast<std::size_t>(noise_full.index(noise_cut[i].cell(c)))];
                   }
                   sampler_cut[i]->sample(tl_noise_sub, tl_field);
                   excursion_fill(tl_field, ell, tl_mask);
                   const bool yc = field_crossing_event(tl_mask, k, R, tl_ws);
                   row[2 * i] = (y && !yc) ? 1 : 0;
                   row[2 * i + 1] = (!y && yc) ? 1 : 0;
                 }
               });

  oracle::CheckResult rep;
  rep.check = "truncation";
  std::vector<double> disc(m, 0.0), disc_se(m, 0.0);
  bool ok = true;
  double min_margin = kMcMarginClamp;
  for (std::size_t i = 0; i < m; ++i) {
    const double pp = static_cast<double>(sum[2 * i]) / static_cast<double>(n);
    const double pm = static_cast<double>(sum[2 * i + 1]) / static_cast<double>(n);
    const double diff = pp - pm;
    double var = pp + pm - diff * diff;
    if (var < 0.0) var = 0.0;
    disc[i] = std::abs(diff);
    disc_se[i] = std::sqrt(var / static_cast<double>(n));
    rep.terms.push_back({"discrepancy_r" + fmt_num(r_list[i]), disc[i], disc_se[i]});
    rep.terms.push_back({"tail_r" + fmt_num(r_list[i]), tails[i], 0.0});
    if (tails[i] == 0.0 && sum[2 * i] + sum[2 * i + 1] != 0) {
      ok = false;  // identical kernels cannot disagree
      min_margin = -kMcMarginClamp;
    }
  }
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const double slack = disc[i] - disc[i + 1];
    const double sigma = std::sqrt(disc_se[i] * disc_se[i] + disc_se[i + 1] * disc_se[i + 1]);
    min_margin = std::min(min_margin, mc_margin(slack, sigma));
    const bool tail_ok = tails[i + 1] < tails[i] || (tails[i] == 0.0 && tails[i + 1] == 0.0);
    if (!tail_ok) {
      ok = false;
      min_margin = -kMcMarginClamp;
    }
  }
  rep.margin_sigma = min_margin;
  rep.holds = ok && min_margin >= -3.0;
  return rep;
}

oracle::CheckResult check_gaussian_russo(const Kernel& q, double s, double R, double ell,
                                         std::uint64_t n, std::uint64_t seed, int workers) {
  require_that(s > 0.0 && R > 0.0, ErrorKind::invalid_parameter, "geometry must be positive");
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  const int d = q.geom.d;
  const double mesh = q.geom.mesh;
  const double r = q.support_radius;
  const int kh = q.half();
  const GridGeom field = box_field_geom(q, R, R);
  const int bc_guess = static_cast<int>(std::llround(s / mesh));
  require_that(bc_guess >= 1, ErrorKind::invalid_parameter, "box scale below the mesh");
  Coords ehalf{};
  for (int a = 0; a < d; ++a) ehalf[a] = field.half[a] + kh + 2 * bc_guess;
  const GridGeom noise = make_grid_box(d, mesh, ehalf);
  const BoxPartition part = partition_for(noise, s);
  const std::int64_t n_boxes = part.count();
  Coords flo{}, fhi{};
  for (int a = 0; a < d; ++a) flo[a] = -field.half[a], fhi[a] = field.half[a];
  std::vector<std::uint8_t> active(static_cast<std::size_t>(n_boxes), 0);
  std::int64_t n_active = 0;
  for (std::int64_t b = 0; b < n_boxes; ++b) {
    active[static_cast<std::size_t>(b)] = box_near_rect(part, noise, b, flo, fhi, kh) ? 1 : 0;
    n_active += active[static_cast<std::size_t>(b)];
  }
  const double sd = std::pow(mesh, 0.5 * d);

  // stats: 0 = derivative flip, 1 = base indicator, 2 = total influence
  // flips, 3.. = per-box flips
  std::vector<std::int64_t> sum, sum_sq;
  replica_rows(
      n, seed, workers, static_cast<std::size_t>(3 + n_boxes), sum, sum_sq,
      [&](std::uint64_t, Rng& rng, std::int64_t* row) {
        white_noise_fill(noise, rng, tl_noise);
        tl_field.geom = field;
        tl_field.f.resize(static_cast<std::size_t>(field.count()));
        for (std::int64_t i = 0; i < field.count(); ++i) {
          tl_field.f[static_cast<std::size_t>(i)] =
              field_value_at(q, noise, tl_noise.w.data(), field.cell(i));
        }
        excursion_fill(tl_field, ell + kLevelStep, tl_mask_fd);
        const bool up = field_crossing_event(tl_mask_fd, 1.0, R, tl_ws);
        bool down = false;
        if (up) {
          excursion_fill(tl_field, ell - kLevelStep, tl_mask_fd);
          down = field_crossing_event(tl_mask_fd, 1.0, R, tl_ws);
        }
        row[0] = (up && !down) ? 1 : 0;
        excursion_fill(tl_field, ell, tl_mask);
        const bool y = field_crossing_event(tl_mask, 1.0, R, tl_ws);
        row[1] = y ? 1 : 0;
        for (std::int64_t b = 0; b < n_boxes; ++b) {
          const Coords bcrd = part.box_coords(b);
          Coords blo{}, bhi{};
          std::size_t cells = 1;
          for (int a = 0; a < d; ++a) {
            blo[a] = part.cell_lo(bcrd, a, noise);
            bhi[a] = part.cell_hi(bcrd, a, noise);
            cells *= static_cast<std::size_t>(bhi[a] - blo[a] + 1);
          }
          tl_box_noise.resize(cells);
          for (double& v : tl_box_noise) v = sd * rng.next_normal();
          if (!active[static_cast<std::size_t>(b)]) {
            row[3 + b] = 0;  // kernel window misses the event region: exact locality
            continue;
          }
          // patch the event window of this box and re-evaluate
          tl_changed.clear();
          Coords xlo{}, xhi{};
          bool empty = false;
          for (int a = 0; a < d; ++a) {
            xlo[a] = std::max(blo[a] - kh, -field.half[a]);
            xhi[a] = std::min(bhi[a] + kh, field.half[a]);
            if (xlo[a] > xhi[a]) empty = true;
          }
          bool yb = y;
          if (!empty) {
            Coords x = xlo;
            while (true) {
              double delta = 0.0;
              Coords ulo{}, uhi{};
              for (int a = 0; a < d; ++a) {
                ulo[a] = std::max(blo[a], x[a] - kh);
                uhi[a] = std::min(bhi[a], x[a] + kh);
              }
              Coords u = ulo;
              while (true) {
                std::size_t off = 0;
                for (int a = 0; a < d; ++a)
                  off = off * static_cast<std::size_t>(bhi[a] - blo[a] + 1) +
                        static_cast<std::size_t>(u[a] - blo[a]);
                Coords rel{};
                for (int a = 0; a < d; ++a) rel[a] = x[a] - u[a];
                delta += q.values[static_cast<std::size_t>(q.geom.index(rel))] *
                         (tl_box_noise[off] - tl_noise.w[static_cast<std::size_t>(noise.index(u))]);
                int a = d - 1;
                while (a >= 0 && u[a] == uhi[a]) {
                  u[a] = ulo[a];
                  --a;
                }
                if (a < 0) break;
                ++u[a];
              }
              const std::int64_t xi = field.index(x);
              const std::uint8_t nb =
                  tl_field.f[static_cast<std::size_t>(xi)] + delta + ell >= 0.0 ? 1 : 0;
              if (nb != tl_mask.bits[static_cast<std::size_t>(xi)]) {
                tl_mask.bits[static_cast<std::size_t>(xi)] = nb;
                tl_changed.push_back(xi);
              }
              int a = d - 1;
              while (a >= 0 && x[a] == xhi[a]) {
                x[a] = xlo[a];
                --a;
              }
              if (a < 0) break;
              ++x[a];
            }
            if (!tl_changed.empty()) yb = field_crossing_event(tl_mask, 1.0, R, tl_ws);
            for (std::int64_t xi : tl_changed) {
              tl_mask.bits[static_cast<std::size_t>(xi)] =
                  tl_field.f[static_cast<std::size_t>(xi)] + ell >= 0.0 ? 1 : 0;
            }
          }
          row[3 + b] = (yb != y) ? 1 : 0;
        }
        std::int64_t total = 0;
        for (std::int64_t b = 0; b < n_boxes; ++b) total += row[3 + b];
        row[2] = total;
      });

  const double p_flip = static_cast<double>(sum[0]) / static_cast<double>(n);
  const double lhs = p_flip / (2.0 * kLevelStep);
  const double lhs_se = binomial_se(p_flip, n) / (2.0 * kLevelStep);
  const Estimate infl_total = stat_estimate(sum[2], sum_sq[2], n, seed);
  double max_infl = 0.0, max_outside = 0.0, min_infl = 1.0;
  for (std::int64_t b = 0; b < n_boxes; ++b) {
    const double rate = static_cast<double>(sum[3 + b]) / static_cast<double>(n);
    if (active[static_cast<std::size_t>(b)]) {
      max_infl = std::max(max_infl, rate);
      min_infl = std::min(min_infl, rate);
    } else {
      max_outside = std::max(max_outside, rate);
    }
  }
  const double prefactor = std::min(1.0, std::pow(s / r, d)) / q.l2();
  oracle::CheckResult rep;
  rep.check = "gaussian-russo";
  rep.terms.push_back({"lhs_derivative", lhs, lhs_se});
  rep.terms.push_back({"sum_influence", infl_total.mean, infl_total.se});
  rep.terms.push_back({"prefactor", prefactor, 0.0});
  rep.terms.push_back({"max_influence", max_infl, 0.0});
  rep.terms.push_back({"min_influence", min_infl, 0.0});
  rep.terms.push_back({"max_outside_influence", max_outside, 0.0});
  rep.terms.push_back({"boxes_total", static_cast<double>(n_boxes), 0.0});
  rep.terms.push_back({"boxes_active", static_cast<double>(n_active), 0.0});
  if (infl_total.mean > 0.0) {
    const double c_fit = lhs / (prefactor * infl_total.mean);
    const double c_se =
        c_fit * std::sqrt((lhs > 0.0 ? (lhs_se / lhs) * (lhs_se / lhs) : 0.0) +
                          rel_se(infl_total) * rel_se(infl_total));
    rep.terms.push_back({"c_fit", c_fit, c_se});
  }
  const double m_lhs = mc_margin(lhs, lhs_se);
  const double m_sum = mc_margin(infl_total.mean, infl_total.se);
  rep.margin_sigma = std::min(m_lhs, m_sum);
  rep.holds = sum[0] > 0 && sum[2] > 0 && max_outside == 0.0;
  if (max_outside != 0.0) rep.margin_sigma = -kMcMarginClamp;
  return rep;
}

oracle::CheckResult check_lbderiv(const Kernel& q, double s, double k, double R, double ell,
                                  std::uint64_t n, std::uint64_t seed, int workers,
                                  BoxSubset subset) {
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  FieldAlgoSpec spec;
  spec.algo = subset == BoxSubset::all
                  ? FieldAlgo::random_line
                  : (subset == BoxSubset::right_half ? FieldAlgo::left_line : FieldAlgo::level_line);
  spec.k = k;
  spec.R = R;
  spec.box_scale = s;
  const FieldProblem prob = make_field_problem(q, ell, spec);
  const double r = q.support_radius;
  const int d = prob.field_geom.d;
  const int margin = std::max(0, cells_for_length(q.geom.mesh, r) - 1);

  std::vector<std::uint8_t> member(static_cast<std::size_t>(prob.part.count()), 0);
  std::vector<Coords> complement;
  for (std::int64_t b = 0; b < prob.part.count(); ++b) {
    bool in = true;
    if (subset != BoxSubset::all) {
      Coords lo = prob.rect_lo, hi = prob.rect_hi;
      lo[0] = 0;
      if (subset == BoxSubset::quarter) lo[1] = 0;
      in = box_near_rect(prob.part, prob.noise_geom, b, lo, hi, margin);
    }
    member[static_cast<std::size_t>(b)] = in ? 1 : 0;
    if (!in) complement.push_back(prob.part.box_coords(b));
  }

  const Estimate deriv =
      gaussian_crossing_derivative(q, ell, k, R, kLevelStep, n, subseed(seed, 1), workers);
  const FieldRevealment rev = measure_field_revealment(prob, n, subseed(seed, 2), workers);
  double max_rev = 0.0, max_rev_se = 0.0;
  for (std::int64_t b = 0; b < prob.part.count(); ++b) {
    if (!member[static_cast<std::size_t>(b)]) continue;
    const double v = rev.rev(static_cast<std::size_t>(b));
    if (v > max_rev) max_rev = v, max_rev_se = rev.rev_se(static_cast<std::size_t>(b));
  }

  const FieldSampler sampler(q, prob.noise_geom);
  auto paired_counts = [&](std::uint64_t sub, std::int64_t& y1, std::int64_t& y2,
                           std::int64_t& y12, std::int64_t& flips) {
    std::vector<std::int64_t> sum, sum_sq;
    replica_rows(n, sub, workers, 3, sum, sum_sq, [&](std::uint64_t, Rng& rng, std::int64_t* row) {
      white_noise_fill(prob.noise_geom, rng, tl_noise);
      const NoiseGrid other = resample_boxes(tl_noise, prob.part, complement, rng);
      sampler.sample(tl_noise, tl_field);
      excursion_fill(tl_field, ell, tl_mask);
      const bool a = prob.direct_event(tl_mask, tl_ws);
      sampler.sample(other, tl_field);
      excursion_fill(tl_field, ell, tl_mask);
      const bool b = prob.direct_event(tl_mask, tl_ws);
      row[0] = a ? 1 : 0;
      row[1] = b ? 1 : 0;
      row[2] = (a && b) ? 1 : 0;
    });
    y1 = sum[0];
    y2 = sum[1];
    y12 = sum[2];
    flips = sum[0] + sum[1] - 2 * sum[2];
  };

  std::int64_t a1 = 0, a2 = 0, a12 = 0, aflips = 0;
  paired_counts(subseed(seed, 3), a1, a2, a12, aflips);
  const double m2 = static_cast<double>(a12) / static_cast<double>(n);
  const double p_pair = static_cast<double>(a1 + a2) / (2.0 * static_cast<double>(n));
  const double v_paired = m2 - p_pair * p_pair;
  const double sigma_vp = binomial_se(m2, n) + 2.0 * p_pair * binomial_se(p_pair, n);

  const Estimate plain = gaussian_crossing_estimate(q, ell, k, R, n, subseed(seed, 4), workers);
  const double total_var = plain.mean * (1.0 - plain.mean);
  const double sigma_total =
      std::abs(1.0 - 2.0 * plain.mean) * plain.se + plain.se * plain.se;

  std::int64_t c1 = 0, c2 = 0, c12 = 0, cflips = 0;
  paired_counts(subseed(seed, 5), c1, c2, c12, cflips);
  const double p_flip_c = static_cast<double>(cflips) / static_cast<double>(n);
  const double within = p_flip_c / 2.0;
  const double sigma_within = binomial_se(p_flip_c, n) / 2.0;
  const double v_ltv = total_var - within;
  const double sigma_vltv = std::sqrt(sigma_total * sigma_total + sigma_within * sigma_within);

  const double diff = v_paired - v_ltv;
  const double sigma_diff = std::sqrt(sigma_vp * sigma_vp + sigma_vltv * sigma_vltv);
  const double margin_consistency = mc_margin(-std::abs(diff), sigma_diff);

  const double prefactor = std::min(1.0, std::pow(s / r, d)) / q.l2();
  oracle::CheckResult rep;
  rep.check = "lbderiv";
  rep.terms.push_back({"lhs_derivative", deriv.mean, deriv.se});
  rep.terms.push_back({"max_revealment", max_rev, max_rev_se});
  rep.terms.push_back({"cond_var_paired", v_paired, sigma_vp});
  rep.terms.push_back({"cond_var_ltv", v_ltv, sigma_vltv});
  rep.terms.push_back({"within_pair", static_cast<double>(aflips) / (2.0 * static_cast<double>(n)),
                       sigma_within});
  rep.terms.push_back({"prefactor", prefactor, 0.0});
  rep.terms.push_back({"subset_boxes",
                       static_cast<double>(prob.part.count() - static_cast<std::int64_t>(complement.size())),
                       0.0});
  if (max_rev > 0.0 && v_paired > 0.0) {
    const double rhs_unit = prefactor * v_paired / max_rev;
    rep.terms.push_back({"rhs_unit", rhs_unit, 0.0});
    if (rhs_unit > 0.0) {
      const double c_fit = deriv.mean / rhs_unit;
      rep.terms.push_back({"c_fit", c_fit, 0.0});
    }
  }
  bool ok = margin_consistency >= -3.0 && mc_margin(v_paired, sigma_vp) >= -3.0;
  if (subset == BoxSubset::all && (aflips != 0 || cflips != 0)) ok = false;  // exact reduction
  rep.margin_sigma = std::min(margin_consistency, mc_margin(v_paired, sigma_vp));
  rep.holds = ok;
  return rep;
}

oracle::CheckResult check_ubgf(const Kernel& q, GaussianBound bound,
                               const GaussianBoundParams& params) {
  require_that(!params.R_list.empty(), ErrorKind::invalid_parameter, "needs at least one R");
  require_that(params.n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  require_that(params.k >= 1.0, ErrorKind::invalid_parameter, "aspect must be >= 1");
  const double r = q.support_radius;
  const int d = q.geom.d;
  oracle::CheckResult rep;
  rep.check = gaussian_bound_name(bound);

  if (bound == GaussianBound::ubgf1) {
    require_that(params.ell <= params.ell_prime, ErrorKind::invalid_parameter,
                 "levels must be ordered");
    require_that(r >= 1.0, ErrorKind::invalid_parameter, "kernel support must be >= 1");
    double min_margin = kMcMarginClamp;
    for (double R : params.R_list) {
      require_that(R >= r, ErrorKind::invalid_parameter, "needs R >= kernel support");
      FieldAlgoSpec spec;
      spec.algo = FieldAlgo::one_arm_growth;
      spec.R = R;
      spec.r_in = 1.0;
      const std::uint64_t rs = static_cast<std::uint64_t>(std::llround(R * 16));
      // two independent estimates at the upper level: one for each side
      const FieldProblem hi_prob = make_field_problem(q, params.ell_prime, spec);
      const FieldRevealment hi_lhs =
          measure_field_revealment(hi_prob, params.n, subseed(params.seed, rs + 1), params.workers);
      const FieldRevealment hi_rhs =
          measure_field_revealment(hi_prob, params.n, subseed(params.seed, rs + 2), params.workers);
      const FieldProblem lo_prob = make_field_problem(q, params.ell, spec);
      const FieldRevealment lo =
          measure_field_revealment(lo_prob, params.n, subseed(params.seed, rs + 3), params.workers);
      const Estimate links = link_sum_estimate(q, params.ell, 1.0, R, params.n,
                                               subseed(params.seed, rs + 4), params.workers);
      const double p_hi_a = hi_lhs.output_rate();
      const double p_hi_b = hi_rhs.output_rate();
      const double p_lo = lo.output_rate();
      const double se_hi_a = binomial_se(p_hi_a, params.n);
      const double se_hi_b = binomial_se(p_hi_b, params.n);
      const double se_lo = binomial_se(p_lo, params.n);
      const double lhs = p_hi_a - p_lo;
      const double lhs_se = std::sqrt(se_hi_a * se_hi_a + se_lo * se_lo);
      const double coef =
          std::pow(r, 0.5 * d) * (params.ell_prime - params.ell) / q.integral();
      const double inner = p_hi_b * links.mean;
      const double rhs = coef * std::sqrt(std::max(0.0, inner));
      double rhs_se = 0.0;
      if (inner > 0.0) {
        rhs_se = coef / (2.0 * std::sqrt(inner)) *
                 std::sqrt(links.mean * links.mean * se_hi_b * se_hi_b +
                           p_hi_b * p_hi_b * links.se * links.se);
      }
      const double slack = rhs - lhs;
      const double sigma = std::sqrt(lhs_se * lhs_se + rhs_se * rhs_se);
      const std::string tag = "_R" + fmt_num(R);
      rep.terms.push_back({"lhs" + tag, lhs, lhs_se});
      rep.terms.push_back({"rhs" + tag, rhs, rhs_se});
      rep.terms.push_back({"link_sum" + tag, links.mean, links.se});
      min_margin = std::min(min_margin, mc_margin(slack, sigma));
    }
    rep.margin_sigma = min_margin;
    rep.holds = min_margin >= -3.0;
    return rep;
  }

  std::vector<RatioTerm> ratios;
  for (double R : params.R_list) {
    const std::uint64_t rs = static_cast<std::uint64_t>(std::llround(R * 16));
    const Estimate deriv = gaussian_crossing_derivative(
        q, params.ell, params.k, R, params.h, params.n, subseed(params.seed, rs + 1),
        params.workers);
    if (bound == GaussianBound::ubgf2) {
      require_that(R >= 4.0 * r, ErrorKind::invalid_parameter, "needs R >= 4r");
      const GridGeom field = box_field_geom(q, R - 2.0 * r, R - 2.0 * r);
      const Estimate arm =
          d == 2 ? mask_indicator_estimate(q, params.ell, field, params.n,
                                           subseed(params.seed, rs + 2), params.workers,
                                           &ev_two_arm, 2.0 * r, R - 2.0 * r)
                 : mask_indicator_estimate(q, params.ell, field, params.n,
                                           subseed(params.seed, rs + 2), params.workers,
                                           &ev_one_arm, 2.0 * r, R - 2.0 * r);
      require_that(arm.mean > 0.0, ErrorKind::invalid_data,
                   "arm term vanished at this sample size");
      const double rhs_unit = std::pow(R, 0.5 * d) / q.integral() * std::sqrt(arm.mean);
      const double ratio = deriv.mean / rhs_unit;
      const double rel = std::sqrt(rel_se(deriv) * rel_se(deriv) +
                                   0.25 * rel_se(arm) * rel_se(arm));
      ratios.push_back({R, ratio, std::abs(ratio) * rel});
      rep.terms.push_back({"ratio_R" + fmt_num(R), ratio, std::abs(ratio) * rel});
      rep.terms.push_back({"derivative_R" + fmt_num(R), deriv.mean, deriv.se});
      rep.terms.push_back({"arm_R" + fmt_num(R), arm.mean, arm.se});
    } else if (bound == GaussianBound::lbgf1) {
      require_that(R >= 8.0 * r, ErrorKind::invalid_parameter, "needs R >= 8r");
      FieldAlgoSpec spec;
      spec.algo = FieldAlgo::left_line;
      spec.k = params.k;
      spec.R = R;
      const FieldProblem prob = make_field_problem(q, params.ell, spec);
      const FieldRevealment cross =
          measure_field_revealment(prob, params.n, subseed(params.seed, rs + 2), params.workers);
      const double p = cross.output_rate();
      const double p_se = binomial_se(p, params.n);
      const Estimate arms =
          arm_sum_estimate(q, params.ell, R, params.n, subseed(params.seed, rs + 3), params.workers);
      require_that(p > 0.0 && p < 1.0 && arms.mean > 0.0, ErrorKind::invalid_data,
                   "lower-bound terms degenerate at this sample size");
      const double denom = (r / R) * arms.mean;
      const double rhs_unit = p * (1.0 - p) / (q.l2() * denom);
      const double ratio = deriv.mean / rhs_unit;
      const double rel =
          std::sqrt(rel_se(deriv) * rel_se(deriv) +
                    std::pow(std::abs(1.0 - 2.0 * p) * p_se / (p * (1.0 - p)), 2.0) +
                    rel_se(arms) * rel_se(arms));
      ratios.push_back({R, ratio, std::abs(ratio) * rel});
      rep.terms.push_back({"ratio_R" + fmt_num(R), ratio, std::abs(ratio) * rel});
      rep.terms.push_back({"crossing_R" + fmt_num(R), p, p_se});
      rep.terms.push_back({"arm_sum_R" + fmt_num(R), arms.mean, arms.se});
    } else {  // lbgf2
      require_that(d == 2, ErrorKind::unsupported_dimension, "two-arm form needs d = 2");
      require_that(R >= 8.0 * r, ErrorKind::invalid_parameter, "needs R >= 8r");
      const double kk = params.k;
      const Estimate hard = gaussian_crossing_estimate(q, params.ell, 1.0 / (8.0 * kk), kk * R,
                                                       params.n, subseed(params.seed, rs + 2),
                                                       params.workers);
      const Estimate easy = gaussian_crossing_estimate(q, params.ell, 8.0 * kk, R / 8.0, params.n,
                                                       subseed(params.seed, rs + 3),
                                                       params.workers);
      const GridGeom field = box_field_geom(q, R - 2.0 * r, R - 2.0 * r);
      const Estimate arm = mask_indicator_estimate(q, params.ell, field, params.n,
                                                   subseed(params.seed, rs + 4), params.workers,
                                                   &ev_two_arm, 2.0 * r, R - 2.0 * r);
      require_that(hard.mean > 0.0 && easy.mean < 1.0 && arm.mean > 0.0, ErrorKind::invalid_data,
                   "lower-bound terms degenerate at this sample size");
      const double rhs_unit = std::pow(hard.mean, 4.0) * (1.0 - easy.mean) * (1.0 - easy.mean) /
                              (q.l2() * arm.mean);
      const double ratio = deriv.mean / rhs_unit;
      const double rel = std::sqrt(
          rel_se(deriv) * rel_se(deriv) + 16.0 * rel_se(hard) * rel_se(hard) +
          4.0 * easy.se * easy.se / ((1.0 - easy.mean) * (1.0 - easy.mean)) +
          rel_se(arm) * rel_se(arm));
      ratios.push_back({R, ratio, std::abs(ratio) * rel});
      rep.terms.push_back({"ratio_R" + fmt_num(R), ratio, std::abs(ratio) * rel});
      rep.terms.push_back({"hard_crossing_R" + fmt_num(R), hard.mean, hard.se});
      rep.terms.push_back({"easy_crossing_R" + fmt_num(R), easy.mean, easy.se});
      rep.terms.push_back({"arm_R" + fmt_num(R), arm.mean, arm.se});
    }
  }
  finish_ratio_check(rep, ratios, bound == GaussianBound::ubgf2);
  return rep;
}

oracle::CheckResult check_field_revealment(const Kernel& q, FieldAlgo algo, double k, double R,
                                           double ell, std::uint64_t n, std::uint64_t seed,
                                           int workers) {
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  const double r = q.support_radius;
  const double mesh = q.geom.mesh;
  FieldAlgoSpec spec;
  spec.algo = algo;
  spec.k = k;
  spec.R = R;
  if (algo == FieldAlgo::one_arm_growth) spec.r_in = 1.0;
  if (algo == FieldAlgo::annulus_seed) spec.r_in = 2.0;
  const FieldProblem prob = make_field_problem(q, ell, spec);
  const FieldRevealment rev = measure_field_revealment(prob, n, subseed(seed, 1), workers);

  oracle::CheckResult rep;
  rep.check = std::string("revealment-") + field_algo_name(algo);

  if (algo == FieldAlgo::one_arm_growth) {
    const Estimate links = link_sum_estimate(q, ell, 1.0, R, n, subseed(seed, 2), workers);
    // deterministic seed reveals: trace of a run whose mask is empty
    FieldTrace trace;
    FieldScratch fws;
    const FieldProblem dead = make_field_problem(q, -1e18, spec);
    run_field_algorithm(dead, 0, trace, fws);
    const double n_seed = static_cast<double>(trace.boxes.size());
    const double lhs = rev.revealed_mean();
    const double lhs_se = rev.revealed_mean_se();
    const double stated_slack = links.mean - lhs;
    const double corrected_slack = n_seed + links.mean - lhs;
    const double sigma = std::sqrt(lhs_se * lhs_se + links.se * links.se);
    rep.terms.push_back({"lhs_mean_revealed", lhs, lhs_se});
    rep.terms.push_back({"rhs_link_sum", links.mean, links.se});
    rep.terms.push_back({"rhs_seed_corrected", n_seed + links.mean, links.se});
    rep.terms.push_back({"seed_boxes", n_seed, 0.0});
    rep.terms.push_back({"margin_stated", mc_margin(stated_slack, sigma), 0.0});
    rep.margin_sigma = std::min(mc_margin(stated_slack, sigma), mc_margin(corrected_slack, sigma));
    rep.holds = rep.margin_sigma >= -3.0;
    return rep;
  }

  // max-revealment forms
  std::vector<std::uint8_t> member(static_cast<std::size_t>(prob.part.count()), 1);
  if (algo == FieldAlgo::left_line || algo == FieldAlgo::level_line) {
    const int margin = std::max(0, cells_for_length(mesh, r) - 1);
    for (std::int64_t b = 0; b < prob.part.count(); ++b) {
      Coords lo = prob.rect_lo, hi = prob.rect_hi;
      lo[0] = 0;
      if (algo == FieldAlgo::level_line) lo[1] = 0;
      member[static_cast<std::size_t>(b)] =
          box_near_rect(prob.part, prob.noise_geom, b, lo, hi, margin) ? 1 : 0;
    }
  }
  double max_rev = 0.0, max_rev_se = 0.0;
  for (std::int64_t b = 0; b < prob.part.count(); ++b) {
    if (!member[static_cast<std::size_t>(b)]) continue;
    const double v = rev.rev(static_cast<std::size_t>(b));
    if (v > max_rev) max_rev = v, max_rev_se = rev.rev_se(static_cast<std::size_t>(b));
  }

  double rhs = 0.0, rhs_se = 0.0;
  if (algo == FieldAlgo::random_line) {
    const Estimate arms = arm_sum_estimate(q, ell, R, n, subseed(seed, 2), workers);
    rhs = 4.0 * r / R * arms.mean;
    rhs_se = 4.0 * r / R * arms.se;
    rep.terms.push_back({"arm_sum", arms.mean, arms.se});
  } else if (algo == FieldAlgo::left_line) {
    const GridGeom field = box_field_geom(q, R - 2.0 * r, R - 2.0 * r);
    const Estimate arm = mask_indicator_estimate(q, ell, field, n, subseed(seed, 2), workers,
                                                 &ev_one_arm, 2.0 * r, R - 2.0 * r);
    rhs = arm.mean;
    rhs_se = arm.se;
  } else if (algo == FieldAlgo::level_line) {
    const GridGeom field = box_field_geom(q, R - 2.0 * r, R - 2.0 * r);
    const Estimate arm = mask_indicator_estimate(q, ell, field, n, subseed(seed, 2), workers,
                                                 &ev_two_arm, 2.0 * r, R - 2.0 * r);
    rhs = arm.mean;
    rhs_se = arm.se;
  } else {  // annulus_seed: (5/R)(sum of one-arm tails from Λ_2, first three terms are 1)
    const int imax = static_cast<int>(std::llround(R)) - 1;
    const GridGeom field = box_field_geom(q, R, R);
    const GridGeom noise = noise_geom_for_field(q, field);
    const FieldSampler sampler(q, noise);
    const int c_src = cells_for_length(mesh, 2.0);
    std::vector<int> rings;
    for (int i = 3; i <= imax; ++i) rings.push_back(cells_for_length(mesh, i));
    std::vector<std::int64_t> sum, sum_sq;
    replica_rows(n, subseed(seed, 2), workers, 1, sum, sum_sq,
                 [&](std::uint64_t, Rng& rng, std::int64_t* row) {
                   white_noise_fill(noise, rng, tl_noise);
                   sampler.sample(tl_noise, tl_field);
                   excursion_fill(tl_field, ell, tl_mask);
                   const int top = positive_flood_sup(tl_mask, c_src, tl_ws);
                   std::int64_t cnt = 0;
                   for (int ring : rings)
                     if (top >= ring) ++cnt;
                   row[0] = cnt;
                 });
    const Estimate tail = stat_estimate(sum[0], sum_sq[0], n, subseed(seed, 2));
    rhs = 5.0 / R * (3.0 + tail.mean);
    rhs_se = 5.0 / R * tail.se;
    rep.terms.push_back({"arm_tail_sum", tail.mean, tail.se});
  }

  const double slack = rhs - max_rev;
  const double sigma = std::sqrt(rhs_se * rhs_se + max_rev_se * max_rev_se);
  rep.terms.push_back({"max_revealment", max_rev, max_rev_se});
  rep.terms.push_back({"rhs_bound", rhs, rhs_se});
  rep.margin_sigma = mc_margin(slack, sigma);
  rep.holds = rep.margin_sigma >= -3.0;
  return rep;
}

}  // namespace percolab
