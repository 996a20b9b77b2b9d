#include "percolab/estimators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "percolab/bernoulli.hpp"
#include "percolab/bernoulli_algorithms.hpp"
#include "percolab/connectivity.hpp"
#include "percolab/error.hpp"
#include "percolab/parallel.hpp"
#include "percolab/summation.hpp"

namespace percolab {

namespace {

thread_local Scratch tl_ws;
thread_local Scratch tl_bfs;
thread_local ExploreScratch tl_ews;
thread_local std::vector<std::uint8_t> tl_open;
thread_local std::vector<double> tl_unif;

// Integer adds commute, so a shared counter stays worker-count invariant.
inline void atomic_add(std::uint64_t& x, std::uint64_t v) {
#ifdef _OPENMP
#pragma omp atomic update
#endif
  x += v;
}

constexpr double kMcMarginClamp = 1e9;

// slack / sigma, with exact-zero handling when nothing fluctuates.
double mc_margin(double slack, double sigma) {
  if (sigma > 0.0) return slack / sigma;
  if (std::abs(slack) <= 1e-12) return 0.0;
  return slack > 0.0 ? kMcMarginClamp : -kMcMarginClamp;
}

void require_prob_open(double p) {
  require_that(p > 0.0 && p < 1.0, ErrorKind::invalid_parameter, "parameter must lie in (0,1)");
}

std::uint64_t subseed(std::uint64_t seed, std::uint64_t tag) { return mix64(seed, tag); }

std::string ratio_name(int R) { return "ratio_R" + std::to_string(R); }

}  // namespace

const char* event_name(BernoulliEvent e) {
  switch (e) {
    case BernoulliEvent::one_arm: return "one_arm";
    case BernoulliEvent::box_arm: return "box_arm";
    case BernoulliEvent::crossing: return "crossing";
    case BernoulliEvent::two_arm: return "two_arm";
    case BernoulliEvent::dual_arm: return "dual_arm";
  }
  return "unknown";
}

const char* algo_name(BernoulliAlgo a) {
  switch (a) {
    case BernoulliAlgo::origin_cluster: return "origin_cluster";
    case BernoulliAlgo::hyperplane_sweep: return "hyperplane_sweep";
    case BernoulliAlgo::interface_growth: return "interface_growth";
  }
  return "unknown";
}

Lattice lattice_for(const BernoulliSpec& spec) {
  require_that(spec.p >= 0.0 && spec.p <= 1.0, ErrorKind::invalid_parameter,
               "edge probability must lie in [0,1]");
  switch (spec.event) {
    case BernoulliEvent::one_arm:
      require_that(spec.R >= 0, ErrorKind::invalid_parameter, "one-arm radius must be >= 0");
      return make_cube(spec.d, std::max(spec.R, 1));
    case BernoulliEvent::box_arm:
      require_that(spec.R >= 1, ErrorKind::invalid_parameter, "arm radius must be >= 1");
      return make_cube(spec.d, spec.R);
    case BernoulliEvent::crossing:
      require_that(spec.R >= 1, ErrorKind::invalid_parameter, "crossing radius must be >= 1");
      return make_box_k(spec.d, spec.R, spec.k);
    case BernoulliEvent::two_arm:
    case BernoulliEvent::dual_arm:
      require_that(spec.d == 2, ErrorKind::unsupported_dimension, "dual arms need d = 2");
      require_that(spec.R >= 1, ErrorKind::invalid_parameter, "arm radius must be >= 1");
      return make_cube(2, spec.R);
  }
  fail(ErrorKind::invalid_parameter, "unknown event");
}

bool eval_event(const BernoulliSpec& spec, const Lattice& box, const std::uint8_t* open, Scratch& ws) {
  switch (spec.event) {
    case BernoulliEvent::one_arm: return one_arm_event(box, open, spec.R, ws);
    case BernoulliEvent::box_arm: return arm_event(box, open, 1, spec.R, ws);
    case BernoulliEvent::crossing: return crossing_event(box, open, ws);
    case BernoulliEvent::two_arm: return two_arm_event(box, open, spec.R, ws);
    case BernoulliEvent::dual_arm: return dual_arm_event(box, open, spec.R, ws);
  }
  fail(ErrorKind::invalid_parameter, "unknown event");
}

Estimate mc_estimate(const BernoulliSpec& spec, std::uint64_t n, std::uint64_t seed, int workers) {
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  const Lattice box = lattice_for(spec);
  return estimate_indicator(n, seed, workers, [&](std::uint64_t, Rng& rng) {
    sample_bond_config(box, spec.p, rng, tl_open);
    return eval_event(spec, box, tl_open.data(), tl_ws);
  });
}

// ---- regression fits ----

namespace {

FitResult weighted_line(const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<double>& se_y, bool use_weights) {
  const std::size_t n = x.size();
  NeumaierSum sw, swx, swy;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = use_weights ? 1.0 / (se_y[i] * se_y[i]) : 1.0;
    sw.add(w);
    swx.add(w * x[i]);
    swy.add(w * y[i]);
  }
  const double W = sw.value();
  const double xbar = swx.value() / W;
  const double ybar = swy.value() / W;
  NeumaierSum sxx, sxy;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = use_weights ? 1.0 / (se_y[i] * se_y[i]) : 1.0;
    sxx.add(w * (x[i] - xbar) * (x[i] - xbar));
    sxy.add(w * (x[i] - xbar) * (y[i] - ybar));
  }
  require_that(sxx.value() > 0.0, ErrorKind::invalid_data, "fit needs at least two distinct x");
  FitResult fit;
  fit.n_points = static_cast<int>(n);
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = ybar - fit.slope * xbar;
  NeumaierSum ssres, sstot;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = use_weights ? 1.0 / (se_y[i] * se_y[i]) : 1.0;
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ssres.add(w * r * r);
    sstot.add(w * (y[i] - ybar) * (y[i] - ybar));
  }
  if (use_weights) {
    fit.slope_se = std::sqrt(1.0 / sxx.value());  // known per-point variances
  } else if (n > 2) {
    fit.slope_se = std::sqrt(ssres.value() / (static_cast<double>(n) - 2.0) / sxx.value());
  } else {
    fit.slope_se = 0.0;
  }
  fit.r_squared = sstot.value() > 0.0 ? 1.0 - ssres.value() / sstot.value() : 1.0;
  return fit;
}

FitResult fit_log_line(const std::vector<FitPoint>& pts, bool log_x, std::size_t min_points) {
  require_that(pts.size() >= min_points, ErrorKind::invalid_data, "not enough points to fit");
  std::vector<double> x, y, se;
  bool weights = true;
  for (const FitPoint& pt : pts) {
    require_that(pt.value > 0.0, ErrorKind::invalid_data, "fit needs positive probabilities");
    if (log_x) require_that(pt.x > 0.0, ErrorKind::invalid_data, "fit needs positive scales");
    x.push_back(log_x ? std::log(pt.x) : pt.x);
    y.push_back(std::log(pt.value));
    se.push_back(pt.sigma / pt.value);  // delta method for log
    if (!(pt.sigma > 0.0)) weights = false;
  }
  return weighted_line(x, y, se, weights);
}

}  // namespace

FitResult fit_power_law(const std::vector<FitPoint>& pts) { return fit_log_line(pts, true, 2); }

FitResult fit_exponential_decay(const std::vector<FitPoint>& pts) {
  return fit_log_line(pts, false, 3);
}

// ---- derivative in p by pivotal counting ----

namespace {

// Bridge search scratch for per-replica pivotal counts.
struct BridgeScratch {
  std::vector<std::int32_t> disc, low, comp;
  std::vector<std::int32_t> sub_src, sub_tgt;
  std::vector<std::uint8_t> comp_src, comp_tgt;
  struct Frame {
    std::int64_t v;
    std::int64_t parent_edge;
    std::int32_t dir;
  };
  std::vector<Frame> frames;
  struct Cand {
    std::int32_t comp;
    std::int32_t sub_src;
    std::int32_t sub_tgt;
  };
  std::vector<Cand> cands;
  std::vector<std::int32_t> total_src, total_tgt;
};

thread_local BridgeScratch tl_bridge;

// Number of edges whose flip changes the increasing connection event
// {sources <-> targets}. Exact per configuration: when the event holds the
// pivotal edges are the bridges separating every source from every target;
// when it fails they are the closed edges joining a source component to a
// target component.
std::int64_t count_pivotal(const Lattice& box, const std::uint8_t* open,
                           const std::vector<std::uint8_t>& is_src,
                           const std::vector<std::uint8_t>& is_tgt, BridgeScratch& bs) {
  const std::int64_t nv = box.vertex_count();
  const int d = box.dim();
  bs.disc.assign(static_cast<std::size_t>(nv), -1);
  bs.low.assign(static_cast<std::size_t>(nv), 0);
  bs.comp.assign(static_cast<std::size_t>(nv), -1);
  bs.sub_src.assign(static_cast<std::size_t>(nv), 0);
  bs.sub_tgt.assign(static_cast<std::size_t>(nv), 0);
  bs.cands.clear();
  bs.total_src.clear();
  bs.total_tgt.clear();
  std::int32_t timer = 0;
  std::int32_t ncomp = 0;

  for (std::int64_t root = 0; root < nv; ++root) {
    if (bs.disc[static_cast<std::size_t>(root)] != -1) continue;
    const std::int32_t comp_id = ncomp++;
    bs.disc[static_cast<std::size_t>(root)] = bs.low[static_cast<std::size_t>(root)] = timer++;
    bs.comp[static_cast<std::size_t>(root)] = comp_id;
    bs.sub_src[static_cast<std::size_t>(root)] = is_src[static_cast<std::size_t>(root)];
    bs.sub_tgt[static_cast<std::size_t>(root)] = is_tgt[static_cast<std::size_t>(root)];
    bs.frames.push_back({root, -1, 0});
    while (!bs.frames.empty()) {
      BridgeScratch::Frame& f = bs.frames.back();
      const std::int64_t v = f.v;
      if (f.dir < 2 * d) {
        const std::int32_t dir = f.dir++;
        const int axis = dir >> 1;
        std::int64_t e, w;
        if ((dir & 1) == 0) {
          if (!(box.up_mask(v) & (1u << axis))) continue;
          e = box.edge_id(v, axis);
          w = v + box.axis_stride(axis);
        } else {
          if (box.coords(v)[axis] <= box.lo()[axis]) continue;
          w = v - box.axis_stride(axis);
          e = box.edge_id(w, axis);
        }
        if (!open[e] || e == f.parent_edge) continue;
        if (bs.disc[static_cast<std::size_t>(w)] == -1) {
          bs.disc[static_cast<std::size_t>(w)] = bs.low[static_cast<std::size_t>(w)] = timer++;
          bs.comp[static_cast<std::size_t>(w)] = comp_id;
          bs.sub_src[static_cast<std::size_t>(w)] = is_src[static_cast<std::size_t>(w)];
          bs.sub_tgt[static_cast<std::size_t>(w)] = is_tgt[static_cast<std::size_t>(w)];
          bs.frames.push_back({w, e, 0});
        } else {
          bs.low[static_cast<std::size_t>(v)] =
              std::min(bs.low[static_cast<std::size_t>(v)], bs.disc[static_cast<std::size_t>(w)]);
        }
      } else {
        const std::int64_t pe = f.parent_edge;
        bs.frames.pop_back();
        if (pe == -1) {
          bs.total_src.push_back(bs.sub_src[static_cast<std::size_t>(v)]);
          bs.total_tgt.push_back(bs.sub_tgt[static_cast<std::size_t>(v)]);
        } else {
          const std::int64_t parent = bs.frames.back().v;
          bs.low[static_cast<std::size_t>(parent)] =
              std::min(bs.low[static_cast<std::size_t>(parent)], bs.low[static_cast<std::size_t>(v)]);
          bs.sub_src[static_cast<std::size_t>(parent)] += bs.sub_src[static_cast<std::size_t>(v)];
          bs.sub_tgt[static_cast<std::size_t>(parent)] += bs.sub_tgt[static_cast<std::size_t>(v)];
          if (bs.low[static_cast<std::size_t>(v)] > bs.disc[static_cast<std::size_t>(parent)]) {
            bs.cands.push_back({comp_id, bs.sub_src[static_cast<std::size_t>(v)],
                                bs.sub_tgt[static_cast<std::size_t>(v)]});
          }
        }
      }
    }
  }

  std::int32_t live = 0;
  std::int32_t live_comp = -1;
  for (std::int32_t c = 0; c < ncomp; ++c) {
    if (bs.total_src[static_cast<std::size_t>(c)] > 0 && bs.total_tgt[static_cast<std::size_t>(c)] > 0) {
      ++live;
      live_comp = c;
    }
  }

  std::int64_t pivotal = 0;
  if (live > 1) {
    // several disjoint connections realize the event; no single edge can undo it
    return 0;
  }
  if (live == 1) {
    // an open bridge is pivotal iff both sides of the cut lack a source or a target
    for (const BridgeScratch::Cand& cand : bs.cands) {
      if (cand.comp != live_comp) continue;
      const std::int32_t S = bs.total_src[static_cast<std::size_t>(cand.comp)];
      const std::int32_t T = bs.total_tgt[static_cast<std::size_t>(cand.comp)];
      const std::int32_t s1 = cand.sub_src, t1 = cand.sub_tgt;
      const std::int32_t s2 = S - s1, t2 = T - t1;
      if ((s1 == 0 || t1 == 0) && (s2 == 0 || t2 == 0)) ++pivotal;
    }
  } else {
    // a closed edge is pivotal iff it joins a source component to a target component
    for (std::int64_t e = 0; e < box.edge_count(); ++e) {
      if (open[e]) continue;
      const std::int32_t cu = bs.comp[static_cast<std::size_t>(box.edge_tail(e))];
      const std::int32_t cv = bs.comp[static_cast<std::size_t>(box.edge_head(e))];
      const bool su = bs.total_src[static_cast<std::size_t>(cu)] > 0;
      const bool tu = bs.total_tgt[static_cast<std::size_t>(cu)] > 0;
      const bool sv = bs.total_src[static_cast<std::size_t>(cv)] > 0;
      const bool tv = bs.total_tgt[static_cast<std::size_t>(cv)] > 0;
      if ((su && tv) || (sv && tu)) ++pivotal;
    }
  }
  return pivotal;
}

void connection_marks(const BernoulliSpec& spec, const Lattice& box, std::vector<std::uint8_t>& is_src,
                      std::vector<std::uint8_t>& is_tgt) {
  const std::size_t nv = static_cast<std::size_t>(box.vertex_count());
  is_src.assign(nv, 0);
  is_tgt.assign(nv, 0);
  for (std::int64_t v = 0; v < box.vertex_count(); ++v) {
    switch (spec.event) {
      case BernoulliEvent::one_arm:
        if (v == origin_index(box)) is_src[static_cast<std::size_t>(v)] = 1;
        if (box.sup_norm(v) == spec.R) is_tgt[static_cast<std::size_t>(v)] = 1;
        break;
      case BernoulliEvent::box_arm:
        if (box.sup_norm(v) <= 1) is_src[static_cast<std::size_t>(v)] = 1;
        if (box.sup_norm(v) == spec.R) is_tgt[static_cast<std::size_t>(v)] = 1;
        break;
      case BernoulliEvent::crossing:
        if (box.coords(v)[0] == box.lo()[0]) is_src[static_cast<std::size_t>(v)] = 1;
        if (box.coords(v)[0] == box.hi()[0]) is_tgt[static_cast<std::size_t>(v)] = 1;
        break;
      default:
        fail(ErrorKind::contract_violation, "pivotal counting needs an increasing event");
    }
  }
}

}  // namespace

Estimate russo_derivative_estimate(const BernoulliSpec& spec, std::uint64_t n, std::uint64_t seed,
                                   int workers) {
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  require_prob_open(spec.p);
  const Lattice box = lattice_for(spec);
  require_that(spec.R >= 1, ErrorKind::invalid_parameter, "derivative needs R >= 1");
  std::vector<std::uint8_t> is_src, is_tgt;
  connection_marks(spec, box, is_src, is_tgt);
  return estimate_integer_mean(n, seed, workers, [&](std::uint64_t, Rng& rng) {
    sample_bond_config(box, spec.p, rng, tl_open);
    return count_pivotal(box, tl_open.data(), is_src, is_tgt, tl_bridge);
  });
}

Estimate finite_difference_derivative(const BernoulliSpec& spec, double h, std::uint64_t n,
                                      std::uint64_t seed, int workers) {
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  require_that(h > 0.0 && spec.p - h >= 0.0 && spec.p + h <= 1.0, ErrorKind::invalid_parameter,
               "finite-difference step leaves [0,1]");
  const Lattice box = lattice_for(spec);
  return estimate_real_mean(n, seed, workers, [&](std::uint64_t, Rng& rng) {
    sample_edge_uniforms(box, rng, tl_unif);
    threshold_config(tl_unif, spec.p - h, tl_open);
    const bool lo = eval_event(spec, box, tl_open.data(), tl_ws);
    threshold_config(tl_unif, spec.p + h, tl_open);
    const bool hi = eval_event(spec, box, tl_open.data(), tl_ws);
    return (static_cast<double>(hi) - static_cast<double>(lo)) / (2.0 * h);
  });
}

// ---- inequality checks ----

oracle::CheckResult check_ubb1(int d, double p, double q, int R, std::uint64_t n, std::uint64_t seed,
                               int workers) {
  require_prob_open(p);
  require_prob_open(q);
  require_that(p <= q, ErrorKind::invalid_parameter, "needs p <= q");
  require_that(R >= 1, ErrorKind::invalid_parameter, "needs R >= 1");

  BernoulliSpec arm{d, p, BernoulliEvent::one_arm, R, 1.0};
  const Estimate est_p = mc_estimate(arm, n, subseed(seed, 1), workers);
  arm.p = q;
  const Estimate est_q = mc_estimate(arm, n, subseed(seed, 2), workers);
  const Lattice box = make_cube(d, R);
  const Estimate vol = estimate_integer_mean(n, subseed(seed, 3), workers, [&](std::uint64_t, Rng& rng) {
    sample_bond_config(box, p, rng, tl_open);
    return cluster_size_within(box, tl_open.data(), R, tl_ws);
  });

  const double K = std::max(std::sqrt(2.0 / (q * (1.0 - q))), std::sqrt(2.0 / (p * (1.0 - p))));
  const double lhs = est_q.mean - est_p.mean;
  const double root = std::sqrt(std::max(est_q.mean * vol.mean, 0.0));
  const double rhs = K * (q - p) * root;
  const double slack = rhs - lhs;
  // independent sub-estimates: delta method on slack = rhs(Pq, V) - Pq + Pp
  const double d_pq = root > 0.0 ? K * (q - p) * vol.mean / (2.0 * root) - 1.0 : -1.0;
  const double d_pp = 1.0;
  const double d_v = root > 0.0 ? K * (q - p) * est_q.mean / (2.0 * root) : 0.0;
  const double sigma = std::sqrt(d_pq * d_pq * est_q.se * est_q.se + d_pp * d_pp * est_p.se * est_p.se +
                                 d_v * d_v * vol.se * vol.se);

  oracle::CheckResult r;
  r.check = "ubb1";
  r.terms = {{"lhs_increment", lhs, std::sqrt(est_p.se * est_p.se + est_q.se * est_q.se)},
             {"rhs", rhs, 0.0},
             {"prob_p", est_p.mean, est_p.se},
             {"prob_q", est_q.mean, est_q.se},
             {"volume", vol.mean, vol.se},
             {"slack", slack, sigma}};
  r.margin_sigma = mc_margin(slack, sigma);
  r.holds = r.margin_sigma >= -3.0;
  return r;
}

namespace {

struct RatioTerm {
  int R;
  double value;
  double sigma;
};

// Stability verdict for a family of fitted existential constants: the spread
// across R must stay within a factor 2, judged at 3 sigma.
void finish_ratio_check(oracle::CheckResult& r, const std::vector<RatioTerm>& ratios, bool upper) {
  double best = 0.0, best_sigma = 0.0;
  double lo = 0.0, lo_sigma = 0.0, hi = 0.0, hi_sigma = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const RatioTerm& t = ratios[i];
    if (i == 0 || t.value < lo) lo = t.value, lo_sigma = t.sigma;
    if (i == 0 || t.value > hi) hi = t.value, hi_sigma = t.sigma;
  }
  // smallest constant covering the family: max ratio for an upper bound,
  // min ratio for a lower bound
  best = upper ? hi : lo;
  best_sigma = upper ? hi_sigma : lo_sigma;
  r.terms.push_back({"c_fit", best, best_sigma});
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

}  // namespace

oracle::CheckResult check_ubb2(double p, double k, const std::vector<int>& R_list, std::uint64_t n,
                               std::uint64_t seed, int workers) {
  require_prob_open(p);
  require_that(!R_list.empty(), ErrorKind::invalid_parameter, "needs at least one R");
  oracle::CheckResult r;
  r.check = "ubb2";
  std::vector<RatioTerm> ratios;
  for (int R : R_list) {
    require_that(R >= 2, ErrorKind::invalid_parameter, "geometry too small");
    BernoulliSpec cross{2, p, BernoulliEvent::crossing, R, k};
    const Estimate deriv = russo_derivative_estimate(cross, n, subseed(seed, 10 + R), workers);
    BernoulliSpec two{2, p, BernoulliEvent::two_arm, R, 1.0};
    const Estimate a2 = mc_estimate(two, n, subseed(seed, 20 + R), workers);
    require_that(a2.mean > 0.0, ErrorKind::invalid_data, "two-arm term vanished at this sample size");
    const double base = static_cast<double>(R) / std::sqrt(p * (1.0 - p)) * std::sqrt(a2.mean);
    const double ratio = deriv.mean / base;
    const double rel = std::sqrt(
        (deriv.mean > 0.0 ? deriv.se * deriv.se / (deriv.mean * deriv.mean) : 0.0) +
        a2.se * a2.se / (4.0 * a2.mean * a2.mean));
    ratios.push_back({R, ratio, std::abs(ratio) * rel});
    r.terms.push_back({ratio_name(R), ratio, std::abs(ratio) * rel});
    r.terms.push_back({"derivative_R" + std::to_string(R), deriv.mean, deriv.se});
  }
  finish_ratio_check(r, ratios, /*upper=*/true);
  return r;
}

oracle::CheckResult check_lbb(double p, double k, const std::vector<int>& R_list, std::uint64_t n,
                              std::uint64_t seed, int workers) {
  require_prob_open(p);
  require_that(!R_list.empty(), ErrorKind::invalid_parameter, "needs at least one R");
  oracle::CheckResult r;
  r.check = "lbb";
  std::vector<RatioTerm> ratios;
  for (int R : R_list) {
    require_that(R >= 8, ErrorKind::invalid_parameter, "lower bound needs R >= 8");
    BernoulliSpec cross{2, p, BernoulliEvent::crossing, R, k};
    const Estimate deriv = russo_derivative_estimate(cross, n, subseed(seed, 30 + R), workers);
    // long flat box crossed the hard way
    BernoulliSpec hard{2, p, BernoulliEvent::crossing, rounded_aspect(k, R), 1.0 / (8.0 * k)};
    const Estimate t_hard = mc_estimate(hard, n, subseed(seed, 40 + R), workers);
    // short tall box crossed the easy way
    BernoulliSpec easy{2, p, BernoulliEvent::crossing, R / 8, 8.0 * k};
    const Estimate t_easy = mc_estimate(easy, n, subseed(seed, 50 + R), workers);
    BernoulliSpec two{2, p, BernoulliEvent::two_arm, R, 1.0};
    const Estimate a2 = mc_estimate(two, n, subseed(seed, 60 + R), workers);
    require_that(t_hard.mean > 0.0 && t_easy.mean < 1.0 && a2.mean > 0.0, ErrorKind::invalid_data,
                 "lower-bound terms degenerate at this sample size");
    const double base = std::pow(t_hard.mean, 4.0) * (1.0 - t_easy.mean) * (1.0 - t_easy.mean) /
                        (p * (1.0 - p) * a2.mean);
    const double ratio = deriv.mean / base;
    const double rel = std::sqrt(
        (deriv.mean > 0.0 ? deriv.se * deriv.se / (deriv.mean * deriv.mean) : 0.0) +
        16.0 * t_hard.se * t_hard.se / (t_hard.mean * t_hard.mean) +
        4.0 * t_easy.se * t_easy.se / ((1.0 - t_easy.mean) * (1.0 - t_easy.mean)) +
        a2.se * a2.se / (a2.mean * a2.mean));
    ratios.push_back({R, ratio, std::abs(ratio) * rel});
    r.terms.push_back({ratio_name(R), ratio, std::abs(ratio) * rel});
    r.terms.push_back({"hard_crossing_R" + std::to_string(R), t_hard.mean, t_hard.se});
    r.terms.push_back({"easy_crossing_R" + std::to_string(R), t_easy.mean, t_easy.se});
  }
  finish_ratio_check(r, ratios, /*upper=*/false);
  return r;
}

oracle::CheckResult check_two_arm_square(int R, std::uint64_t n, std::uint64_t seed, int workers) {
  require_that(R >= 2, ErrorKind::invalid_parameter, "needs R >= 2");
  BernoulliSpec two{2, 0.5, BernoulliEvent::two_arm, R, 1.0};
  const Estimate a2 = mc_estimate(two, n, subseed(seed, 1), workers);
  BernoulliSpec one{2, 0.5, BernoulliEvent::one_arm, R - 1, 1.0};
  const Estimate a1 = mc_estimate(one, n, subseed(seed, 2), workers);
  const double lhs = a2.mean;
  const double rhs = 4.0 * a1.mean * a1.mean;
  const double slack = rhs - lhs;
  const double sigma = std::sqrt(a2.se * a2.se + 64.0 * a1.mean * a1.mean * a1.se * a1.se);
  oracle::CheckResult r;
  r.check = "two-arm-square";
  r.terms = {{"lhs_two_arm", lhs, a2.se},
             {"rhs_four_one_arm_sq", rhs, 8.0 * a1.mean * a1.se},
             {"one_arm", a1.mean, a1.se},
             {"slack", slack, sigma}};
  r.margin_sigma = mc_margin(slack, sigma);
  r.holds = r.margin_sigma >= -3.0;
  return r;
}

// ---- curves ----

std::vector<Estimate> theta_curve(int d, const std::vector<double>& params, int R, std::uint64_t n,
                                  std::uint64_t seed, int workers) {
  require_that(!params.empty(), ErrorKind::invalid_parameter, "needs at least one parameter");
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  require_that(R >= 2, ErrorKind::invalid_parameter, "needs R >= 2");
  for (double p : params)
    require_that(p >= 0.0 && p <= 1.0, ErrorKind::invalid_parameter, "parameter must lie in [0,1]");
  const Lattice box = make_cube(d, R);
  const std::size_t m = params.size();
  std::vector<std::uint8_t> hits(static_cast<std::size_t>(n) * m, 0);
  for_each_replica(n, seed, workers, [&](std::uint64_t i, Rng& rng) {
    sample_edge_uniforms(box, rng, tl_unif);
    for (std::size_t j = 0; j < m; ++j) {
      threshold_config(tl_unif, params[j], tl_open);
      hits[static_cast<std::size_t>(i) * m + j] =
          arm_event(box, tl_open.data(), 1, R, tl_ws) ? 1 : 0;
    }
  });
  std::vector<Estimate> out(m);
  for (std::size_t j = 0; j < m; ++j) {
    std::uint64_t count = 0;
    for (std::uint64_t i = 0; i < n; ++i) count += hits[static_cast<std::size_t>(i) * m + j];
    out[j].mean = static_cast<double>(count) / static_cast<double>(n);
    out[j].se = binomial_se(out[j].mean, n);
    out[j].n = n;
    out[j].seed = seed;
  }
  return out;
}

namespace {

// records the largest sup-norm radius the origin cluster touches
struct MaxRadiusSink {
  const Lattice* box;
  int max_r = 0;
  void on_reveal(std::int64_t e, std::int8_t open) {
    if (!open) return;
    max_r = std::max(
        {max_r, box->sup_norm(box->edge_tail(e)), box->sup_norm(box->edge_head(e))});
  }
  void on_aux(std::int64_t) {}
};

}  // namespace

std::vector<Estimate> one_arm_reach_sweep(int d, double p, const std::vector<int>& R_list,
                                          std::uint64_t n, std::uint64_t seed, int workers) {
  require_that(!R_list.empty(), ErrorKind::invalid_parameter, "needs at least one R");
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  require_that(p >= 0.0 && p <= 1.0, ErrorKind::invalid_parameter,
               "edge probability must lie in [0,1]");
  for (std::size_t j = 0; j < R_list.size(); ++j) {
    require_that(R_list[j] >= 1, ErrorKind::invalid_parameter, "radii must be >= 1");
    require_that(j == 0 || R_list[j] > R_list[j - 1], ErrorKind::invalid_parameter,
                 "radii must be strictly increasing");
  }
  const Lattice box = make_cube(d, R_list.back());
  std::vector<std::int32_t> reach(n, 0);
  for_each_replica(n, seed, workers, [&](std::uint64_t i, Rng& rng) {
    LazyEdgeSource src{p, &rng};
    MaxRadiusSink sink{&box, 0};
    run_origin_cluster(box, R_list.back(), src, sink, tl_ews);
    reach[i] = sink.max_r;
  });
  std::vector<Estimate> out(R_list.size());
  for (std::size_t j = 0; j < R_list.size(); ++j) {
    std::uint64_t count = 0;
    for (std::int32_t r : reach) count += r >= R_list[j] ? 1 : 0;
    out[j].mean = static_cast<double>(count) / static_cast<double>(n);
    out[j].se = binomial_se(out[j].mean, n);
    out[j].n = n;
    out[j].seed = seed;
  }
  return out;
}

FitResult correlation_length_estimate(int d, double p, const std::vector<int>& R_list,
                                      std::uint64_t n, std::uint64_t seed, int workers) {
  std::vector<FitPoint> pts;
  for (int R : R_list) {
    BernoulliSpec arm{d, p, BernoulliEvent::one_arm, R, 1.0};
    const Estimate est = mc_estimate(arm, n, subseed(seed, 100 + static_cast<std::uint64_t>(R)), workers);
    pts.push_back({static_cast<double>(R), est.mean, est.se});
  }
  return fit_exponential_decay(pts);
}

// ---- revealment measurement ----

double AlgoRevealment::rev(std::int64_t e) const {
  return runs ? static_cast<double>(counts[static_cast<std::size_t>(e)]) / static_cast<double>(runs)
              : 0.0;
}

double AlgoRevealment::rev_se(std::int64_t e) const {
  const double r = rev(e);
  return runs ? std::sqrt(r * (1.0 - r) / static_cast<double>(runs)) : 0.0;
}

double AlgoRevealment::output_rate() const {
  return runs ? static_cast<double>(output_count) / static_cast<double>(runs) : 0.0;
}

namespace {

struct TallySink {
  std::uint64_t* counts;
  std::uint64_t size = 0;
  void on_reveal(std::int64_t e, std::int8_t) {
    atomic_add(counts[e], 1);
    ++size;
  }
  void on_aux(std::int64_t) {}
};

}  // namespace

AlgoRevealment measure_revealment(const Lattice& box, BernoulliAlgo algo, int R, double p,
                                  std::uint64_t n, std::uint64_t seed, int workers) {
  require_that(n >= 1, ErrorKind::invalid_parameter, "replica count must be positive");
  require_that(p >= 0.0 && p <= 1.0, ErrorKind::invalid_parameter, "probability must lie in [0,1]");
  if (algo == BernoulliAlgo::interface_growth)
    require_that(box.dim() == 2, ErrorKind::unsupported_dimension, "interface growth needs d = 2");
  AlgoRevealment out;
  out.counts.assign(static_cast<std::size_t>(box.edge_count()), 0);
  out.runs = n;
  std::vector<std::int64_t> sizes(n, 0);
  std::vector<std::uint8_t> outputs(n, 0);
  for_each_replica(n, seed, workers, [&](std::uint64_t i, Rng& rng) {
    sample_bond_config(box, p, rng, tl_open);
    ConfigEdgeSource src{tl_open.data()};
    TallySink sink{out.counts.data()};
    bool result = false;
    switch (algo) {
      case BernoulliAlgo::origin_cluster:
        result = run_origin_cluster(box, R, src, sink, tl_ews);
        break;
      case BernoulliAlgo::hyperplane_sweep:
        result = run_hyperplane_sweep(box, src, sink, tl_ews);
        break;
      case BernoulliAlgo::interface_growth:
        result = run_interface(box, src, sink, tl_ews, tl_bfs);
        break;
    }
    sizes[i] = static_cast<std::int64_t>(sink.size);
    outputs[i] = result ? 1 : 0;
  });
  std::int64_t sum = 0, sum_sq = 0;
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    sum += sizes[i];
    sum_sq += sizes[i] * sizes[i];
    hits += outputs[i];
  }
  out.output_count = hits;
  out.revealed_size.n = n;
  out.revealed_size.seed = seed;
  out.revealed_size.mean = static_cast<double>(sum) / static_cast<double>(n);
  double var = static_cast<double>(sum_sq) / static_cast<double>(n) -
               out.revealed_size.mean * out.revealed_size.mean;
  if (var < 0.0) var = 0.0;
  out.revealed_size.se = std::sqrt(var / static_cast<double>(n));
  return out;
}

oracle::CheckResult check_algo_revealment(BernoulliAlgo algo, int d, double p, double k, int R,
                                          std::uint64_t n, std::uint64_t seed, int workers) {
  require_prob_open(p);
  require_that(R >= 1, ErrorKind::invalid_parameter, "needs R >= 1");
  oracle::CheckResult r;
  r.check = std::string("revealment-") + algo_name(algo);

  if (algo == BernoulliAlgo::origin_cluster) {
    const Lattice box = make_cube(d, R);
    const AlgoRevealment meas = measure_revealment(box, algo, R, p, n, subseed(seed, 11), workers);
    const Estimate vol = estimate_integer_mean(n, subseed(seed, 12), workers, [&](std::uint64_t, Rng& rng) {
      sample_bond_config(box, p, rng, tl_open);
      return cluster_size_within(box, tl_open.data(), R, tl_ws);
    });
    const double lhs = meas.revealed_size.mean;
    const double rhs = 2.0 * d * vol.mean;
    const double slack = rhs - lhs;
    const double sigma = std::sqrt(meas.revealed_size.se * meas.revealed_size.se +
                                   4.0 * d * d * vol.se * vol.se);
    r.terms = {{"lhs_sum_rev", lhs, meas.revealed_size.se},
               {"rhs_degree_volume", rhs, 2.0 * d * vol.se},
               {"rhs_stated_factor2", 2.0 * vol.mean, 2.0 * vol.se},
               {"volume", vol.mean, vol.se},
               {"slack", slack, sigma}};
    r.margin_sigma = mc_margin(slack, sigma);
    r.holds = r.margin_sigma >= -3.0;
    return r;
  }

  const Lattice box = make_box_k(d, R, k);
  const AlgoRevealment meas = measure_revealment(box, algo, R, p, n, subseed(seed, 13), workers);
  double far_max = 0.0, far_max_se = 0.0;
  for (std::int64_t e = 0; e < box.edge_count(); ++e) {
    const bool in_far = algo == BernoulliAlgo::hyperplane_sweep ? edge_in_right_half(box, e)
                                                                : edge_in_top_right_quarter(box, e);
    if (in_far && meas.rev(e) > far_max) {
      far_max = meas.rev(e);
      far_max_se = meas.rev_se(e);
    }
  }
  BernoulliSpec arm{d, p,
                    algo == BernoulliAlgo::hyperplane_sweep ? BernoulliEvent::one_arm
                                                            : BernoulliEvent::two_arm,
                    R, 1.0};
  const Estimate ref = mc_estimate(arm, n, subseed(seed, 14), workers);
  const double rhs = 2.0 * ref.mean;
  const double slack = rhs - far_max;
  const double sigma = std::sqrt(far_max_se * far_max_se + 4.0 * ref.se * ref.se);
  r.terms = {{"lhs_max_rev_far", far_max, far_max_se},
             {algo == BernoulliAlgo::hyperplane_sweep ? "rhs_two_one_arm" : "rhs_two_two_arm", rhs,
              2.0 * ref.se},
             {"arm_prob", ref.mean, ref.se},
             {"slack", slack, sigma}};
  r.margin_sigma = mc_margin(slack, sigma);
  r.holds = r.margin_sigma >= -3.0;
  return r;
}

}  // namespace percolab
