#pragma once
// Monte Carlo engine for the lattice model: event estimation, derivative
// estimation, regression fits, and the empirical inequality checks. All
// entry points are deterministic functions of (parameters, n, seed) and are
// invariant under the worker count.

#include <cstdint>
#include <string>
#include <vector>

#include "percolab/connectivity.hpp"
#include "percolab/estimate.hpp"
#include "percolab/lattice.hpp"
#include "percolab/oracle.hpp"

namespace percolab {

enum class BernoulliEvent {
  one_arm,    // origin to the sup-norm-R shell in Λ_R
  box_arm,    // Λ_1 to the sup-norm-R shell in Λ_R
  crossing,   // left-right crossing of B_k(R)
  two_arm,    // one_arm and a closed dual arm (d = 2)
  dual_arm,   // closed dual arm alone (d = 2)
};

const char* event_name(BernoulliEvent e);

struct BernoulliSpec {
  int d = 2;
  double p = 0.5;
  BernoulliEvent event = BernoulliEvent::one_arm;
  int R = 8;
  double k = 1.0;  // aspect ratio, crossing events only
};

// Geometry and direct evaluation backing mc_estimate; exposed for reuse by
// the revealment checks and the CLI.
Lattice lattice_for(const BernoulliSpec& spec);
bool eval_event(const BernoulliSpec& spec, const Lattice& box, const std::uint8_t* open, Scratch& ws);

Estimate mc_estimate(const BernoulliSpec& spec, std::uint64_t n, std::uint64_t seed, int workers);

// ---- regression fits ----

struct FitPoint {
  double x = 0.0;      // R
  double value = 0.0;  // estimated probability
  double sigma = 0.0;  // standard error of value; 0 = unweighted
};

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double r_squared = 0.0;
  int n_points = 0;
};

// Weighted least squares of log(value) on log(x). For a power law value =
// C x^s the slope recovers s. Weights are 1/se(log value)^2 when every sigma
// is positive, unit otherwise.
FitResult fit_power_law(const std::vector<FitPoint>& pts);

// Least squares of log(value) on x; the decay rate is -slope.
FitResult fit_exponential_decay(const std::vector<FitPoint>& pts);

// ---- derivatives in p ----

// dP/dp for an increasing event as the expected number of pivotal edges
// (exact identity; each replica counts the edges whose flip changes the
// event). two_arm and dual_arm are not monotone and are rejected.
Estimate russo_derivative_estimate(const BernoulliSpec& spec, std::uint64_t n, std::uint64_t seed,
                                   int workers);

// Central finite difference (P(p+h) - P(p-h)) / 2h with coupled uniforms.
Estimate finite_difference_derivative(const BernoulliSpec& spec, double h, std::uint64_t n,
                                      std::uint64_t seed, int workers);

// ---- inequality checks (Monte Carlo; report terms, verdict at 3 sigma) ----

// P_q[A_1(R)] - P_p[A_1(R)] <= max{sqrt2/sqrt(q(1-q)), sqrt2/sqrt(p(1-p))}
//                              (q-p) sqrt(P_q[A_1(R)] sum_v P_p[0<->v]).
oracle::CheckResult check_ubb1(int d, double p, double q, int R, std::uint64_t n, std::uint64_t seed,
                               int workers);

// d=2: dP[Cross_k(R)]/dp <= c R^{d/2}/sqrt(p(1-p)) sqrt(P[A_2(R)]). The
// existential constant is fitted as the smallest c covering every R in the
// sweep; the verdict asserts stability (factor <= 2 across R), not c itself.
oracle::CheckResult check_ubb2(double p, double k, const std::vector<int>& R_list, std::uint64_t n,
                               std::uint64_t seed, int workers);

// d=2, R >= 8: dP[Cross_k(R)]/dp >= c/(p(1-p))
//   P[Cross_{1/(8k)}(kR)]^4 (1 - P[Cross_{8k}(R/8)])^2 / P[A_2(R)].
oracle::CheckResult check_lbb(double p, double k, const std::vector<int>& R_list, std::uint64_t n,
                              std::uint64_t seed, int workers);

// P[A_2(R)] <= 4 P[A_1(R-1)]^2 at p = 1/2, d = 2.
oracle::CheckResult check_two_arm_square(int R, std::uint64_t n, std::uint64_t seed, int workers);

// ---- curves ----

// P[Λ_1 <-> ∂Λ_R] for each parameter, sharing uniforms across the sweep so
// the per-seed indicators are monotone in p.
std::vector<Estimate> theta_curve(int d, const std::vector<double>& params, int R, std::uint64_t n,
                                  std::uint64_t seed, int workers);

// P[0 <-> ∂Λ_R] for every R in the (strictly increasing) list, from shared
// replicas: each replica grows the origin cluster lazily in Λ_{R_max} once
// and records the largest radius it touches, so large sweeps cost one
// exploration instead of one full configuration per (replica, R).
std::vector<Estimate> one_arm_reach_sweep(int d, double p, const std::vector<int>& R_list,
                                          std::uint64_t n, std::uint64_t seed, int workers);

// Exponential fit of one-arm decay; rate = -slope, xi_hat = 1/rate.
FitResult correlation_length_estimate(int d, double p, const std::vector<int>& R_list,
                                      std::uint64_t n, std::uint64_t seed, int workers);

// ---- revealment measurement for the exploration algorithms ----

enum class BernoulliAlgo { origin_cluster, hyperplane_sweep, interface_growth };

const char* algo_name(BernoulliAlgo a);

struct AlgoRevealment {
  std::vector<std::uint64_t> counts;  // per-edge reveal counts
  std::uint64_t runs = 0;
  std::uint64_t output_count = 0;
  Estimate revealed_size;  // mean number of edges revealed per run

  double rev(std::int64_t e) const;
  double rev_se(std::int64_t e) const;
  double output_rate() const;
};

// Runs the algorithm n times against fresh Bernoulli(p) configurations.
// origin_cluster targets the sup-norm-R shell; the box must be Λ_R for it.
AlgoRevealment measure_revealment(const Lattice& box, BernoulliAlgo algo, int R, double p,
                                  std::uint64_t n, std::uint64_t seed, int workers);

// Revealment bounds, one check per algorithm:
//   origin_cluster:   sum_e Rev(e) <= 2d sum_v P[0<->v]   (the union bound
//                     over the <= 2d edges at each cluster vertex; the
//                     factor-2 variant is reported unasserted),
//   hyperplane_sweep: max over the far half  Rev(e) <= 2 P[A_1(R)],
//   interface_growth: max over the far quarter Rev(e) <= 2 P[A_2(R)].
oracle::CheckResult check_algo_revealment(BernoulliAlgo algo, int d, double p, double k, int R,
                                          std::uint64_t n, std::uint64_t seed, int workers);

}  // namespace percolab
