#pragma once
// Monte Carlo layer for the level-set model: event estimation on excursion
// masks, level-derivative estimation, the truncation/Russo/conditional-
// variance checks, the differential bounds for one-arm and crossing
// probabilities, and the noise-box revealment bounds. Every entry point is a
// deterministic function of (parameters, n, seed) for any worker count.

#include <cstdint>
#include <vector>

#include "percolab/estimate.hpp"
#include "percolab/gaussian_explorer.hpp"
#include "percolab/gaussian_field.hpp"
#include "percolab/oracle.hpp"

namespace percolab {

// P[Cross_k(R)] at level ell.
Estimate gaussian_crossing_estimate(const Kernel& q, double ell, double k, double R,
                                    std::uint64_t n, std::uint64_t seed, int workers);

// P[Λ_{r_in} <-> ∂Λ_R] at level ell.
Estimate gaussian_one_arm_estimate(const Kernel& q, double ell, double r_in, double R,
                                   std::uint64_t n, std::uint64_t seed, int workers);

// Two arms from Λ_{r_in}: a positive one to ∂Λ_R, plus a negative-excursion
// one (diagonal adjacency) under the interface convention.
Estimate gaussian_two_arm_estimate(const Kernel& q, double ell, double r_in, double R,
                                   std::uint64_t n, std::uint64_t seed, int workers);

// P[Λ_{r_in} <-> ∂Λ_R] for every R in the (increasing) list, from shared
// replicas; per-seed indicators are non-increasing in R.
std::vector<Estimate> gaussian_one_arm_sweep(const Kernel& q, double ell, double r_in,
                                             const std::vector<double>& R_list, std::uint64_t n,
                                             std::uint64_t seed, int workers);

// θ̂ proxy P[Λ_1 <-> ∂Λ_R] per level; the field is shared across the level
// sweep, so per-seed indicators are non-decreasing in ell.
std::vector<Estimate> gaussian_theta_curve(const Kernel& q, const std::vector<double>& ells,
                                           double R, std::uint64_t n, std::uint64_t seed,
                                           int workers);

// dP[Cross_k(R)]/dℓ via central finite difference with common noise; the
// per-replica difference of indicators is 0/1 because the event is
// increasing in the level.
Estimate gaussian_crossing_derivative(const Kernel& q, double ell, double k, double R, double h,
                                      std::uint64_t n, std::uint64_t seed, int workers);

// P[A_2(r,R)] <= P[A_1(r,R)]^2 at the given level, with the matched-adjacency
// two-arm event (the constant-one form needs the negative arm to carry the
// positive arm's law, which only the symmetric discretisation provides).
// Both sides come from independent replica sets; margin judged at 3 sigma.
oracle::CheckResult check_field_two_arm(const Kernel& q, double r, double R, double ell,
                                        std::uint64_t n, std::uint64_t seed, int workers);

// |P[f ∈ Cross_k(R)] - P[f_r ∈ Cross_k(R)]| per truncation radius under a
// common white noise, plus the deterministic kernel tails ||q - q_r||_2.
// Verdict: discrepancies non-increasing within 3 sigma, tails decreasing,
// and a zero tail forces a zero discrepancy.
oracle::CheckResult check_truncation(const Kernel& q, const std::vector<double>& r_list, double k,
                                     double R, double ell, std::uint64_t n, std::uint64_t seed,
                                     int workers);

// dP[Cross_1(R)]/dℓ >= (c min{1,(s/r)^d}/||q||_2) Σ_S Infl(S), influences by
// resampling one noise box at a time. Boxes whose kernel window misses the
// event region entirely must show zero influence exactly. The constant is
// existential, so the verdict asserts positivity of both sides and locality;
// the fitted c is reported.
oracle::CheckResult check_gaussian_russo(const Kernel& q, double s, double R, double ell,
                                         std::uint64_t n, std::uint64_t seed, int workers);

enum class BoxSubset { all, right_half, quarter };

const char* subset_name(BoxSubset s);

// dP[Cross_k(R)]/dℓ >= (c min{1,(s/r)^d}/||q||_2) Var[P[A|F_{S'}]] / max Rev(S')
// with Rev from the matching box algorithm (random line for all boxes, the
// left-line sweep for the right half, the level-line variant for the
// top-right quarter). The conditional variance comes from paired replicas
// sharing the S' noise; the verdict asserts agreement with the
// law-of-total-variance route at 3 sigma. subset = all degenerates to
// Var(1_A) exactly (the paired fields coincide).
oracle::CheckResult check_lbderiv(const Kernel& q, double s, double k, double R, double ell,
                                  std::uint64_t n, std::uint64_t seed, int workers,
                                  BoxSubset subset);

enum class GaussianBound { ubgf1, ubgf2, lbgf1, lbgf2 };

const char* gaussian_bound_name(GaussianBound b);

struct GaussianBoundParams {
  double ell = 0.0;
  double ell_prime = 0.1;       // ubgf1 only; requires ell <= ell_prime
  double k = 1.0;               // crossing aspect
  std::vector<double> R_list;   // scales; ubgf1 asserts at each, the others fit c per R
  double h = 0.05;              // finite-difference step for level derivatives
  std::uint64_t n = 2000;
  std::uint64_t seed = 1;
  int workers = 1;
};

// Differential bounds for level-set probabilities (r = kernel support):
//   ubgf1: P_{ℓ'}[A_1(1,R)] - P_ℓ[A_1(1,R)] <=
//            (r^{d/2}(ℓ'-ℓ)/∫q) sqrt(P_{ℓ'}[A_1(1,R)] Σ_v P_ℓ[Λ_1 <-> v+Λ_{6r}])
//          over v in the r-lattice of Λ_{R+2r}; explicit constant, asserted
//          at 3 sigma for every R.
//   ubgf2: d⁺P[Cross_k(R)]/dℓ <= (c R^{d/2}/∫q) sqrt(P[A_2(2r,R-2r)]); R >= 4r.
//   lbgf1: d⁻P[Cross_k(R)]/dℓ >= (c/||q||_2) P(1-P) / ((r/R) Σ_{i=2}^{R/r} P[A_1(2r,ir)]); R >= 8r.
//   lbgf2: d⁻P[Cross_k(R)]/dℓ >= (c/||q||_2) P[Cross_{1/(8k)}(kR)]^4
//            (1-P[Cross_{8k}(R/8)])^2 / P[A_2(2r,R-2r)]; d=2, R >= 8r.
// For the existential-constant forms the per-R ratios are fitted and the
// verdict asserts their stability (factor <= 2 across the sweep).
oracle::CheckResult check_ubgf(const Kernel& q, GaussianBound bound,
                               const GaussianBoundParams& params);

// Revealment bounds of the box algorithms (r = kernel support, box scale r):
//   one_arm_growth: Σ_S Rev(S) <= Σ_{v in rZ^d ∩ Λ_{R+2r}} P[Λ_1 <-> v+Λ_{6r}].
//     The seed phase reveals a fixed set of boxes around Λ_1 with probability
//     one, so the plain sum form fails at strongly negative levels; the check
//     also reports the seed-corrected form (seed count + link sum), and the
//     verdict asserts both at 3 sigma.
//   random_line: max_S Rev(S) <= (4r/R) Σ_{i=2}^{R/r} P[A_1(2r,ir)].
//   left_line:   max over boxes within r of the right half <= P[A_1(2r,R-2r)].
//   level_line:  max over boxes within r of the top-right quarter <= P[A_2(2r,R-2r)].
//   annulus_seed (determines A_1(2,R)): max_S Rev(S) <= (5/R) Σ_{i=0}^{R-1} g_i,
//     g_i = P[A_1(2,i)] and g_i = 1 for i <= 2.
oracle::CheckResult check_field_revealment(const Kernel& q, FieldAlgo algo, double k, double R,
                                           double ell, std::uint64_t n, std::uint64_t seed,
                                           int workers);

}  // namespace percolab
