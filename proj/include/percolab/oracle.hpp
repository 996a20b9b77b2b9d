#pragma once
// Exact small-instance computations, used to pin down expected values in tests
// and to cross-check the Monte Carlo estimators.  Everything here enumerates
// configurations in full (no sampling), so instance sizes are hard-capped.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace percolab::oracle {

inline constexpr int kMaxEnumUnits = 24;       // probability / derivative
inline constexpr int kMaxInfluenceUnits = 20;  // per-unit influences
inline constexpr int kMaxRevealUnits = 16;     // full algorithm replay
inline constexpr int kMaxStoppedLength = 12;   // stopped-sequence KL

// Boolean event over a {0,1}^m configuration.
using EventFn = std::function<bool(const std::vector<std::uint8_t>&)>;

// Deterministic exploration run against a fixed configuration.  `revealed`
// has size m on entry (all zero) and is marked 1 for every unit the run
// examined.  Returns the run's output.
using RunnerFn =
    std::function<bool(const std::vector<std::uint8_t>& config, std::vector<std::uint8_t>& revealed)>;

double enumerate_probability(int m, double p, const EventFn& event);
// Independent, non-identical unit probabilities.
double enumerate_probability_mixed(const std::vector<double>& probs, const EventFn& event);

// P[unit is decisive], i.e. flipping the unit changes the event outcome.
double enumerate_decisive(int m, double p, const EventFn& event, int unit);
// Resampling influence P[1_A(X) != 1_A(X with the unit redrawn)] = 2p(1-p) P[decisive].
double enumerate_influence(int m, double p, const EventFn& event, int unit);
// Signed partial derivative dP/dp_unit = E[1_A(config with unit=1) - 1_A(config with unit=0)].
double enumerate_partial_derivative(int m, double p, const EventFn& event, int unit);
// Total derivative dP/dp (all units share p) = sum of the partials.
double enumerate_derivative(int m, double p, const EventFn& event);

// Var of P[A | units in `subset`].
double enumerate_conditional_variance(int m, double p, const EventFn& event,
                                      const std::vector<int>& subset);

struct RevealmentReport {
  std::vector<double> rev;  // per-unit revealment P[unit examined]
  double output_prob = 0.0;
  double sum_rev = 0.0;
  double max_rev = 0.0;
  bool determines = true;  // run output == event on every configuration
};
RevealmentReport enumerate_revealment(int m, double p, const RunnerFn& run, const EventFn& event);

// Shared report shape for inequality checks (exact and Monte Carlo alike).
struct CheckTerm {
  std::string name;
  double value = 0.0;
  double se = 0.0;
};
struct CheckResult {
  std::string check;
  std::vector<CheckTerm> terms;
  bool holds = false;
  double margin_sigma = 0.0;  // slack / combined se, clamped to +-1e9 for exact checks
};

double term(const CheckResult& r, const std::string& name);

// Var(1_A) <= 1/2 sum_e Rev(e) Infl(e); with a subset E', the left side becomes
// Var P[A | F_{E'}] and the sum runs over E'.  Requires a determining run.
CheckResult check_osss(int m, double p, const RunnerFn& run, const EventFn& event,
                       const std::vector<int>& subset = {});

// sum_{e in E'} dP/dp_e >= Var P[A|F_{E'}] / (p(1-p) max_{e in E'} Rev(e)).
CheckResult check_genlb(int m, double p, const RunnerFn& run, const EventFn& event,
                        const std::vector<int>& subset = {});

// |P_{p;q}^{E'}[A] - P_p[A]| <= max{1/sqrt(p(1-p)), 1/sqrt(q(1-q))} |p-q|
//                                 sqrt(max{P_p[A], P_{p;q}^{E'}[A]} E_p|W cap E'|),
// where P_{p;q}^{E'} flips the parameter to q on E'.  Also reports the KL form
// with sqrt(2 max{..} E|W| KL(Ber(p)||Ber(q))) as `rhs_kl`.
CheckResult check_genub(int m, double p, double q, const RunnerFn& run, const EventFn& event,
                        const std::vector<int>& subset = {});

// max_{e in E'} Rev(e) >= Var^{2/3} / (p(1-p) P[A] |E'|)^{1/3}.
CheckResult check_genrevbound(int m, double p, const RunnerFn& run, const EventFn& event,
                              const std::vector<int>& subset = {});

// ---- scalar toolkit ----

double normal_cdf(double x);
double normal_pdf(double x);
double normal_quantile(double u);

// KL divergence between Bernoulli(x) and Bernoulli(y), nats; +inf when singular.
double kl_bernoulli(double x, double y);

// (x-y)^2 <= 2 max{x,y} KL(Ber(x)||Ber(y)) over a grid of (x, y).
CheckResult check_pinsker(double step = 0.01);

// Phi(Phi^-1(a) + eps) - a >= sqrt(2/pi) a(1-a) eps - (phi(1)/2) eps^2 over a grid;
// half-spaces realise the left side exactly, so this probes the tight case.
CheckResult check_isoperimetry(double a_step = 0.02, double eps_step = 0.02, double eps_max = 2.0);

// Stopping rule: maps a full sequence to a stop index in [1, n].  Must be
// adapted: the decision to stop at k may depend only on the first k entries.
using TauFn = std::function<int(const std::vector<std::uint8_t>&)>;

struct StoppedKl {
  double lhs = 0.0;  // KL between the stopped sequences
  double rhs = 0.0;  // E[tau] * KL(Ber(p)||Ber(q))
  double expected_tau = 0.0;
};
// Enumerates all 2^n sequences; rejects non-adapted rules.
StoppedKl kl_stopped(int n, double p, double q, const TauFn& tau);
// tau = first index with a 1, else n.
StoppedKl kl_stopped_first_success(int n, double p, double q);
CheckResult check_kl_stopped(int n, double p, double q);

}  // namespace percolab::oracle
