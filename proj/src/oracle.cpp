#include "percolab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>

#include "percolab/error.hpp"
#include "percolab/summation.hpp"

namespace percolab::oracle {

namespace {

constexpr double kExactTol = 1e-11;

void require_unit_count(int m, int cap, const char* what) {
  require_that(m >= 1, ErrorKind::invalid_parameter, "unit count must be positive");
  if (m > cap) fail(ErrorKind::resource_limit, std::string("instance too large for exact ") + what);
}

void require_prob(double p) {
  require_that(p > 0.0 && p < 1.0, ErrorKind::invalid_parameter, "probability must lie in (0,1)");
}

void require_subset(int m, const std::vector<int>& subset) {
  for (int e : subset)
    require_that(e >= 0 && e < m, ErrorKind::invalid_query, "subset index out of range");
}

std::vector<int> full_subset(int m) {
  std::vector<int> s(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) s[static_cast<std::size_t>(i)] = i;
  return s;
}

// Depth-first enumeration of {0,1}^m with the exact product weight carried
// along the path; visitor(config, weight).
template <typename Visitor>
void walk_configs(const std::vector<double>& probs, Visitor&& visit) {
  const int m = static_cast<int>(probs.size());
  std::vector<std::uint8_t> config(static_cast<std::size_t>(m), 0);
  // Explicit stack of (depth, weight, branch) to avoid recursion overhead.
  struct Frame {
    int depth;
    double weight;
    int next_value;  // 0, 1, or 2 = exhausted
  };
  std::vector<Frame> stack;
  stack.reserve(static_cast<std::size_t>(m) + 1);
  stack.push_back({0, 1.0, 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.depth == m) {
      visit(const_cast<const std::vector<std::uint8_t>&>(config), f.weight);
      stack.pop_back();
      continue;
    }
    if (f.next_value == 2) {
      stack.pop_back();
      continue;
    }
    const int v = f.next_value++;
    config[static_cast<std::size_t>(f.depth)] = static_cast<std::uint8_t>(v);
    const double w = f.weight * (v ? probs[static_cast<std::size_t>(f.depth)]
                                   : 1.0 - probs[static_cast<std::size_t>(f.depth)]);
    stack.push_back({f.depth + 1, w, 0});
  }
}

double clamp_margin(double slack, double scale) {
  const double tol = kExactTol * std::max(1.0, scale);
  if (slack >= tol) return 1e9;
  if (slack >= -tol) return 0.0;
  return -1e9;
}

}  // namespace

double enumerate_probability_mixed(const std::vector<double>& probs, const EventFn& event) {
  require_unit_count(static_cast<int>(probs.size()), kMaxEnumUnits, "probability");
  for (double p : probs) require_prob(p);
  NeumaierSum sum;
  walk_configs(probs, [&](const std::vector<std::uint8_t>& config, double w) {
    if (event(config)) sum.add(w);
  });
  return sum.value();
}

double enumerate_probability(int m, double p, const EventFn& event) {
  require_unit_count(m, kMaxEnumUnits, "probability");
  require_prob(p);
  return enumerate_probability_mixed(std::vector<double>(static_cast<std::size_t>(m), p), event);
}

double enumerate_decisive(int m, double p, const EventFn& event, int unit) {
  require_unit_count(m, kMaxInfluenceUnits, "influence");
  require_prob(p);
  require_that(unit >= 0 && unit < m, ErrorKind::invalid_query, "unit index out of range");
  const std::vector<double> probs(static_cast<std::size_t>(m), p);
  NeumaierSum sum;
  std::vector<std::uint8_t> scratch(static_cast<std::size_t>(m));
  walk_configs(probs, [&](const std::vector<std::uint8_t>& config, double w) {
    if (config[static_cast<std::size_t>(unit)]) return;  // count each pair once
    scratch = config;
    scratch[static_cast<std::size_t>(unit)] = 1;
    if (event(config) != event(scratch)) sum.add(w / (1.0 - p));  // weight of the pair's base
  });
  return sum.value();
}

double enumerate_influence(int m, double p, const EventFn& event, int unit) {
  return 2.0 * p * (1.0 - p) * enumerate_decisive(m, p, event, unit);
}

double enumerate_partial_derivative(int m, double p, const EventFn& event, int unit) {
  require_unit_count(m, kMaxInfluenceUnits, "derivative");
  require_prob(p);
  require_that(unit >= 0 && unit < m, ErrorKind::invalid_query, "unit index out of range");
  const std::vector<double> probs(static_cast<std::size_t>(m), p);
  NeumaierSum sum;
  std::vector<std::uint8_t> scratch(static_cast<std::size_t>(m));
  walk_configs(probs, [&](const std::vector<std::uint8_t>& config, double w) {
    if (config[static_cast<std::size_t>(unit)]) return;
    scratch = config;
    scratch[static_cast<std::size_t>(unit)] = 1;
    const int hi = event(scratch) ? 1 : 0;
    const int lo = event(config) ? 1 : 0;
    if (hi != lo) sum.add((w / (1.0 - p)) * static_cast<double>(hi - lo));
  });
  return sum.value();
}

double enumerate_derivative(int m, double p, const EventFn& event) {
  NeumaierSum sum;
  for (int e = 0; e < m; ++e) sum.add(enumerate_partial_derivative(m, p, event, e));
  return sum.value();
}

double enumerate_conditional_variance(int m, double p, const EventFn& event,
                                      const std::vector<int>& subset_in) {
  require_unit_count(m, kMaxInfluenceUnits, "conditional variance");
  require_prob(p);
  std::vector<int> subset = subset_in.empty() ? full_subset(m) : subset_in;
  require_subset(m, subset);
  const std::size_t patterns = std::size_t{1} << subset.size();
  require_that(patterns <= (std::size_t{1} << 20), ErrorKind::resource_limit,
               "conditioning subset too large");
  std::vector<NeumaierSum> joint(patterns), marginal(patterns);
  const std::vector<double> probs(static_cast<std::size_t>(m), p);
  walk_configs(probs, [&](const std::vector<std::uint8_t>& config, double w) {
    std::size_t key = 0;
    for (std::size_t i = 0; i < subset.size(); ++i)
      key |= static_cast<std::size_t>(config[static_cast<std::size_t>(subset[i])]) << i;
    marginal[key].add(w);
    if (event(config)) joint[key].add(w);
  });
  NeumaierSum second_moment, mean;
  for (std::size_t k = 0; k < patterns; ++k) {
    const double pm = marginal[k].value();
    if (pm <= 0.0) continue;
    const double cond = joint[k].value() / pm;
    second_moment.add(pm * cond * cond);
    mean.add(joint[k].value());
  }
  const double mu = mean.value();
  return std::max(0.0, second_moment.value() - mu * mu);
}

RevealmentReport enumerate_revealment(int m, double p, const RunnerFn& run, const EventFn& event) {
  require_unit_count(m, kMaxRevealUnits, "revealment");
  require_prob(p);
  RevealmentReport report;
  std::vector<NeumaierSum> rev(static_cast<std::size_t>(m));
  NeumaierSum out_prob;
  std::vector<std::uint8_t> revealed(static_cast<std::size_t>(m));
  const std::vector<double> probs(static_cast<std::size_t>(m), p);
  walk_configs(probs, [&](const std::vector<std::uint8_t>& config, double w) {
    std::fill(revealed.begin(), revealed.end(), std::uint8_t{0});
    const bool out = run(config, revealed);
    if (out) out_prob.add(w);
    for (int e = 0; e < m; ++e)
      if (revealed[static_cast<std::size_t>(e)]) rev[static_cast<std::size_t>(e)].add(w);
    if (out != event(config)) report.determines = false;
  });
  report.rev.resize(static_cast<std::size_t>(m));
  NeumaierSum total;
  for (int e = 0; e < m; ++e) {
    report.rev[static_cast<std::size_t>(e)] = rev[static_cast<std::size_t>(e)].value();
    total.add(report.rev[static_cast<std::size_t>(e)]);
    report.max_rev = std::max(report.max_rev, report.rev[static_cast<std::size_t>(e)]);
  }
  report.sum_rev = total.value();
  report.output_prob = out_prob.value();
  return report;
}

double term(const CheckResult& r, const std::string& name) {
  for (const auto& t : r.terms)
    if (t.name == name) return t.value;
  fail(ErrorKind::internal, "missing check term: " + name);
}

namespace {

RevealmentReport determining_revealment(int m, double p, const RunnerFn& run, const EventFn& event) {
  RevealmentReport report = enumerate_revealment(m, p, run, event);
  require_that(report.determines, ErrorKind::contract_violation,
               "exploration run does not determine the event");
  return report;
}

}  // namespace

CheckResult check_osss(int m, double p, const RunnerFn& run, const EventFn& event,
                       const std::vector<int>& subset_in) {
  std::vector<int> subset = subset_in.empty() ? full_subset(m) : subset_in;
  require_subset(m, subset);
  RevealmentReport report = determining_revealment(m, p, run, event);
  const double var = enumerate_conditional_variance(m, p, event, subset);
  NeumaierSum rhs_sum;
  for (int e : subset)
    rhs_sum.add(report.rev[static_cast<std::size_t>(e)] * enumerate_influence(m, p, event, e));
  const double rhs = 0.5 * rhs_sum.value();
  const double slack = rhs - var;
  CheckResult r;
  r.check = "osss";
  r.terms = {{"lhs_var", var, 0.0},
             {"rhs_half_sum_rev_infl", rhs, 0.0},
             {"slack", slack, 0.0},
             {"output_prob", report.output_prob, 0.0}};
  r.margin_sigma = clamp_margin(slack, std::max(var, rhs));
  r.holds = r.margin_sigma >= 0.0;
  return r;
}

CheckResult check_genlb(int m, double p, const RunnerFn& run, const EventFn& event,
                        const std::vector<int>& subset_in) {
  std::vector<int> subset = subset_in.empty() ? full_subset(m) : subset_in;
  require_subset(m, subset);
  RevealmentReport report = determining_revealment(m, p, run, event);
  NeumaierSum deriv_sum;
  for (int e : subset) deriv_sum.add(enumerate_partial_derivative(m, p, event, e));
  const double lhs = deriv_sum.value();
  const double var = enumerate_conditional_variance(m, p, event, subset);
  double max_rev = 0.0;
  for (int e : subset) max_rev = std::max(max_rev, report.rev[static_cast<std::size_t>(e)]);
  const double pq = p * (1.0 - p);
  const double rhs = max_rev > 0.0 ? var / (pq * max_rev) : 0.0;
  const double slack = lhs - rhs;
  CheckResult r;
  r.check = "genlb";
  r.terms = {{"lhs_sum_partials", lhs, 0.0},
             {"rhs_var_over_pq_maxrev", rhs, 0.0},
             {"rhs_stated_factor4", 4.0 * rhs, 0.0},
             {"max_rev", max_rev, 0.0},
             {"cond_var", var, 0.0},
             {"slack", slack, 0.0}};
  r.margin_sigma = clamp_margin(slack, std::max(std::abs(lhs), rhs));
  r.holds = r.margin_sigma >= 0.0;
  return r;
}

CheckResult check_genub(int m, double p, double q, const RunnerFn& run, const EventFn& event,
                        const std::vector<int>& subset_in) {
  require_prob(q);
  std::vector<int> subset = subset_in.empty() ? full_subset(m) : subset_in;
  require_subset(m, subset);
  RevealmentReport report = determining_revealment(m, p, run, event);
  const double prob_p = enumerate_probability(m, p, event);
  std::vector<double> probs(static_cast<std::size_t>(m), p);
  for (int e : subset) probs[static_cast<std::size_t>(e)] = q;
  const double prob_pq = enumerate_probability_mixed(probs, event);
  NeumaierSum witness;
  for (int e : subset) witness.add(report.rev[static_cast<std::size_t>(e)]);
  const double expected_witness = witness.value();
  const double lhs = std::abs(prob_pq - prob_p);
  const double prefactor =
      std::max(1.0 / std::sqrt(p * (1.0 - p)), 1.0 / std::sqrt(q * (1.0 - q)));
  const double prob_max = std::max(prob_p, prob_pq);
  const double rhs = prefactor * std::abs(q - p) * std::sqrt(prob_max * expected_witness);
  const double rhs_kl = std::sqrt(2.0 * prob_max * expected_witness * kl_bernoulli(p, q));
  const double slack = std::min(rhs - lhs, rhs_kl - lhs);
  CheckResult r;
  r.check = "genub";
  r.terms = {{"lhs_abs_diff", lhs, 0.0},
             {"rhs_direct", rhs, 0.0},
             {"rhs_kl", rhs_kl, 0.0},
             {"prob_p", prob_p, 0.0},
             {"prob_pq", prob_pq, 0.0},
             {"expected_witness", expected_witness, 0.0},
             {"slack", slack, 0.0}};
  r.margin_sigma = clamp_margin(slack, std::max({lhs, rhs, rhs_kl}));
  r.holds = r.margin_sigma >= 0.0;
  return r;
}

CheckResult check_genrevbound(int m, double p, const RunnerFn& run, const EventFn& event,
                              const std::vector<int>& subset_in) {
  std::vector<int> subset = subset_in.empty() ? full_subset(m) : subset_in;
  require_subset(m, subset);
  RevealmentReport report = determining_revealment(m, p, run, event);
  double max_rev = 0.0;
  for (int e : subset) max_rev = std::max(max_rev, report.rev[static_cast<std::size_t>(e)]);
  const double var = enumerate_conditional_variance(m, p, event, subset);
  const double prob = enumerate_probability(m, p, event);
  const double pq = p * (1.0 - p);
  const double denom = pq * prob * static_cast<double>(subset.size());
  const double rhs = denom > 0.0 ? std::pow(var, 2.0 / 3.0) / std::cbrt(denom) : 0.0;
  const double rhs_stated = denom > 0.0 ? std::pow(4.0 * var, 2.0 / 3.0) / std::cbrt(denom) : 0.0;
  const double slack = max_rev - rhs;
  CheckResult r;
  r.check = "genrevbound";
  r.terms = {{"lhs_max_rev", max_rev, 0.0},
             {"rhs", rhs, 0.0},
             {"rhs_stated_factor4", rhs_stated, 0.0},
             {"cond_var", var, 0.0},
             {"prob", prob, 0.0},
             {"slack", slack, 0.0}};
  r.margin_sigma = clamp_margin(slack, std::max(max_rev, rhs));
  r.holds = r.margin_sigma >= 0.0;
  return r;
}

// ---- scalar toolkit ----

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 1.0 / std::sqrt(8.0 * std::atan(1.0));
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double normal_quantile(double u) {
  require_that(u > 0.0 && u < 1.0, ErrorKind::invalid_parameter,
               "quantile argument must lie in (0,1)");
  // Acklam's rational approximation, then one Halley step against erfc.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (u < plow) {
    const double t = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
        ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  } else if (u <= 1.0 - plow) {
    const double t = u - 0.5;
    const double s = t * t;
    x = (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) * t /
        (((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1.0);
  } else {
    const double t = std::sqrt(-2.0 * std::log(1.0 - u));
    x = -(((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
        ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  }
  const double err = normal_cdf(x) - u;
  const double pdf = normal_pdf(x);
  if (pdf > 0.0) {
    const double step = err / pdf;
    x -= step / (1.0 + 0.5 * x * step);  // Halley refinement
  }
  return x;
}

double kl_bernoulli(double x, double y) {
  require_that(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0, ErrorKind::invalid_parameter,
               "KL arguments must lie in [0,1]");
  if (x == y) return 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  if (y <= 0.0) return x > 0.0 ? inf : 0.0;
  if (y >= 1.0) return x < 1.0 ? inf : 0.0;
  double sum = 0.0;
  if (x > 0.0) sum += x * std::log(x / y);
  if (x < 1.0) sum += (1.0 - x) * std::log((1.0 - x) / (1.0 - y));
  return sum;
}

CheckResult check_pinsker(double step) {
  require_that(step > 0.0 && step < 0.5, ErrorKind::invalid_parameter,
               "pinsker grid step must lie in (0,0.5)");
  double min_slack = std::numeric_limits<double>::infinity();
  double worst_x = 0.0, worst_y = 0.0;
  long count = 0;
  for (double x = step; x < 1.0 - step / 2; x += step) {
    for (double y = step; y < 1.0 - step / 2; y += step) {
      const double diff = x - y;
      const double slack = 2.0 * std::max(x, y) * kl_bernoulli(x, y) - diff * diff;
      ++count;
      if (slack < min_slack) {
        min_slack = slack;
        worst_x = x;
        worst_y = y;
      }
    }
  }
  CheckResult r;
  r.check = "pinsker";
  r.terms = {{"min_slack", min_slack, 0.0},
             {"worst_x", worst_x, 0.0},
             {"worst_y", worst_y, 0.0},
             {"grid_points", static_cast<double>(count), 0.0}};
  r.margin_sigma = clamp_margin(min_slack, 1.0);
  r.holds = r.margin_sigma >= 0.0;
  return r;
}

CheckResult check_isoperimetry(double a_step, double eps_step, double eps_max) {
  require_that(a_step > 0.0 && a_step < 0.5, ErrorKind::invalid_parameter,
               "isoperimetry grid step must lie in (0,0.5)");
  require_that(eps_step > 0.0 && eps_max > 0.0, ErrorKind::invalid_parameter,
               "epsilon grid must be positive");
  const double quad_coeff = 0.5 * normal_pdf(1.0);  // sup |phi'| = phi(1)
  const double lin_coeff = std::sqrt(2.0 / (4.0 * std::atan(1.0)));  // sqrt(2/pi)
  double min_slack = std::numeric_limits<double>::infinity();
  double worst_a = 0.0, worst_eps = 0.0;
  for (double a = a_step; a < 1.0 - a_step / 2; a += a_step) {
    const double qa = normal_quantile(a);
    // eps = 0 is excluded: both sides vanish there and only round-trip noise remains
    for (double eps = eps_step; eps <= eps_max + eps_step / 2; eps += eps_step) {
      const double gain = normal_cdf(qa + eps) - a;  // half-spaces attain the isoperimetric minimum
      const double rhs = lin_coeff * a * (1.0 - a) * eps - quad_coeff * eps * eps;
      const double slack = gain - rhs;
      if (slack < min_slack) {
        min_slack = slack;
        worst_a = a;
        worst_eps = eps;
      }
    }
  }
  const double spot_a = 0.3, spot_eps = 0.1;
  const double spot_lhs = normal_cdf(normal_quantile(spot_a) + spot_eps) - spot_a;
  const double spot_rhs =
      lin_coeff * spot_a * (1.0 - spot_a) * spot_eps - quad_coeff * spot_eps * spot_eps;
  CheckResult r;
  r.check = "isoperimetry";
  r.terms = {{"min_slack", min_slack, 0.0},
             {"worst_a", worst_a, 0.0},
             {"worst_eps", worst_eps, 0.0},
             {"spot_lhs", spot_lhs, 0.0},
             {"spot_rhs", spot_rhs, 0.0}};
  r.margin_sigma = clamp_margin(min_slack, 1.0);
  r.holds = r.margin_sigma >= 0.0;
  return r;
}

StoppedKl kl_stopped(int n, double p, double q, const TauFn& tau) {
  require_that(n >= 1, ErrorKind::invalid_parameter, "sequence length must be positive");
  if (n > kMaxStoppedLength)
    fail(ErrorKind::resource_limit, "sequence too long for exact stopped-KL");
  require_prob(p);
  require_prob(q);
  const std::size_t total = std::size_t{1} << n;
  std::vector<std::uint8_t> seq(static_cast<std::size_t>(n));
  std::vector<std::uint8_t> alt(static_cast<std::size_t>(n));
  auto fill = [&](std::size_t bits, std::vector<std::uint8_t>& out) {
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = (bits >> i) & 1u;
  };
  // Adaptedness: the stop index may not change when entries at or past it flip.
  for (std::size_t bits = 0; bits < total; ++bits) {
    fill(bits, seq);
    const int k = tau(seq);
    require_that(k >= 1 && k <= n, ErrorKind::invalid_query, "stop index out of range");
    for (int j = k; j < n; ++j) {
      fill(bits ^ (std::size_t{1} << j), alt);
      require_that(tau(alt) == k, ErrorKind::contract_violation,
                   "stopping rule depends on entries past the stop index");
    }
  }
  NeumaierSum lhs_sum, tau_sum;
  for (std::size_t bits = 0; bits < total; ++bits) {
    fill(bits, seq);
    const int k = tau(seq);
    bool suffix_zero = true;
    for (int j = k; j < n; ++j) suffix_zero = suffix_zero && seq[static_cast<std::size_t>(j)] == 0;
    if (!suffix_zero) continue;  // visit each stopped prefix exactly once
    double px = 1.0, py = 1.0;
    for (int j = 0; j < k; ++j) {
      const bool one = seq[static_cast<std::size_t>(j)] != 0;
      px *= one ? p : 1.0 - p;
      py *= one ? q : 1.0 - q;
    }
    lhs_sum.add(px * std::log(px / py));
    tau_sum.add(px * static_cast<double>(k));
  }
  StoppedKl out;
  out.lhs = lhs_sum.value();
  out.expected_tau = tau_sum.value();
  out.rhs = out.expected_tau * kl_bernoulli(p, q);
  return out;
}

StoppedKl kl_stopped_first_success(int n, double p, double q) {
  return kl_stopped(n, p, q, [n](const std::vector<std::uint8_t>& seq) {
    for (int i = 0; i < n; ++i)
      if (seq[static_cast<std::size_t>(i)]) return i + 1;
    return n;
  });
}

CheckResult check_kl_stopped(int n, double p, double q) {
  const StoppedKl s = kl_stopped_first_success(n, p, q);
  const double gap = std::abs(s.lhs - s.rhs);
  CheckResult r;
  r.check = "kl-stopped";
  r.terms = {{"lhs_stopped_kl", s.lhs, 0.0},
             {"rhs_expected_tau_kl", s.rhs, 0.0},
             {"expected_tau", s.expected_tau, 0.0},
             {"abs_gap", gap, 0.0}};
  const double tol = 1e-12 * std::max(1.0, std::abs(s.lhs));
  r.holds = gap <= tol;
  r.margin_sigma = r.holds ? 1e9 : -1e9;
  return r;
}

}  // namespace percolab::oracle
