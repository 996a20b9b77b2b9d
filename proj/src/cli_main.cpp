// Experiment runner. Parses single-document JSON specs, dispatches to the
// estimator / oracle layers, and emits CSV or JSON with the master seed and
// a hash of the spec bytes stamped on every output.
//
// Exit codes: 0 success / verdict holds, 2 usage or schema error,
// 3 resource limit, 4 verdict failed.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "percolab/bernoulli.hpp"
#include "percolab/bernoulli_algorithms.hpp"
#include "percolab/connectivity.hpp"
#include "percolab/error.hpp"
#include "percolab/estimators.hpp"
#include "percolab/gaussian_estimators.hpp"
#include "percolab/gaussian_explorer.hpp"
#include "percolab/gaussian_field.hpp"
#include "percolab/lattice.hpp"
#include "percolab/oracle.hpp"
#include "percolab/rng.hpp"

using json = nlohmann::ordered_json;
using namespace percolab;

namespace {

constexpr const char* kCsvHeader = "model,event,param,R,k,n,estimate,stderr,seed";
constexpr const char* kRevHeader = "model,algorithm,unit,param,R,k,n,revealment,stderr,seed";

struct CliError {
  int code;
  std::string msg;
};

[[noreturn]] void usage_fail(const std::string& msg) { throw CliError{2, msg}; }

// ---- provenance ----

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) usage_fail("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) usage_fail("cannot open output file: " + path);
  out << text;
  if (!out) usage_fail("failed writing output file: " + path);
}

// shortest round-trip decimal; identical bytes for identical doubles
std::string fmt_num(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---- JSON schema plumbing ----

json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) usage_fail("malformed JSON in " + what);
  return j;
}

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) usage_fail(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) usage_fail("unknown key '" + it.key() + "' in " + where);
  }
}

double get_num(const json& j, const std::string& key, double dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number()) usage_fail("field '" + key + "' must be a number");
  return j[key].get<double>();
}

int get_int(const json& j, const std::string& key, int dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number_integer()) usage_fail("field '" + key + "' must be an integer");
  return j[key].get<int>();
}

std::uint64_t get_u64(const json& j, const std::string& key, std::uint64_t dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number_unsigned() && !j[key].is_number_integer())
    usage_fail("field '" + key + "' must be a non-negative integer");
  if (j[key].is_number_integer() && j[key].get<std::int64_t>() < 0)
    usage_fail("field '" + key + "' must be a non-negative integer");
  return j[key].get<std::uint64_t>();
}

std::string get_str(const json& j, const std::string& key, const std::string& dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_string()) usage_fail("field '" + key + "' must be a string");
  return j[key].get<std::string>();
}

std::vector<double> get_num_list(const json& j, const std::string& key,
                                 std::vector<double> dflt) {
  if (!j.contains(key)) return dflt;
  std::vector<double> out;
  if (j[key].is_number()) {
    out.push_back(j[key].get<double>());
    return out;
  }
  if (!j[key].is_array() || j[key].empty()) usage_fail("field '" + key + "' must be a number or a non-empty array");
  for (const auto& v : j[key]) {
    if (!v.is_number()) usage_fail("field '" + key + "' must contain numbers only");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<std::string> get_str_list(const json& j, const std::string& key) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  if (j[key].is_string()) {
    out.push_back(j[key].get<std::string>());
    return out;
  }
  if (!j[key].is_array() || j[key].empty()) usage_fail("field '" + key + "' must be a string or a non-empty array");
  for (const auto& v : j[key]) {
    if (!v.is_string()) usage_fail("field '" + key + "' must contain strings only");
    out.push_back(v.get<std::string>());
  }
  return out;
}

int as_exact_int(double v, const std::string& what) {
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-9) usage_fail(what + " must be an integer");
  return static_cast<int>(r);
}

// ---- shared option block ----

struct CommonOpts {
  std::string spec_path;
  std::string out_path;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  int workers = 1;
};

// flag > PERCOLAB_SEED > spec field > fallback
std::uint64_t resolve_seed(const CommonOpts& opts, const json& spec, std::uint64_t fallback) {
  if (opts.seed_given) return opts.seed_flag;
  if (const char* env = std::getenv("PERCOLAB_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') usage_fail("PERCOLAB_SEED must be a decimal u64");
    return static_cast<std::uint64_t>(v);
  }
  return get_u64(spec, "seed", fallback);
}

std::string provenance_line(std::uint64_t seed, const std::string& spec_hash) {
  return "# seed=" + std::to_string(seed) + " spec_hash=" + spec_hash + "\n";
}

void stamp(json& report, std::uint64_t seed, const std::string& spec_hash) {
  report["seed"] = seed;
  report["spec_hash"] = spec_hash;
}

// ---- model parsing ----

BernoulliEvent parse_bernoulli_event(const std::string& name) {
  for (BernoulliEvent e : {BernoulliEvent::one_arm, BernoulliEvent::box_arm,
                           BernoulliEvent::crossing, BernoulliEvent::two_arm,
                           BernoulliEvent::dual_arm}) {
    if (name == event_name(e)) return e;
  }
  usage_fail("unknown bernoulli event '" + name + "'");
}

BernoulliAlgo parse_bernoulli_algo(const std::string& name) {
  for (BernoulliAlgo a : {BernoulliAlgo::origin_cluster, BernoulliAlgo::hyperplane_sweep,
                          BernoulliAlgo::interface_growth}) {
    if (name == algo_name(a)) return a;
  }
  usage_fail("unknown bernoulli algorithm '" + name + "'");
}

FieldAlgo parse_field_algo(const std::string& name) {
  for (FieldAlgo a : {FieldAlgo::one_arm_growth, FieldAlgo::random_line, FieldAlgo::left_line,
                      FieldAlgo::level_line, FieldAlgo::annulus_seed}) {
    if (name == field_algo_name(a)) return a;
  }
  usage_fail("unknown field algorithm '" + name + "'");
}

struct KernelDefaults {
  double mesh = 0.5;
  double support = 4.0;
  double truncation = 2.0;  // 0 = no truncation
};

const std::set<std::string> kKernelKeys = {"kernel", "d", "mesh", "support", "truncation"};

Kernel kernel_from(const json& j, const KernelDefaults& dflt) {
  const std::string name = get_str(j, "kernel", "bargmann-fock");
  if (name != "bargmann-fock") usage_fail("unknown kernel '" + name + "'");
  const int d = get_int(j, "d", 2);
  const double mesh = get_num(j, "mesh", dflt.mesh);
  const double support = get_num(j, "support", dflt.support);
  const double trunc = get_num(j, "truncation", dflt.truncation);
  Kernel q = make_bargmann_fock_kernel(d, mesh, support);
  if (trunc > 0.0) q = truncate_kernel(q, trunc);
  return q;
}

// ---- exact enumeration rigs (oracle + enumeration checks) ----

// A small Bernoulli instance the exact-enumeration layer can afford, with
// the matching exploration algorithm and target event.
struct EnumRig {
  Lattice box = make_cube(2, 1);
  int m = 0;
  int R = 1;
  bool crossing = false;
  BernoulliAlgo algo = BernoulliAlgo::origin_cluster;
  ExploreScratch ews;
  Scratch ws, bfs_ws;

  oracle::RunnerFn runner() {
    switch (algo) {
      case BernoulliAlgo::origin_cluster:
        return [this](const std::vector<std::uint8_t>& cfg, std::vector<std::uint8_t>& rev) {
          ConfigEdgeSource src{cfg.data()};
          MarkSink sink{&rev};
          return run_origin_cluster(box, R, src, sink, ews);
        };
      case BernoulliAlgo::hyperplane_sweep:
        return [this](const std::vector<std::uint8_t>& cfg, std::vector<std::uint8_t>& rev) {
          ConfigEdgeSource src{cfg.data()};
          MarkSink sink{&rev};
          return run_hyperplane_sweep(box, src, sink, ews);
        };
      case BernoulliAlgo::interface_growth:
        return [this](const std::vector<std::uint8_t>& cfg, std::vector<std::uint8_t>& rev) {
          ConfigEdgeSource src{cfg.data()};
          MarkSink sink{&rev};
          return run_interface(box, src, sink, ews, bfs_ws);
        };
    }
    usage_fail("unreachable algorithm");
  }

  oracle::EventFn event() {
    if (crossing)
      return [this](const std::vector<std::uint8_t>& open) {
        return crossing_event(box, open.data(), ws);
      };
    return [this](const std::vector<std::uint8_t>& open) {
      return one_arm_event(box, open.data(), R, ws);
    };
  }

 private:
  struct MarkSink {
    std::vector<std::uint8_t>* rev;
    void on_reveal(std::int64_t unit, std::int8_t) { (*rev)[static_cast<std::size_t>(unit)] = 1; }
    void on_aux(std::int64_t) {}
  };
};

// instance: {"type":"cube","R":n} (one-arm) or {"type":"rect","cols":c,"rows":r} (crossing)
void build_instance(const json& spec, EnumRig& rig) {
  rig.algo = parse_bernoulli_algo(get_str(spec, "algorithm", "origin_cluster"));
  json inst = spec.contains("instance") ? spec["instance"] : json::object();
  check_keys(inst, "instance", {"type", "R", "cols", "rows"});
  const bool cube_default = rig.algo == BernoulliAlgo::origin_cluster;
  const std::string type = get_str(inst, "type", cube_default ? "cube" : "rect");
  if (type == "cube") {
    rig.R = get_int(inst, "R", 1);
    if (rig.R < 1) usage_fail("cube instance needs R >= 1");
    rig.box = make_cube(2, rig.R);
    rig.crossing = false;
    if (rig.algo != BernoulliAlgo::origin_cluster)
      usage_fail("cube one-arm instances pair with the origin_cluster algorithm");
  } else if (type == "rect") {
    const int cols = get_int(inst, "cols", 3);
    const int rows = get_int(inst, "rows", 2);
    if (cols < 2 || rows < 1) usage_fail("rect instance needs cols >= 2, rows >= 1");
    rig.box = make_rect(cols - 1, rows);
    rig.crossing = true;
    if (rig.algo == BernoulliAlgo::origin_cluster)
      usage_fail("rect crossing instances pair with hyperplane_sweep or interface_growth");
  } else {
    usage_fail("instance type must be 'cube' or 'rect'");
  }
  rig.m = static_cast<int>(rig.box.edge_count());
}

std::vector<int> parse_subset(const json& spec, int m) {
  std::vector<int> subset;
  if (!spec.contains("subset")) return subset;
  if (!spec["subset"].is_array()) usage_fail("field 'subset' must be an array of edge indices");
  for (const auto& v : spec["subset"]) {
    if (!v.is_number_integer()) usage_fail("field 'subset' must contain integers");
    const int e = v.get<int>();
    if (e < 0 || e >= m) usage_fail("subset edge index out of range");
    subset.push_back(e);
  }
  return subset;
}

// ---- simulate ----

int cmd_simulate(const CommonOpts& opts) {
  const std::string text = read_file(opts.spec_path);
  const std::string spec_hash = hex64(fnv1a64(text));
  json spec = parse_json(text, "spec file");

  if (!spec.is_object() || !spec.contains("model")) usage_fail("spec needs a 'model' field");
  const std::string model = get_str(spec, "model", "");
  const std::uint64_t seed = resolve_seed(opts, spec, 1);

  std::vector<std::string> events = get_str_list(spec, "event");
  if (events.empty()) usage_fail("spec needs an 'event' field");
  std::vector<double> R_list = get_num_list(spec, "R", {});
  if (R_list.empty()) usage_fail("spec needs an 'R' field");
  const std::uint64_t n = get_u64(spec, "n", 1000);
  if (n == 0) usage_fail("replica count n must be positive");
  const double k = get_num(spec, "k", 1.0);

  std::ostringstream csv;
  csv << provenance_line(seed, spec_hash) << kCsvHeader << "\n";
  std::uint64_t row = 0;

  if (model == "bernoulli") {
    check_keys(spec, "spec file", {"model", "event", "R", "k", "n", "seed", "out", "d", "p"});
    const int d = get_int(spec, "d", 2);
    const double p = get_num(spec, "p", 0.5);
    for (const std::string& ev_name : events) {
      BernoulliSpec bs;
      bs.d = d;
      bs.p = p;
      bs.event = parse_bernoulli_event(ev_name);
      bs.k = k;
      for (double Rv : R_list) {
        bs.R = as_exact_int(Rv, "bernoulli R");
        const std::uint64_t row_seed = mix64(seed, row++);
        const Estimate est = mc_estimate(bs, n, row_seed, opts.workers);
        csv << "bernoulli," << ev_name << "," << fmt_num(p) << "," << bs.R << "," << fmt_num(k)
            << "," << n << "," << fmt_num(est.mean) << "," << fmt_num(est.se) << "," << row_seed
            << "\n";
      }
    }
  } else if (model == "gaussian") {
    check_keys(spec, "spec file",
               {"model", "event", "R", "k", "n", "seed", "out", "ell", "kernel", "d", "mesh",
                "support", "truncation", "r_in"});
    const Kernel q = kernel_from(spec, KernelDefaults{});
    const double ell = get_num(spec, "ell", 0.0);
    const double r_in = get_num(spec, "r_in", 1.0);
    for (const std::string& ev_name : events) {
      for (double Rv : R_list) {
        const std::uint64_t row_seed = mix64(seed, row++);
        Estimate est;
        if (ev_name == "crossing") {
          est = gaussian_crossing_estimate(q, ell, k, Rv, n, row_seed, opts.workers);
        } else if (ev_name == "one_arm") {
          est = gaussian_one_arm_estimate(q, ell, r_in, Rv, n, row_seed, opts.workers);
        } else if (ev_name == "two_arm") {
          est = gaussian_two_arm_estimate(q, ell, r_in, Rv, n, row_seed, opts.workers);
        } else {
          usage_fail("unknown gaussian event '" + ev_name + "'");
        }
        csv << "gaussian," << ev_name << "," << fmt_num(ell) << "," << fmt_num(Rv) << ","
            << fmt_num(k) << "," << n << "," << fmt_num(est.mean) << "," << fmt_num(est.se) << ","
            << row_seed << "\n";
      }
    }
  } else {
    usage_fail("model must be 'bernoulli' or 'gaussian'");
  }

  const std::string out = !opts.out_path.empty() ? opts.out_path : get_str(spec, "out", "");
  write_output(out, csv.str());
  return 0;
}

// ---- verify ----

json terms_to_json(const oracle::CheckResult& r, const std::string& prefix) {
  json t = json::object();
  for (const auto& term : r.terms) {
    t[prefix + term.name] = {{"value", term.value}, {"stderr", term.se}};
  }
  return t;
}

const std::set<std::string> kChecks = {
    "osss",        "genub",      "genlb",          "genrevbound",
    "kl-stopped",  "pinsker",    "isoperimetry",   "ubb1",
    "ubb2",        "lbb",        "two-arm-square", "truncation",
    "gaussian-russo", "lbderiv", "ubgf",           "lbgf"};

std::vector<oracle::CheckResult> dispatch_check(const std::string& name, const json& spec,
                                                std::uint64_t seed, int workers) {
  std::vector<oracle::CheckResult> out;

  if (name == "osss" || name == "genlb" || name == "genrevbound" || name == "genub") {
    std::set<std::string> keys = {"algorithm", "instance", "p", "subset", "seed"};
    if (name == "genub") keys.insert("q");
    check_keys(spec, "spec file", keys);
    EnumRig rig;
    build_instance(spec, rig);
    const double p = get_num(spec, "p", 0.5);
    const std::vector<int> subset = parse_subset(spec, rig.m);
    auto run = rig.runner();
    auto ev = rig.event();
    if (name == "osss") out.push_back(oracle::check_osss(rig.m, p, run, ev, subset));
    if (name == "genlb") out.push_back(oracle::check_genlb(rig.m, p, run, ev, subset));
    if (name == "genrevbound") out.push_back(oracle::check_genrevbound(rig.m, p, run, ev, subset));
    if (name == "genub") {
      const double q = get_num(spec, "q", 0.55);
      out.push_back(oracle::check_genub(rig.m, p, q, run, ev, subset));
    }
    return out;
  }
  if (name == "kl-stopped") {
    check_keys(spec, "spec file", {"n", "p", "q", "seed"});
    out.push_back(oracle::check_kl_stopped(get_int(spec, "n", 6), get_num(spec, "p", 0.3),
                                           get_num(spec, "q", 0.6)));
    return out;
  }
  if (name == "pinsker") {
    check_keys(spec, "spec file", {"step", "seed"});
    out.push_back(oracle::check_pinsker(get_num(spec, "step", 0.01)));
    return out;
  }
  if (name == "isoperimetry") {
    check_keys(spec, "spec file", {"a_step", "eps_step", "eps_max", "seed"});
    out.push_back(oracle::check_isoperimetry(get_num(spec, "a_step", 0.02),
                                             get_num(spec, "eps_step", 0.02),
                                             get_num(spec, "eps_max", 2.0)));
    return out;
  }
  if (name == "ubb1") {
    check_keys(spec, "spec file", {"d", "p", "q", "R", "n", "seed"});
    out.push_back(check_ubb1(get_int(spec, "d", 2), get_num(spec, "p", 0.5),
                             get_num(spec, "q", 0.55), get_int(spec, "R", 16),
                             get_u64(spec, "n", 20000), seed, workers));
    return out;
  }
  if (name == "ubb2" || name == "lbb") {
    check_keys(spec, "spec file", {"p", "k", "R", "n", "seed"});
    const std::vector<double> R_raw = get_num_list(spec, "R", {8.0, 16.0});
    std::vector<int> R_list;
    for (double r : R_raw) R_list.push_back(as_exact_int(r, "R"));
    const double p = get_num(spec, "p", 0.5);
    const double k = get_num(spec, "k", 1.0);
    const std::uint64_t n = get_u64(spec, "n", 20000);
    if (name == "ubb2") out.push_back(check_ubb2(p, k, R_list, n, seed, workers));
    if (name == "lbb") out.push_back(check_lbb(p, k, R_list, n, seed, workers));
    return out;
  }
  if (name == "two-arm-square") {
    const std::string model = get_str(spec, "model", "bernoulli");
    if (model == "bernoulli") {
      check_keys(spec, "spec file", {"model", "R", "n", "seed"});
      out.push_back(check_two_arm_square(get_int(spec, "R", 8), get_u64(spec, "n", 50000), seed,
                                         workers));
    } else if (model == "gaussian") {
      std::set<std::string> keys = kKernelKeys;
      keys.insert({"model", "ell", "r_in", "R", "n", "seed"});
      check_keys(spec, "spec file", keys);
      const Kernel q = kernel_from(spec, KernelDefaults{});
      out.push_back(check_field_two_arm(q, get_num(spec, "r_in", 1.0), get_num(spec, "R", 8.0),
                                        get_num(spec, "ell", 0.0), get_u64(spec, "n", 4000), seed,
                                        workers));
    } else {
      usage_fail("model must be 'bernoulli' or 'gaussian'");
    }
    return out;
  }
  if (name == "truncation") {
    std::set<std::string> keys = kKernelKeys;
    keys.erase("truncation");  // the r_list plays that role here
    keys.insert({"r_list", "k", "R", "ell", "n", "seed"});
    check_keys(spec, "spec file", keys);
    KernelDefaults kd;
    kd.truncation = 0.0;
    const Kernel q = kernel_from(spec, kd);
    out.push_back(check_truncation(q, get_num_list(spec, "r_list", {1.0, 2.0, 3.0}),
                                   get_num(spec, "k", 1.0), get_num(spec, "R", 6.0),
                                   get_num(spec, "ell", 0.0), get_u64(spec, "n", 1500), seed,
                                   workers));
    return out;
  }
  if (name == "gaussian-russo") {
    std::set<std::string> keys = kKernelKeys;
    keys.insert({"s", "R", "ell", "n", "seed"});
    check_keys(spec, "spec file", keys);
    KernelDefaults kd{1.0, 4.0, 3.0};
    const Kernel q = kernel_from(spec, kd);
    out.push_back(check_gaussian_russo(q, get_num(spec, "s", 3.0), get_num(spec, "R", 12.0),
                                       get_num(spec, "ell", 0.0), get_u64(spec, "n", 900), seed,
                                       workers));
    return out;
  }
  if (name == "lbderiv") {
    std::set<std::string> keys = kKernelKeys;
    keys.insert({"s", "k", "R", "ell", "subset", "n", "seed"});
    check_keys(spec, "spec file", keys);
    KernelDefaults kd{1.0, 4.0, 3.0};
    const Kernel q = kernel_from(spec, kd);
    const std::string sub = get_str(spec, "subset", "right_half");
    BoxSubset subset;
    if (sub == subset_name(BoxSubset::all)) subset = BoxSubset::all;
    else if (sub == subset_name(BoxSubset::right_half)) subset = BoxSubset::right_half;
    else if (sub == subset_name(BoxSubset::quarter)) subset = BoxSubset::quarter;
    else usage_fail("subset must be 'all', 'right_half', or 'quarter'");
    out.push_back(check_lbderiv(q, get_num(spec, "s", 3.0), get_num(spec, "k", 1.0),
                                get_num(spec, "R", 12.0), get_num(spec, "ell", 0.0),
                                get_u64(spec, "n", 1200), seed, workers, subset));
    return out;
  }
  if (name == "ubgf" || name == "lbgf") {
    std::set<std::string> keys = kKernelKeys;
    keys.insert({"ell", "ell_prime", "k", "R", "h", "n", "seed"});
    check_keys(spec, "spec file", keys);
    const Kernel q = kernel_from(spec, KernelDefaults{});
    GaussianBoundParams gp;
    gp.ell = get_num(spec, "ell", 0.0);
    gp.ell_prime = get_num(spec, "ell_prime", 0.1);
    gp.k = get_num(spec, "k", 1.0);
    gp.h = get_num(spec, "h", 0.05);
    gp.seed = seed;
    gp.workers = workers;
    const std::vector<double> R_user = get_num_list(spec, "R", {});
    const bool has_R = !R_user.empty();
    const bool has_n = spec.contains("n");
    if (name == "ubgf") {
      gp.R_list = has_R ? R_user : std::vector<double>{6.0, 9.0};
      gp.n = has_n ? get_u64(spec, "n", 600) : 600;
      out.push_back(check_ubgf(q, GaussianBound::ubgf1, gp));
      gp.R_list = has_R ? R_user : std::vector<double>{8.0, 12.0};
      gp.n = has_n ? get_u64(spec, "n", 800) : 800;
      out.push_back(check_ubgf(q, GaussianBound::ubgf2, gp));
    } else {
      gp.R_list = has_R ? R_user : std::vector<double>{16.0, 24.0};
      gp.n = has_n ? get_u64(spec, "n", 500) : 500;
      out.push_back(check_ubgf(q, GaussianBound::lbgf1, gp));
      gp.n = has_n ? get_u64(spec, "n", 3000) : 3000;
      out.push_back(check_ubgf(q, GaussianBound::lbgf2, gp));
    }
    return out;
  }
  usage_fail("unreachable check dispatch");
}

int cmd_verify(const std::string& check_name, const CommonOpts& opts) {
  if (!kChecks.count(check_name)) usage_fail("unknown check '" + check_name + "'");

  std::string text = "{}";
  if (!opts.spec_path.empty()) text = read_file(opts.spec_path);
  const std::string spec_hash = hex64(fnv1a64(text));
  json spec = parse_json(text, "spec file");
  if (!spec.is_object()) usage_fail("spec file must be a JSON object");

  const std::uint64_t seed = resolve_seed(opts, spec, 1);
  const std::vector<oracle::CheckResult> results =
      dispatch_check(check_name, spec, seed, opts.workers);

  json report;
  report["check"] = check_name;
  stamp(report, seed, spec_hash);
  json detail = json::array();
  bool holds = true;
  double margin = 1e18;
  json terms = json::object();
  const bool merged = results.size() > 1;
  for (const auto& r : results) {
    detail.push_back(r.check);
    holds = holds && r.holds;
    margin = std::min(margin, r.margin_sigma);
    json t = terms_to_json(r, merged ? r.check + "." : "");
    terms.update(t);
  }
  report["detail"] = detail;
  report["terms"] = terms;
  report["verdict"] = holds;
  report["margin_sigma"] = margin;

  write_output(opts.out_path, report.dump(2) + "\n");
  return holds ? 0 : 4;
}

// ---- fit ----

struct CsvRow {
  std::string model, event;
  double param = 0.0, R = 0.0, k = 0.0, estimate = 0.0, se = 0.0;
};

std::vector<CsvRow> read_estimate_csv(const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  bool saw_header = false;
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!saw_header) {
      if (line != kCsvHeader) usage_fail("CSV is not in the estimator schema (header mismatch)");
      saw_header = true;
      continue;
    }
    if (f.size() != 9) usage_fail("CSV row has the wrong number of fields");
    CsvRow r;
    r.model = f[0];
    r.event = f[1];
    try {
      r.param = std::stod(f[2]);
      r.R = std::stod(f[3]);
      r.k = std::stod(f[4]);
      r.estimate = std::stod(f[6]);
      r.se = std::stod(f[7]);
    } catch (const std::exception&) {
      usage_fail("CSV row has a non-numeric field");
    }
    rows.push_back(r);
  }
  if (!saw_header) usage_fail("CSV has no header row");
  if (rows.empty()) usage_fail("CSV has no data rows");
  return rows;
}

int cmd_fit(const std::string& csv_path, const std::string& kind, const CommonOpts& opts) {
  if (kind != "power" && kind != "exp") usage_fail("fit kind must be 'power' or 'exp'");
  const std::string text = read_file(csv_path);
  const std::string spec_hash = hex64(fnv1a64(text));
  const std::vector<CsvRow> rows = read_estimate_csv(csv_path);

  std::vector<FitPoint> pts;
  for (const CsvRow& r : rows) {
    FitPoint p;
    p.x = r.R;
    p.value = r.estimate;
    p.sigma = r.se;
    pts.push_back(p);
  }
  const FitResult fit = kind == "power" ? fit_power_law(pts) : fit_exponential_decay(pts);

  const std::uint64_t seed = resolve_seed(opts, json::object(), 0);
  json report;
  report["kind"] = kind;
  stamp(report, seed, spec_hash);
  report["slope"] = fit.slope;
  report["intercept"] = fit.intercept;
  report["slope_se"] = fit.slope_se;
  report["r_squared"] = fit.r_squared;
  report["n_points"] = fit.n_points;
  report["decay_rate"] = -fit.slope;

  // plot data: log estimate against log R (power) or R (exp)
  std::ostringstream plot;
  plot << provenance_line(seed, spec_hash);
  plot << (kind == "power" ? "log_R,log_estimate\n" : "R,log_estimate\n");
  for (const CsvRow& r : rows) {
    if (!(r.estimate > 0.0)) continue;  // the fit itself rejects these when they matter
    const double x = kind == "power" ? std::log(r.R) : r.R;
    plot << fmt_num(x) << "," << fmt_num(std::log(r.estimate)) << "\n";
  }
  const std::string base = !opts.out_path.empty() ? opts.out_path : csv_path;
  write_output(base + ".points.csv", plot.str());
  write_output(opts.out_path, report.dump(2) + "\n");
  return 0;
}

// ---- oracle ----

int cmd_oracle(const CommonOpts& opts) {
  const std::string text = read_file(opts.spec_path);
  const std::string spec_hash = hex64(fnv1a64(text));
  json spec = parse_json(text, "instance file");
  if (!spec.is_object()) usage_fail("instance file must be a JSON object");

  const std::uint64_t seed = resolve_seed(opts, spec, 0);
  const std::string kind = get_str(spec, "kind", "probability");
  json report;
  report["kind"] = kind;
  stamp(report, seed, spec_hash);

  if (kind == "kl-stopped") {
    check_keys(spec, "instance file", {"kind", "n", "p", "q", "seed"});
    const oracle::StoppedKl kl = oracle::kl_stopped_first_success(
        get_int(spec, "n", 6), get_num(spec, "p", 0.3), get_num(spec, "q", 0.6));
    report["lhs"] = kl.lhs;
    report["rhs"] = kl.rhs;
    report["expected_tau"] = kl.expected_tau;
    write_output(opts.out_path, report.dump(2) + "\n");
    return 0;
  }

  std::set<std::string> keys = {"kind", "algorithm", "instance", "p", "seed"};
  check_keys(spec, "instance file", keys);
  EnumRig rig;
  build_instance(spec, rig);
  const double p = get_num(spec, "p", 0.5);
  report["event"] = rig.crossing ? "crossing" : "one_arm";
  report["units"] = rig.m;
  report["p"] = p;

  auto ev = rig.event();
  if (kind == "probability") {
    report["value"] = oracle::enumerate_probability(rig.m, p, ev);
  } else if (kind == "derivative") {
    report["value"] = oracle::enumerate_derivative(rig.m, p, ev);
  } else if (kind == "influence") {
    json infl = json::array();
    double sum = 0.0;
    for (int e = 0; e < rig.m; ++e) {
      const double v = oracle::enumerate_influence(rig.m, p, ev, e);
      infl.push_back(v);
      sum += v;
    }
    report["influences"] = infl;
    report["sum"] = sum;
  } else if (kind == "revealment") {
    auto run = rig.runner();
    const oracle::RevealmentReport rep = oracle::enumerate_revealment(rig.m, p, run, ev);
    report["algorithm"] = algo_name(rig.algo);
    report["output_prob"] = rep.output_prob;
    report["sum_rev"] = rep.sum_rev;
    report["max_rev"] = rep.max_rev;
    report["determines"] = rep.determines;
    report["rev"] = rep.rev;
  } else {
    usage_fail("unknown oracle kind '" + kind + "'");
  }
  write_output(opts.out_path, report.dump(2) + "\n");
  return 0;
}

// ---- revealments ----

int cmd_revealments(const CommonOpts& opts) {
  const std::string text = read_file(opts.spec_path);
  const std::string spec_hash = hex64(fnv1a64(text));
  json spec = parse_json(text, "spec file");
  if (!spec.is_object() || !spec.contains("model")) usage_fail("spec needs a 'model' field");
  const std::string model = get_str(spec, "model", "");
  const std::uint64_t seed = resolve_seed(opts, spec, 1);
  const std::uint64_t n = get_u64(spec, "n", 1000);
  if (n == 0) usage_fail("replica count n must be positive");
  const double k = get_num(spec, "k", 1.0);

  std::ostringstream csv;
  if (model == "bernoulli") {
    check_keys(spec, "spec file",
               {"model", "algorithm", "d", "p", "R", "k", "n", "seed", "out"});
    const BernoulliAlgo algo = parse_bernoulli_algo(get_str(spec, "algorithm", "origin_cluster"));
    const int d = get_int(spec, "d", 2);
    const double p = get_num(spec, "p", 0.5);
    const int R = get_int(spec, "R", 8);
    const Lattice box =
        algo == BernoulliAlgo::origin_cluster ? make_cube(d, R) : make_box_k(d, R, k);
    const AlgoRevealment rev = measure_revealment(box, algo, R, p, n, seed, opts.workers);
    csv << provenance_line(seed, spec_hash);
    csv << "# output_rate=" << fmt_num(rev.output_rate())
        << " revealed_mean=" << fmt_num(rev.revealed_size.mean) << "\n";
    csv << kRevHeader << "\n";
    for (std::size_t e = 0; e < rev.counts.size(); ++e) {
      csv << "bernoulli," << algo_name(algo) << "," << e << "," << fmt_num(p) << "," << R << ","
          << fmt_num(k) << "," << n << "," << fmt_num(rev.rev(static_cast<std::int64_t>(e)))
          << "," << fmt_num(rev.rev_se(static_cast<std::int64_t>(e))) << "," << seed << "\n";
    }
  } else if (model == "gaussian") {
    std::set<std::string> keys = kKernelKeys;
    keys.insert({"model", "algorithm", "ell", "k", "R", "r_in", "box_scale", "n", "seed", "out"});
    check_keys(spec, "spec file", keys);
    const Kernel q = kernel_from(spec, KernelDefaults{});
    FieldAlgoSpec fs;
    fs.algo = parse_field_algo(get_str(spec, "algorithm", "left_line"));
    fs.k = k;
    fs.R = get_num(spec, "R", 8.0);
    fs.r_in = get_num(spec, "r_in", fs.algo == FieldAlgo::annulus_seed ? 2.0 : 1.0);
    fs.box_scale = get_num(spec, "box_scale", 0.0);
    const double ell = get_num(spec, "ell", 0.0);
    const FieldProblem prob = make_field_problem(q, ell, fs);
    const FieldRevealment rev = measure_field_revealment(prob, n, seed, opts.workers);
    csv << provenance_line(seed, spec_hash);
    csv << "# output_rate=" << fmt_num(rev.output_rate())
        << " revealed_mean=" << fmt_num(rev.revealed_mean()) << "\n";
    csv << kRevHeader << "\n";
    for (std::size_t b = 0; b < rev.counts.size(); ++b) {
      csv << "gaussian," << field_algo_name(fs.algo) << "," << b << "," << fmt_num(ell) << ","
          << fmt_num(fs.R) << "," << fmt_num(k) << "," << n << "," << fmt_num(rev.rev(b)) << ","
          << fmt_num(rev.rev_se(b)) << "," << seed << "\n";
    }
  } else {
    usage_fail("model must be 'bernoulli' or 'gaussian'");
  }

  const std::string out = !opts.out_path.empty() ? opts.out_path : get_str(spec, "out", "");
  write_output(out, csv.str());
  return 0;
}

void add_common(CLI::App* sub, CommonOpts& opts, bool spec_required) {
  auto* spec = sub->add_option("--spec", opts.spec_path, "JSON spec file");
  if (spec_required) spec->required();
  sub->add_option("--seed", opts.seed_flag, "master seed override (u64)");
  sub->add_option("--workers", opts.workers, "worker pool size; never changes numeric output")
      ->check(CLI::PositiveNumber);
  sub->add_option("--out", opts.out_path, "output path (default stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"critical percolation laboratory"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string check_name, csv_path, fit_kind = "power";

  CLI::App* sim = app.add_subcommand("simulate", "estimate event probabilities from a spec");
  add_common(sim, opts, true);

  CLI::App* ver = app.add_subcommand("verify", "run a registered inequality check");
  ver->add_option("check", check_name, "check name")->required();
  add_common(ver, opts, false);

  CLI::App* fit = app.add_subcommand("fit", "fit a power/exponential law to an estimate CSV");
  fit->add_option("csv", csv_path, "CSV in the estimator schema")->required();
  fit->add_option("kind", fit_kind, "power | exp");
  add_common(fit, opts, false);

  CLI::App* orc = app.add_subcommand("oracle", "exact enumeration fixtures for small instances");
  add_common(orc, opts, true);

  CLI::App* rev = app.add_subcommand("revealments", "per-unit revealment frequencies");
  add_common(rev, opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (CLI::App* sub : {sim, ver, fit, orc, rev}) {
    if (sub->parsed() && sub->count("--seed") > 0) opts.seed_given = true;
  }

  try {
    if (sim->parsed()) return cmd_simulate(opts);
    if (ver->parsed()) return cmd_verify(check_name, opts);
    if (fit->parsed()) return cmd_fit(csv_path, fit_kind, opts);
    if (orc->parsed()) return cmd_oracle(opts);
    if (rev->parsed()) return cmd_revealments(opts);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.msg << "\n";
    return e.code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
