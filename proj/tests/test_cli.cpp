// End-to-end tests against the percolab binary. CTest passes its location in
// PERCOLAB_CLI; the suite shells out and inspects exit codes and output bytes.
#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* p = std::getenv("PERCOLAB_CLI");
  REQUIRE_MESSAGE(p != nullptr, "PERCOLAB_CLI must point at the percolab binary (set by CTest)");
  return p;
}

fs::path work_dir() {
  fs::path dir = fs::temp_directory_path() / "percolab_cli_tests";
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file " << p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// returns the exit code; stdout lands in `out_file`
int run_cli(const std::string& args, const fs::path& out_file) {
  const std::string cmd =
      cli_path() + " " + args + " > " + out_file.string() + " 2> " + out_file.string() + ".err";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

int run_cli(const std::string& args) { return run_cli(args, work_dir() / "scratch.out"); }

json run_json(const std::string& args, int expect_code = 0) {
  const fs::path out = work_dir() / "report.json";
  const int code = run_cli(args, out);
  CHECK(code == expect_code);
  return json::parse(read_file(out));
}

}  // namespace

TEST_CASE("oracle: exact fixtures and the resource cap") {
  const fs::path dir = work_dir();

  write_file(dir / "a1.json",
             R"({"kind":"probability","instance":{"type":"cube","R":1},"p":0.5})");
  json a1 = run_json("oracle --spec " + (dir / "a1.json").string());
  CHECK(a1["value"].get<double>() == 0.9375);
  CHECK(a1["units"].get<int>() == 12);
  CHECK(a1.contains("seed"));
  CHECK(a1.contains("spec_hash"));

  // self-dual rectangles: exactly 1/2 at p = 1/2
  for (int n : {1, 2}) {
    const fs::path spec = dir / ("rect" + std::to_string(n) + ".json");
    write_file(spec, R"({"kind":"probability","algorithm":"hyperplane_sweep","instance":)"
                         R"({"type":"rect","cols":)" +
                         std::to_string(n + 1) + R"(,"rows":)" + std::to_string(n) + "}}");
    json r = run_json("oracle --spec " + spec.string());
    CHECK(r["value"].get<double>() == 0.5);
  }

  // 25 edges exceeds the exact-enumeration cap
  write_file(dir / "big.json",
             R"({"kind":"probability","algorithm":"hyperplane_sweep","instance":{"type":"rect","cols":26,"rows":1}})");
  CHECK(run_cli("oracle --spec " + (dir / "big.json").string()) == 3);

  // revealment replay: determining run, mass between bounds
  write_file(dir / "rev.json",
             R"({"kind":"revealment","instance":{"type":"cube","R":1},"p":0.5})");
  json rev = run_json("oracle --spec " + (dir / "rev.json").string());
  CHECK(rev["determines"].get<bool>());
  CHECK(rev["output_prob"].get<double>() == 0.9375);
  CHECK(rev["rev"].size() == 12);
  CHECK(rev["max_rev"].get<double>() <= 1.0);
  CHECK(rev["sum_rev"].get<double>() >= rev["max_rev"].get<double>());

  // stopped-KL fixture is exact
  write_file(dir / "kl.json", R"({"kind":"kl-stopped","n":6,"p":0.3,"q":0.6})");
  json kl = run_json("oracle --spec " + (dir / "kl.json").string());
  CHECK(kl["lhs"].get<double>() ==
        doctest::Approx(kl["rhs"].get<double>()).epsilon(1e-12));
}

TEST_CASE("simulate: deterministic bytes, worker invariance, trivial endpoint") {
  const fs::path dir = work_dir();
  write_file(dir / "p1.json",
             R"({"model":"bernoulli","d":2,"p":1.0,"event":"crossing","R":4,"n":100,"seed":7})");
  const fs::path csv1 = dir / "p1.csv";
  CHECK(run_cli("simulate --spec " + (dir / "p1.json").string() + " --out " + csv1.string()) == 0);
  const std::string body = read_file(csv1);
  CHECK(body.find("model,event,param,R,k,n,estimate,stderr,seed") != std::string::npos);
  CHECK(body.find("bernoulli,crossing,1,4,1,100,1,0,") != std::string::npos);
  CHECK(body.find("# seed=7 spec_hash=") != std::string::npos);

  write_file(dir / "sweep.json",
             R"({"model":"bernoulli","p":0.5,"event":"one_arm","R":[4,8,16],"n":1500,"seed":3})");
  const fs::path a = dir / "sweep_a.csv", b = dir / "sweep_b.csv", c = dir / "sweep_c.csv";
  CHECK(run_cli("simulate --spec " + (dir / "sweep.json").string() + " --out " + a.string()) == 0);
  CHECK(run_cli("simulate --spec " + (dir / "sweep.json").string() + " --out " + b.string()) == 0);
  CHECK(run_cli("simulate --spec " + (dir / "sweep.json").string() + " --workers 4 --out " +
                c.string()) == 0);
  CHECK(read_file(a) == read_file(b));
  CHECK(read_file(a) == read_file(c));

  // the seed flag and the environment override agree, and both change the bytes
  const fs::path s9 = dir / "sweep_s9.csv", env9 = dir / "sweep_env9.csv";
  CHECK(run_cli("simulate --spec " + (dir / "sweep.json").string() + " --seed 9 --out " +
                s9.string()) == 0);
  const std::string env_cmd = "PERCOLAB_SEED=9 " + cli_path() + " simulate --spec " +
                              (dir / "sweep.json").string() + " --out " + env9.string() +
                              " 2> /dev/null";
  REQUIRE(std::system(env_cmd.c_str()) != -1);
  CHECK(read_file(s9) == read_file(env9));
  CHECK(read_file(s9) != read_file(a));
}

TEST_CASE("simulate: gaussian events produce sane rows") {
  const fs::path dir = work_dir();
  write_file(dir / "g.json",
             R"({"model":"gaussian","ell":0.0,"mesh":0.5,"support":4.0,"truncation":2.0,)"
                 R"("event":["crossing","one_arm"],"R":6.0,"n":400,"seed":11})");
  const fs::path csv = dir / "g.csv";
  CHECK(run_cli("simulate --spec " + (dir / "g.json").string() + " --out " + csv.string()) == 0);
  std::istringstream in(read_file(csv));
  std::string line;
  int rows = 0;
  double crossing = -1.0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("model,", 0) == 0) continue;
    ++rows;
    if (line.rfind("gaussian,crossing,", 0) == 0) {
      std::istringstream ls(line);
      std::string cell;
      for (int i = 0; i < 7 && std::getline(ls, cell, ','); ++i) {}
      crossing = std::stod(cell);
    }
  }
  CHECK(rows == 2);
  CHECK(crossing > 0.2);
  CHECK(crossing < 0.8);
}

TEST_CASE("schema violations and usage errors exit 2") {
  const fs::path dir = work_dir();
  write_file(dir / "unknown_key.json",
             R"({"model":"bernoulli","p":0.5,"event":"one_arm","R":4,"bogus":1})");
  CHECK(run_cli("simulate --spec " + (dir / "unknown_key.json").string()) == 2);

  write_file(dir / "bad.json", "{nope");
  CHECK(run_cli("simulate --spec " + (dir / "bad.json").string()) == 2);

  write_file(dir / "nomodel.json", R"({"event":"one_arm","R":4})");
  CHECK(run_cli("simulate --spec " + (dir / "nomodel.json").string()) == 2);

  write_file(dir / "badevent.json", R"({"model":"bernoulli","event":"sideways","R":4})");
  CHECK(run_cli("simulate --spec " + (dir / "badevent.json").string()) == 2);

  write_file(dir / "fracR.json", R"({"model":"bernoulli","event":"one_arm","R":4.5})");
  CHECK(run_cli("simulate --spec " + (dir / "fracR.json").string()) == 2);

  CHECK(run_cli("simulate --spec " + (dir / "does_not_exist.json").string()) == 2);
  CHECK(run_cli("verify not-a-check") == 2);
  CHECK(run_cli("nonsense") == 2);
  CHECK(run_cli("simulate") == 2);  // --spec is required
}

TEST_CASE("verify: exact checks hold and carry provenance") {
  json pinsker = run_json("verify pinsker");
  CHECK(pinsker["check"] == "pinsker");
  CHECK(pinsker["verdict"].get<bool>());
  CHECK(pinsker["terms"]["min_slack"]["value"].get<double>() >= 0.0);
  CHECK(pinsker.contains("seed"));
  CHECK(pinsker["spec_hash"].is_string());

  json kl = run_json("verify kl-stopped");
  CHECK(kl["verdict"].get<bool>());
  const double lhs = kl["terms"]["lhs_stopped_kl"]["value"].get<double>();
  const double rhs = kl["terms"]["rhs_expected_tau_kl"]["value"].get<double>();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  CHECK(run_json("verify isoperimetry")["verdict"].get<bool>());
  CHECK(run_json("verify osss")["verdict"].get<bool>());
  CHECK(run_json("verify genlb")["verdict"].get<bool>());
  CHECK(run_json("verify genrevbound")["verdict"].get<bool>());

  // enumeration checks accept rect instances under the other two algorithms
  const fs::path dir = work_dir();
  write_file(dir / "osss_rect.json",
             R"({"algorithm":"interface_growth","instance":{"type":"rect","cols":3,"rows":2},"p":0.3})");
  json r = run_json("verify osss --spec " + (dir / "osss_rect.json").string());
  CHECK(r["verdict"].get<bool>());
  write_file(dir / "genub_rect.json",
             R"({"algorithm":"hyperplane_sweep","instance":{"type":"rect","cols":3,"rows":2},"p":0.5,"q":0.6})");
  CHECK(run_json("verify genub --spec " + (dir / "genub_rect.json").string())["verdict"].get<bool>());
}

TEST_CASE("verify: monte carlo checks run from small specs") {
  const fs::path dir = work_dir();
  write_file(dir / "ubb1.json", R"({"d":2,"p":0.5,"q":0.55,"R":8,"n":4000,"seed":2})");
  json u = run_json("verify ubb1 --spec " + (dir / "ubb1.json").string());
  CHECK(u["verdict"].get<bool>());
  CHECK(u["seed"].get<std::uint64_t>() == 2);

  write_file(dir / "tas.json", R"({"model":"bernoulli","R":8,"n":20000,"seed":4})");
  json t = run_json("verify two-arm-square --spec " + (dir / "tas.json").string());
  CHECK(t["verdict"].get<bool>());
  CHECK(t["detail"][0] == "two-arm-square");

  // merged gaussian families carry one sub-report per bound; a shared R list
  // must satisfy the tighter geometry precondition (R >= 4 * support)
  write_file(dir / "ubgf.json", R"({"R":[8,12],"n":250,"seed":3})");
  json g = run_json("verify ubgf --spec " + (dir / "ubgf.json").string());
  CHECK(g["detail"].size() == 2);
  CHECK(g["detail"][0] == "ubgf1");
  CHECK(g["detail"][1] == "ubgf2");
  bool saw_prefixed = false;
  for (auto it = g["terms"].begin(); it != g["terms"].end(); ++it) {
    if (it.key().rfind("ubgf1.", 0) == 0) saw_prefixed = true;
  }
  CHECK(saw_prefixed);
}

TEST_CASE("verify: reports are identical across worker counts") {
  const fs::path dir = work_dir();
  write_file(dir / "w.json", R"({"d":2,"p":0.5,"q":0.55,"R":8,"n":2000,"seed":6})");
  const fs::path w1 = dir / "w1.json", w4 = dir / "w4.json";
  CHECK(run_cli("verify ubb1 --spec " + (dir / "w.json").string() + " --workers 1 --out " +
                w1.string()) == 0);
  CHECK(run_cli("verify ubb1 --spec " + (dir / "w.json").string() + " --workers 4 --out " +
                w4.string()) == 0);
  CHECK(read_file(w1) == read_file(w4));
}

TEST_CASE("fit: synthetic power law and failure modes") {
  const fs::path dir = work_dir();
  std::ostringstream csv;
  csv << "model,event,param,R,k,n,estimate,stderr,seed\n";
  for (int R : {8, 16, 32, 64, 128}) {
    csv << "bernoulli,one_arm,0.5," << R << ",1,1000," << std::pow(R, -1.0 / 3.0)
        << ",0.001,1\n";
  }
  write_file(dir / "synth.csv", csv.str());
  CHECK(run_cli("fit " + (dir / "synth.csv").string() + " power --out " +
                (dir / "fit.json").string()) == 0);
  json fit = json::parse(read_file(dir / "fit.json"));
  CHECK(fit["slope"].get<double>() == doctest::Approx(-1.0 / 3.0).epsilon(1e-6));
  CHECK(fit["r_squared"].get<double>() > 0.999);
  CHECK(fit["n_points"].get<int>() == 5);
  const std::string points = read_file(dir / "fit.json.points.csv");
  CHECK(points.find("log_R,log_estimate") != std::string::npos);

  // exponential kind accepts the same schema
  CHECK(run_cli("fit " + (dir / "synth.csv").string() + " exp --out " +
                (dir / "efit.json").string()) == 0);
  json efit = json::parse(read_file(dir / "efit.json"));
  CHECK(efit["kind"] == "exp");
  CHECK(efit["decay_rate"].get<double>() > 0.0);

  write_file(dir / "empty.csv", "model,event,param,R,k,n,estimate,stderr,seed\n");
  CHECK(run_cli("fit " + (dir / "empty.csv").string() + " power") == 2);
  write_file(dir / "headerless.csv", "1,2,3\n");
  CHECK(run_cli("fit " + (dir / "headerless.csv").string() + " power") == 2);
  CHECK(run_cli("fit " + (dir / "synth.csv").string() + " banana") == 2);

  // simulate output feeds straight back into fit
  write_file(dir / "loop.json",
             R"({"model":"bernoulli","p":0.5,"event":"one_arm","R":[4,8,16,32],"n":4000,"seed":1})");
  CHECK(run_cli("simulate --spec " + (dir / "loop.json").string() + " --out " +
                (dir / "loop.csv").string()) == 0);
  CHECK(run_cli("fit " + (dir / "loop.csv").string() + " power --out " +
                (dir / "loopfit.json").string()) == 0);
  json loop = json::parse(read_file(dir / "loopfit.json"));
  CHECK(loop["slope"].get<double>() < 0.0);
}

TEST_CASE("revealments: one row per unit for both models") {
  const fs::path dir = work_dir();
  write_file(dir / "revb.json",
             R"({"model":"bernoulli","algorithm":"origin_cluster","R":2,"p":0.5,"n":300,"seed":5})");
  const fs::path csv = dir / "revb.csv";
  CHECK(run_cli("revealments --spec " + (dir / "revb.json").string() + " --out " + csv.string()) ==
        0);
  std::istringstream in(read_file(csv));
  std::string line;
  int rows = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.rfind("model,algorithm,unit", 0) == 0) {
      header = true;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    ++rows;
    std::istringstream ls(line);
    std::string cell;
    for (int i = 0; i < 8 && std::getline(ls, cell, ','); ++i) {}
    const double r = std::stod(cell);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }
  CHECK(header);
  CHECK(rows == 40);  // edge count of the radius-2 square box

  write_file(dir / "revg.json",
             R"({"model":"gaussian","algorithm":"annulus_seed","R":6,"n":60,"seed":5})");
  CHECK(run_cli("revealments --spec " + (dir / "revg.json").string() + " --out " +
                (dir / "revg.csv").string()) == 0);
  CHECK(read_file(dir / "revg.csv").find("gaussian,annulus_seed,0,") != std::string::npos);
}
