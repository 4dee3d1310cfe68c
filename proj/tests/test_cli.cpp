#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "confscore/cli.hpp"
#include "confscore/data.hpp"
#include "confscore/simulation.hpp"

namespace fs = std::filesystem;
using confscore::cli::run;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::initializer_list<std::string> args) {
  std::vector<std::string> a{"confscore"};
  a.insert(a.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : a) argv.push_back(s.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("confscore_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
  std::size_t count() const {
    return static_cast<std::size_t>(std::distance(fs::directory_iterator(path), {}));
  }
};

std::string slurp(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void spit(const std::string& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  f << content;
}

std::vector<std::vector<std::string>> rows(const std::string& csv) {
  return confscore::parse_delimited(csv);
}

std::string write_sim_csv(const TempDir& dir, const std::string& name, std::size_t n,
                          std::size_t p, std::uint64_t seed) {
  auto s = confscore::SimScenario::preset(confscore::ScenarioKind::low_dim);
  s.n = n;
  s.p = p;
  s.seed = seed;
  const auto sim = confscore::generate(s, 0);
  const std::string path = dir.file(name);
  std::ofstream f(path, std::ios::binary);
  confscore::write_csv(sim.data, f, "Y", "E");
  return path;
}

const char* kSixRows = "O,E,C\n1,1,1\n0,1,1\n1,0,1\n0,0,0\n1,1,0\n0,0,1\n";

}  // namespace

TEST_CASE("score on the six-row table") {
  TempDir dir("six");
  spit(dir.file("six.csv"), kSixRows);
  const auto r = cli({"score", "--data", dir.file("six.csv"), "--outcome", "O", "--exposure", "E",
                      "--saturated", "--format", "csv", "--threads", "1"});
  REQUIRE(r.code == 0);
  const auto t = rows(r.out);
  REQUIRE(t.size() == 2);
  CHECK(t[0] == std::vector<std::string>{"id", "name", "theta", "phi", "psi", "se_phi", "ci_lo",
                                         "ci_hi", "p_value", "rank", "selected"});
  CHECK(t[1][0] == "1");
  CHECK(t[1][1] == "C");
  CHECK(std::stod(t[1][2]) == 0.25);

  for (const char* est : {"plugin-om", "plugin-ps", "dr", "tmle"}) {
    const auto j = cli({"score", "--data", dir.file("six.csv"), "--outcome", "O", "--exposure",
                        "E", "--saturated", "--estimator", est});
    REQUIRE(j.code == 0);
    const json doc = json::parse(j.out);
    CHECK(doc["schema"] == confscore::cli::kReportSchema);
    CHECK(doc["config"]["estimator"] == est);
    CHECK(doc["results"][0]["theta"].get<double>() == doctest::Approx(0.25).epsilon(1e-14));
  }
}

TEST_CASE("invalid input exits 2 with a one-line reason") {
  TempDir dir("invalid");
  spit(dir.file("six.csv"), kSixRows);
  auto r = cli({"score", "--data", dir.file("six.csv"), "--outcome", "O", "--exposure", "Treat"});
  CHECK(r.code == 2);
  CHECK(r.err.find("Treat") != std::string::npos);
  CHECK(r.err.rfind("kind=", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  CHECK(r.out.empty());

  r = cli({"score", "--data", dir.file("missing.csv")});
  CHECK(r.code == 2);
  r = cli({"score"});
  CHECK(r.code == 2);
  r = cli({"score", "--data", dir.file("six.csv"), "--outcome", "O", "--exposure", "E",
           "--estimator", "magic"});
  CHECK(r.code == 2);
  r = cli({"score", "--data", dir.file("six.csv"), "--outcome", "O", "--exposure", "E",
           "--degree", "40"});
  CHECK(r.code == 2);
  r = cli({"score", "--data", dir.file("six.csv"), "--outcome", "O", "--exposure", "E",
           "--format", "xml"});
  CHECK(r.code == 2);
  r = cli({"score", "--no-such-flag"});
  CHECK(r.code == 2);
  r = cli({});
  CHECK(r.code == 2);
  r = cli({"rank", "--data", dir.file("six.csv"), "--outcome", "O", "--exposure", "E",
           "--top-k", "1", "--alpha", "0.05"});
  CHECK(r.code == 2);
  CHECK(r.err.find("mutually exclusive") != std::string::npos);
  r = cli({"simulate", "--out", dir.file("x")});
  CHECK(r.code == 2);
}

TEST_CASE("help exits 0") {
  const auto r = cli({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("score") != std::string::npos);
  CHECK(cli({"rank", "--help"}).code == 0);
}

TEST_CASE("reruns are byte-identical and thread-count invariant") {
  TempDir dir("rerun");
  const std::string data = write_sim_csv(dir, "d.csv", 300, 15, 3);
  std::vector<std::string> outputs;
  for (const char* threads : {"1", "1", "3"}) {
    for (const char* fmt : {"json", "csv"}) {
      const std::string out = dir.file(std::string("r_") + threads + fmt + std::to_string(outputs.size()));
      const auto r = cli({"rank", "--data", data, "--outcome", "Y", "--exposure", "E", "--threads",
                          threads, "--format", fmt, "--out", out});
      REQUIRE(r.code == 0);
      CHECK(r.out.empty());
      CHECK(fs::exists(out + ".manifest.json"));
      CHECK_FALSE(fs::exists(out + ".tmp"));
      outputs.push_back(slurp(out));
    }
  }
  CHECK(outputs[0] == outputs[2]);
  CHECK(outputs[0] == outputs[4]);
  CHECK(outputs[1] == outputs[3]);
  CHECK(outputs[1] == outputs[5]);
  const json m = json::parse(slurp(dir.file("r_3json4") + ".manifest.json"));
  CHECK(m["threads"] == 3);
  CHECK(m.contains("wall_time_seconds"));
  CHECK(m["config"]["subcommand"] == "rank");
}

TEST_CASE("rank selections") {
  TempDir dir("rank");
  const std::string data = write_sim_csv(dir, "d.csv", 300, 15, 5);

  auto r = cli({"rank", "--data", data, "--outcome", "Y", "--exposure", "E", "--top-k", "15",
                "--format", "csv", "--threads", "1"});
  REQUIRE(r.code == 0);
  auto t = rows(r.out);
  REQUIRE(t.size() == 16);
  for (std::size_t i = 1; i < t.size(); ++i) {
    CHECK(t[i][10] == "true");
    CHECK(t[i][9] == std::to_string(i));
  }

  r = cli({"rank", "--data", data, "--outcome", "Y", "--exposure", "E", "--top-k", "4",
           "--threads", "1"});
  REQUIRE(r.code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc["selection_rule"]["kind"] == "top_k");
  int selected = 0;
  double prev = INFINITY;
  for (const auto& row : doc["results"]) {
    selected += row["selected"].get<bool>();
    const double a = std::abs(row["phi"].get<double>());
    CHECK(a <= prev);
    prev = a;
  }
  CHECK(selected == 4);

  // singleton group reproduces the covariate score
  spit(dir.file("groups.json"), R"({"only": ["C3"]})");
  const auto g = cli({"rank", "--data", data, "--outcome", "Y", "--exposure", "E", "--groups",
                      dir.file("groups.json"), "--threads", "1"});
  REQUIRE(g.code == 0);
  const auto s = cli({"score", "--data", data, "--outcome", "Y", "--exposure", "E", "--threads",
                      "1"});
  REQUIRE(s.code == 0);
  const json gj = json::parse(g.out), sj = json::parse(s.out);
  REQUIRE(gj["results"].size() == 1);
  CHECK(gj["results"][0]["name"] == "only");
  CHECK(gj["results"][0]["phi"].get<double>() == sj["results"][2]["phi"].get<double>());
  CHECK(gj["results"][0]["se_phi"].get<double>() == sj["results"][2]["se_phi"].get<double>());
}

TEST_CASE("testing selection on the low-dimensional design") {
  TempDir dir("golden");
  const std::string data = write_sim_csv(dir, "d.csv", 500, 30, 20240501);
  const auto r = cli({"rank", "--data", data, "--outcome", "Y", "--exposure", "E", "--alpha",
                      "0.10", "--format", "csv", "--threads", "1"});
  REQUIRE(r.code == 0);
  int hits = 0;
  for (const auto& row : rows(r.out))
    if (row[10] == "true" && (row[1] == "C1" || row[1] == "C2" || row[1] == "C3" ||
                              row[1] == "C4" || row[1] == "C5"))
      ++hits;
  CHECK(hits / 5.0 >= 0.9);
}

TEST_CASE("no partial outputs on failure") {
  TempDir dir("partial");
  spit(dir.file("six.csv"), kSixRows);
  auto r = cli({"score", "--data", dir.file("six.csv"), "--outcome", "O", "--exposure", "Nope",
                "--out", dir.file("report.json")});
  CHECK(r.code == 2);
  CHECK(dir.count() == 1);

  spit(dir.file("bad.json"), R"({"kind": "low_dim", "p": 3})");
  r = cli({"simulate", "--scenario", dir.file("bad.json"), "--out", dir.file("sim")});
  CHECK(r.code == 2);
  CHECK(dir.count() == 2);

  r = cli({"score", "--data", dir.file("six.csv"), "--outcome", "O", "--exposure", "E",
           "--saturated", "--out", (dir.path / "no_such_dir" / "r.json").string()});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("kind=io", 0) == 0);
  CHECK(dir.count() == 2);
}

TEST_CASE("simulate is deterministic") {
  TempDir dir("sim");
  const std::string scen = std::string(CONFSCORE_PRESET_DIR) + "/low_dim_theta0.json";
  const auto base = [&](const std::string& out, const char* threads) {
    return cli({"simulate", "--scenario", scen, "--replicates", "2", "--seed", "77", "--threads",
                threads, "--oracle-mc", "20000", "--out", out});
  };
  REQUIRE(base(dir.file("a"), "1").code == 0);
  REQUIRE(base(dir.file("b"), "1").code == 0);
  REQUIRE(base(dir.file("c"), "2").code == 0);
  for (const char* ext : {".replicates.csv", ".roc.csv"}) {
    CHECK(slurp(dir.file("a") + ext) == slurp(dir.file("b") + ext));
    CHECK(slurp(dir.file("a") + ext) == slurp(dir.file("c") + ext));
  }
  // the summary embeds the scenario path only, so it compares equal too
  CHECK(slurp(dir.file("a") + ".summary.json") == slurp(dir.file("c") + ".summary.json"));

  const auto reps = rows(slurp(dir.file("a") + ".replicates.csv"));
  CHECK(reps.size() == 1 + 2 * 30);
  CHECK(reps[1][3] == "confounder");
  const auto roc = rows(slurp(dir.file("a") + ".roc.csv"));
  CHECK(roc.size() == 1 + 31);
  CHECK(roc[1] == std::vector<std::string>{"0", "0", "0"});
  CHECK(roc.back() == std::vector<std::string>{"30", "1", "1"});
  const json sum = json::parse(slurp(dir.file("a") + ".summary.json"));
  CHECK(sum["scenario"]["seed"] == 77);
  CHECK(sum["scenario"]["replicates"] == 2);
  CHECK(sum["positivity"].size() == 2);
}

TEST_CASE("uniform preset summary agrees with the oracle") {
  TempDir dir("uniform");
  const std::string scen = std::string(CONFSCORE_PRESET_DIR) + "/uniform_closed_form.json";
  const auto r = cli({"simulate", "--scenario", scen, "--threads", "1", "--out", dir.file("u")});
  REQUIRE(r.code == 0);
  const json sum = json::parse(slurp(dir.file("u") + ".summary.json"));
  const double alpha[] = {0.3, 0.3, 0.4}, beta[] = {1.0, 0.5, 0.0};
  REQUIRE(sum["covariates"].size() == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    const auto& c = sum["covariates"][j];
    const double oracle = c["oracle_phi"], oracle_se = c["oracle_mc_se"];
    const double est = c["estimate"]["mean"], est_se = c["estimate"]["se"];
    CAPTURE(j);
    CAPTURE(est);
    CAPTURE(oracle);
    CHECK(std::abs(oracle - alpha[j] / 3 * (beta[j] + alpha[j])) <= 3 * oracle_se + 1e-12);
    CHECK(std::abs(est - oracle) <= 3 * std::hypot(est_se, oracle_se));
  }
}

TEST_CASE("shipped presets parse") {
  for (const auto& e : fs::directory_iterator(CONFSCORE_PRESET_DIR)) {
    CAPTURE(e.path().string());
    const auto s = confscore::parse_scenario(slurp(e.path().string()));
    CHECK(s.replicates >= 1);
  }
}
