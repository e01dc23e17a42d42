#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "ar1dp/io.hpp"
#include "ar1dp/simdata.hpp"

using namespace ar1dp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(AR1DP_TEST_SCRATCH) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Command {
  int status;
  std::string output;
};

// Runs the CLI, capturing stdout and stderr together.
Command cli(const std::string& args) {
  const std::string cmd = std::string(AR1DP_CLI) + " " + args + " 2>&1";
  Command c{0, {}};
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) c.output += buf;
  const int raw = pclose(pipe);
  c.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

json tiny_config(const fs::path& data) {
  return json{{"data", data.string()},
              {"prior", {{"truncation", 5}}},
              {"mcmc",
               {{"iterations", 30}, {"burn_in", 10}, {"thin", 2}, {"particles", 8}, {"seed", 3}}}};
}

Trace toy_trace() {
  Trace tr;
  tr.T = 2;
  tr.n = 3;
  tr.J = 3;
  tr.p = 1;
  tr.seed = 9;
  tr.config_hash = "00ff";
  Rng rng(1);
  for (std::size_t k = 0; k < 4; ++k) {
    TraceDraw d;
    d.iteration = 10 + k;
    d.psi = rng.uniform() * 2 - 1;
    d.mass = rng.gamma(4, 4);
    d.alloc = Matrix<int>(2, 3);
    for (int& a : d.alloc.storage()) a = static_cast<int>(rng.uniform_index(3));
    for (int h = 0; h < 3; ++h) d.comps.push_back({rng.normal(), rng.gamma(2, 1)});
    d.beta = Matrix<double>(2, 1);
    for (double& b : d.beta.storage()) b = rng.normal() * 1e-7;
    d.weights = sample_weight_paths(WeightProcessKind::Ar1Dp, 0.3, 1.0, 2, 3, rng);
    tr.draws.push_back(std::move(d));
  }
  return tr;
}

void check_same(const Trace& a, const Trace& b) {
  CHECK(a.T == b.T);
  CHECK(a.n == b.n);
  CHECK(a.J == b.J);
  CHECK(a.p == b.p);
  CHECK(a.seed == b.seed);
  CHECK(a.config_hash == b.config_hash);
  REQUIRE(a.draws.size() == b.draws.size());
  for (std::size_t k = 0; k < a.draws.size(); ++k) {
    const auto& x = a.draws[k];
    const auto& y = b.draws[k];
    CHECK(x.iteration == y.iteration);
    CHECK(x.psi == y.psi);
    CHECK(x.mass == y.mass);
    CHECK(x.alloc.storage() == y.alloc.storage());
    CHECK(x.beta.storage() == y.beta.storage());
    CHECK(x.weights.storage() == y.weights.storage());
    for (std::size_t h = 0; h < x.comps.size(); ++h) {
      CHECK(x.comps[h].mu == y.comps[h].mu);
      CHECK(x.comps[h].tau == y.comps[h].tau);
    }
  }
}

}  // namespace

TEST_CASE("dataset CSV round trip") {
  const auto sim = generate_scenario(5, 2, {12, 4});
  std::stringstream ss;
  io::write_dataset_csv(ss, sim.dataset, &sim.true_cluster, "abc");
  const std::string text = ss.str();
  CHECK(text.rfind("# ar1dp ", 0) == 0);
  CHECK(text.find("config_hash=abc") != std::string::npos);
  const auto back = io::parse_dataset_csv(ss, {}, "mem");
  CHECK(back.dataset.values().storage() == sim.dataset.values().storage());
  REQUIRE(back.true_cluster.has_value());
  CHECK(back.true_cluster->storage() == sim.true_cluster.storage());
  CHECK(back.dataset.time_labels == sim.dataset.time_labels);
  CHECK(back.dataset.unit_labels == sim.dataset.unit_labels);
}

TEST_CASE("dataset CSV parsing") {
  SUBCASE("numeric times sort, covariates are read") {
    std::stringstream in("unit,time,value,x\n"
                         "a,10,1.5,0.1\nb,10,2.5,0.2\n# comment\nb,2,3.5,0.3\na,2,4.5,0.4\n");
    const auto d = io::parse_dataset_csv(in, {"x"}, "mem");
    CHECK(d.dataset.time_labels == std::vector<std::string>{"2", "10"});
    CHECK(d.dataset.y(0, 0) == 4.5);
    CHECK(d.dataset.y(1, 1) == 2.5);
    CHECK(d.dataset.x(0, 1)[0] == 0.3);
    CHECK_FALSE(d.true_cluster.has_value());
  }
  SUBCASE("malformed input raises data errors") {
    auto bad = [](const std::string& text, std::vector<std::string> covs = {}) {
      std::stringstream in(text);
      CHECK_THROWS_AS(io::parse_dataset_csv(in, covs, "mem"), io::DataError);
    };
    bad("time,unit\n1,a\n");                              // no value column
    bad("time,unit,value\n1,a,1\n1,a,2\n");               // duplicate
    bad("time,unit,value\n1,a,1\n1,b,2\n2,a,3\n");        // hole in the panel
    bad("time,unit,value\n1,a,abc\n");                    // non-numeric
    bad("time,unit,value\n1,a,1\n", {"missing"});         // unknown covariate
    bad("time,unit,value,true_cluster\n1,a,1,0\n");       // clusters are 1-based
  }
  CHECK_THROWS_AS(io::read_dataset_csv("/nonexistent/file.csv"), io::DataError);
}

TEST_CASE("run configuration") {
  const json j = {{"preset", "simulation"},
                  {"data", "d.csv"},
                  {"prior", {{"psi", {{"a", 2.0}, {"b", 3.0}}}, {"truncation", 7}}},
                  {"mcmc", {{"resampling", "systematic"}, {"seed", 5}}}};
  const auto cfg = io::parse_run_config(j, "/base");
  CHECK(cfg.data_path == fs::path("/base/d.csv"));
  CHECK(cfg.mcmc.iterations == 50000);
  CHECK(cfg.mcmc.burn_in == 25000);
  CHECK(cfg.prior.base.beta == 2.0);
  CHECK(cfg.prior.psi_prior.a == 2.0);
  CHECK(cfg.prior.truncation == 7);
  CHECK(cfg.mcmc.resampling == ResamplingScheme::Systematic);

  // The resolved form parses back to the same hash.
  const auto again = io::parse_run_config(io::resolved_config_json(cfg), "/elsewhere");
  CHECK(io::config_hash(again) == io::config_hash(cfg));

  auto threads = cfg;
  threads.mcmc.threads = 4;
  threads.output_dir = "/tmp/x";
  CHECK(io::config_hash(threads) == io::config_hash(cfg));
  auto seeded = cfg;
  seeded.mcmc.seed = 6;
  CHECK(io::config_hash(seeded) != io::config_hash(cfg));

  auto rejects = [](json bad) { CHECK_THROWS_AS(io::parse_run_config(bad, "/"), io::ConfigError); };
  rejects({{"data", "d.csv"}, {"colour", 1}});
  rejects({{"data", "d.csv"}, {"mcmc", {{"iterations", 10}, {"burn_in", 20}}}});
  rejects({{"data", "d.csv"}, {"prior", {{"truncation", 1}}}});
  rejects({{"data", "d.csv"}, {"prior", {{"process", "pitman-yor"}}}});
  rejects({{"data", "d.csv"}, {"model", {{"kernel", "laplace"}}}});
  rejects({{"data", "d.csv"}, {"preset", "huge"}});
  rejects({{"mcmc", {{"seed", 1}}}});
  rejects({{"data", "d.csv"}, {"mcmc", {{"resampling", "residual"}}}});
}

TEST_CASE("trace round trip in both formats") {
  const Trace tr = toy_trace();
  for (const std::string format : {"binary", "csv"}) {
    const auto dir = scratch("trace_" + format);
    const auto sidecar = io::write_trace(dir, tr, format, json{{"note", "x"}});
    const json meta = io::read_trace_sidecar(sidecar);
    CHECK(meta["format"] == format);
    CHECK(meta["index_base"] == 1);
    CHECK(meta["dims"]["draws"] == 4);
    CHECK(meta["note"] == "x");
    check_same(io::read_trace(sidecar), tr);
  }
  CHECK_THROWS(io::write_trace(scratch("trace_bad"), tr, "parquet"));
}

TEST_CASE("binary trace layout is documented by the sidecar") {
  const Trace tr = toy_trace();
  const auto dir = scratch("trace_layout");
  const auto sidecar = io::write_trace(dir, tr, "binary");
  const json meta = io::read_trace_sidecar(sidecar);
  const std::string bytes = slurp(dir / "trace.bin");
  CHECK(bytes.substr(0, 8) == "AR1DPTRC");
  auto field = [&](const std::string& name) {
    for (const auto& f : meta["fields"])
      if (f["name"] == name) return f;
    FAIL("missing field " << name);
    return json{};
  };
  // Read psi directly from its recorded offset.
  const std::size_t offset = field("psi")["offset"];
  for (std::size_t k = 0; k < 4; ++k) {
    double v;
    std::memcpy(&v, bytes.data() + offset + 8 * k, 8);
    CHECK(v == tr.draws[k].psi);
  }
  const std::size_t s_off = field("s")["offset"];
  std::int32_t first;
  std::memcpy(&first, bytes.data() + s_off, 4);
  CHECK(first == tr.draws[0].alloc(0, 0) + 1);
}

TEST_CASE("summary writers") {
  std::stringstream m;
  Matrix<double> mat(2, 2, 0.25);
  io::write_matrix_csv(m, mat, "h");
  CHECK(m.str().find("config_hash=h") != std::string::npos);

  std::stringstream p;
  const Partition part(std::vector<int>{4, 4, 2});
  const auto labels = label_clusters(std::vector<double>{-1.0, -1.1, 2.0}, part);
  io::write_partition_csv(p, nullptr, part, &labels, "h");
  const std::string ptext = p.str();
  CHECK(ptext.find("unit,cluster,label") != std::string::npos);
  CHECK(ptext.find(",2,woman") != std::string::npos);

  const json s = io::posterior_summary_json(summarize_draws(std::vector<double>{1.0, 2.0, 3.0}));
  CHECK(s["mean"] == 2.0);
  CHECK(s["interval95"].size() == 2);
  CHECK(s["prob_positive"] == 1.0);
}

TEST_CASE("command line: simulate, fit, summarize") {
  const auto dir = scratch("cli");
  const auto data = dir / "data.csv";
  auto r = cli("simulate --scenario 2 --seed 4 --n 10 --T 3 --out " + data.string());
  REQUIRE(r.status == 0);
  const auto sim = io::read_dataset_csv(data);
  CHECK(sim.dataset.num_units() == 10);
  CHECK(sim.dataset.num_times() == 3);

  r = cli("simulate --scenario 9 --out " + (dir / "x.csv").string());
  CHECK(r.status == 2);
  CHECK(r.output.find("1-7") != std::string::npos);

  json cfg = tiny_config(data);
  write_file(dir / "cfg.json", cfg.dump());
  r = cli("fit " + (dir / "cfg.json").string() + " --quiet --output-dir " + (dir / "a").string());
  REQUIRE(r.status == 0);
  r = cli("fit " + (dir / "cfg.json").string() + " --quiet --output-dir " + (dir / "b").string());
  REQUIRE(r.status == 0);
  CHECK(slurp(dir / "a" / "trace.bin") == slurp(dir / "b" / "trace.bin"));
  CHECK(slurp(dir / "a" / "iterations.csv") == slurp(dir / "b" / "iterations.csv"));
  const json resolved = json::parse(slurp(dir / "a" / "resolved_config.json"));
  CHECK(resolved.contains("config_hash"));
  CHECK(resolved.contains("version"));

  // --seed overrides the config and is echoed into the resolved config.
  r = cli("fit " + (dir / "cfg.json").string() + " --quiet --seed 77 --trace-format csv" +
          " --output-dir " + (dir / "c").string());
  REQUIRE(r.status == 0);
  CHECK(json::parse(slurp(dir / "c" / "resolved_config.json"))["mcmc"]["seed"] == 77);
  const Trace tc = io::read_trace(dir / "c" / "trace.json");
  CHECK(tc.seed == 77);
  CHECK(tc.draws.size() == 10);

  r = cli("summarize --trace " + (dir / "a" / "trace.json").string() +
          " --what coclust,binder,labels,predictive,psi-posterior --grid-points 200");
  REQUIRE(r.status == 0);
  for (std::size_t t = 1; t <= 3; ++t) {
    const auto cc = io::read_numeric_csv(dir / "a" / ("coclust_t" + std::to_string(t) + ".csv"));
    REQUIRE(cc.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(cc[i][i] == 1.0);
      for (std::size_t j = 0; j < 10; ++j) CHECK(cc[i][j] == cc[j][i]);
    }
    const auto pred =
        io::read_numeric_csv(dir / "a" / ("predictive_t" + std::to_string(t) + ".csv"));
    CHECK(pred.size() == 200);
    CHECK(fs::exists(dir / "a" / ("binder_t" + std::to_string(t) + ".csv")));
    CHECK(fs::exists(dir / "a" / ("labels_t" + std::to_string(t) + ".csv")));
  }
  const json post = json::parse(slurp(dir / "a" / "posterior.json"));
  CHECK(post["draws"] == 10);
  CHECK(post["psi"].contains("prob_positive"));
  CHECK(post["M"].contains("interval95"));

  r = cli("summarize --trace " + (dir / "a" / "trace.json").string() + " --what nonsense");
  CHECK(r.status == 2);
}

TEST_CASE("command line: error exit codes") {
  const auto dir = scratch("cli_errors");
  json cfg = tiny_config(dir / "absent.csv");
  write_file(dir / "missing.json", cfg.dump());
  auto r = cli("fit " + (dir / "missing.json").string() + " --quiet");
  CHECK(r.status == 3);
  CHECK(r.output.find("absent.csv") != std::string::npos);

  cfg["mcmc"]["colour"] = 1;
  write_file(dir / "unknown.json", cfg.dump());
  r = cli("fit " + (dir / "unknown.json").string() + " --quiet");
  CHECK(r.status == 2);
  CHECK(r.output.find("colour") != std::string::npos);

  write_file(dir / "broken.json", "{ not json");
  CHECK(cli("fit " + (dir / "broken.json").string()).status == 2);
  CHECK(cli("frobnicate").status == 2);

  write_file(dir / "bad.csv", "time,unit,value\n1,a,1\n1,a,2\n");
  write_file(dir / "dup.json", tiny_config(dir / "bad.csv").dump());
  CHECK(cli("fit " + (dir / "dup.json").string() + " --quiet").status == 3);
}

TEST_CASE("command line: several chains") {
  const auto dir = scratch("cli_chains");
  REQUIRE(cli("simulate --scenario 1 --seed 1 --n 6 --T 2 --out " + (dir / "d.csv").string())
              .status == 0);
  write_file(dir / "cfg.json", tiny_config(dir / "d.csv").dump());
  REQUIRE(cli("fit " + (dir / "cfg.json").string() + " --quiet --chains 2 --output-dir " +
              (dir / "out").string())
              .status == 0);
  const Trace c1 = io::read_trace(dir / "out" / "chain_1" / "trace.json");
  const Trace c2 = io::read_trace(dir / "out" / "chain_2" / "trace.json");
  CHECK(c1.seed == 3);
  CHECK(c2.seed == 4);
  CHECK(c1.draws.front().psi != c2.draws.front().psi);
}
