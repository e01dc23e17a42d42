// Command-line front-end: simulate, fit, summarize.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime failure.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ar1dp/inference.hpp"
#include "ar1dp/io.hpp"
#include "ar1dp/simdata.hpp"
#include "ar1dp/summaries.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ar1dp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

fs::path default_output_dir() {
  if (const char* env = std::getenv("AR1DP_OUTPUT_DIR"); env && *env) return env;
  return "ar1dp_out";
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::uint64_t seed = 1;
  std::string out;
  std::optional<std::size_t> n;
  std::optional<std::size_t> T;
};

int cmd_simulate(const SimulateArgs& a) {
  ScenarioOutput sim;
  std::string key;
  if (a.scenario == "gender-like") {
    sim = generate_gender_like(a.seed, a.n.value_or(76), a.T.value_or(3));
  } else {
    int id = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(a.scenario, &used);
      if (used != a.scenario.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw io::ConfigError("unknown scenario '" + a.scenario + "' (valid range 1-7, or gender-like)");
    }
    try {
      sim = generate_scenario(id, a.seed, {a.n, a.T});
    } catch (const std::invalid_argument& e) {
      throw io::ConfigError(e.what());
    }
  }
  key = "simulate;scenario=" + a.scenario + ";seed=" + std::to_string(a.seed) +
        ";n=" + std::to_string(sim.dataset.num_units()) + ";T=" + std::to_string(sim.dataset.num_times());
  const fs::path out_path =
      a.out.empty() ? default_output_dir() / ("scenario" + a.scenario + "_seed" + std::to_string(a.seed) + ".csv")
                    : fs::path(a.out);
  auto out = open_out(out_path);
  io::write_dataset_csv(out, sim.dataset, &sim.true_cluster, fnv1a_hex(key));
  out.close();
  if (!out) throw std::runtime_error("error writing '" + out_path.string() + "'");
  std::cerr << "wrote " << out_path.string() << " (" << sim.dataset.num_times() << " x "
            << sim.dataset.num_units() << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::size_t chains = 1;
  std::string trace_format;
  std::string output_dir;
  bool quiet = false;
};

int cmd_fit(const FitArgs& a) {
  io::RunConfig cfg = io::read_run_config(a.config);
  if (a.seed) cfg.mcmc.seed = *a.seed;
  if (a.threads) cfg.mcmc.threads = std::max<std::size_t>(1, *a.threads);
  if (!a.trace_format.empty()) {
    if (a.trace_format != "binary" && a.trace_format != "csv")
      throw io::ConfigError("--trace-format must be 'binary' or 'csv'");
    cfg.trace_format = a.trace_format;
  }
  if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
  if (cfg.output_dir.empty()) cfg.output_dir = default_output_dir();
  if (a.chains == 0) throw io::ConfigError("--chains must be >= 1");

  if (!fs::exists(cfg.data_path))
    throw io::DataError("data file '" + cfg.data_path.string() + "' does not exist");
  const io::DatasetCsv data = io::read_dataset_csv(cfg.data_path, cfg.covariates);
  if (cfg.prior.process != WeightProcessKind::Ar1Dp)
    throw io::ConfigError("fit supports prior.process = 'ar1dp' only");

  fs::create_directories(cfg.output_dir);
  std::mutex log_mutex;

  // Chain c uses seed + c; each writes into its own directory when k > 1.
  auto run_chain = [&](std::size_t c) {
    io::RunConfig chain_cfg = cfg;
    chain_cfg.mcmc.seed = cfg.mcmc.seed + c;
    const fs::path dir = a.chains == 1 ? cfg.output_dir : cfg.output_dir / ("chain_" + std::to_string(c + 1));
    fs::create_directories(dir);
    const std::string hash = io::config_hash(chain_cfg);
    {
      auto out = open_out(dir / "resolved_config.json");
      json j = io::resolved_config_json(chain_cfg);
      j["config_hash"] = hash;
      j["version"] = io::artifact_version();
      out << j.dump(2) << '\n';
    }
    const std::size_t every = std::max<std::size_t>(1, chain_cfg.mcmc.iterations / 10);
    ProgressCallback progress;
    if (!a.quiet)
      progress = [&](std::size_t it, const ChainState& st) {
        if ((it + 1) % every != 0) return;
        std::lock_guard lock(log_mutex);
        std::cerr << "chain " << c + 1 << ": iteration " << it + 1 << "/" << chain_cfg.mcmc.iterations
                  << "  psi=" << st.psi << "  M=" << st.mass << '\n';
      };
    RunResult res = run_mcmc(data.dataset, chain_cfg.prior, chain_cfg.mcmc, progress);
    res.trace.config_hash = hash;
    json extra = {{"data", chain_cfg.data_path.string()},
                  {"covariates", chain_cfg.covariates},
                  {"chain", c + 1},
                  {"time_labels", data.dataset.time_labels},
                  {"unit_labels", data.dataset.unit_labels},
                  {"psi_acceptance_rate", res.psi_acceptance_rate},
                  {"mass_acceptance_rate", res.mass_acceptance_rate}};
    io::write_trace(dir, res.trace, chain_cfg.trace_format, extra);
    auto log = open_out(dir / "iterations.csv");
    io::write_iteration_log(log, res.log, hash);
    std::lock_guard lock(log_mutex);
    std::cerr << "chain " << c + 1 << ": " << res.trace.draws.size() << " draws written to "
              << dir.string() << " (psi acceptance " << res.psi_acceptance_rate << ", M acceptance "
              << res.mass_acceptance_rate << ")\n";
  };

  if (a.chains == 1) {
    run_chain(0);
    return 0;
  }
  std::vector<std::exception_ptr> errors(a.chains);
  {
    std::vector<std::jthread> workers;
    for (std::size_t c = 0; c < a.chains; ++c)
      workers.emplace_back([&, c] {
        try {
          run_chain(c);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return 0;
}

// ---------------------------------------------------------------------------

struct SummarizeArgs {
  std::string trace;
  std::vector<std::string> what;
  std::string data;
  std::string out;
  std::size_t grid_points = 512;
};

std::optional<Dataset> load_trace_data(const SummarizeArgs& a, const json& side) {
  fs::path path = a.data;
  std::vector<std::string> covariates;
  if (side.contains("covariates")) covariates = side.at("covariates").get<std::vector<std::string>>();
  if (path.empty()) {
    if (!side.contains("data")) return std::nullopt;
    path = side.at("data").get<std::string>();
    if (!fs::exists(path)) return std::nullopt;
  }
  return io::read_dataset_csv(path, covariates).dataset;
}

// Grid for a trace without data: occupied component means +- 4 kernel sds.
std::vector<double> grid_from_trace(const Trace& tr, std::size_t t, std::size_t points) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& d : tr.draws)
    for (std::size_t j = 0; j < tr.n; ++j) {
      const auto& c = d.comps[static_cast<std::size_t>(d.alloc(t, j))];
      const double sd = 1.0 / std::sqrt(tr.base.kernel_lambda * c.tau);
      lo = std::min(lo, c.mu - 4.0 * sd);
      hi = std::max(hi, c.mu + 4.0 * sd);
    }
  if (!(lo < hi)) throw io::DataError("trace has no draws to build a grid from");
  return linear_grid(lo, hi, points);
}

int cmd_summarize(const SummarizeArgs& a) {
  const fs::path side_path = a.trace;
  if (!fs::exists(side_path)) throw io::DataError("trace '" + side_path.string() + "' does not exist");
  const json side = io::read_trace_sidecar(side_path);
  const Trace tr = io::read_trace(side_path);
  if (tr.draws.empty()) throw io::DataError("trace '" + side_path.string() + "' has no draws");
  const fs::path out_dir = a.out.empty() ? side_path.parent_path() : fs::path(a.out);
  fs::create_directories(out_dir);
  const std::string& hash = tr.config_hash;

  std::optional<Dataset> data;
  bool data_loaded = false;
  auto need_data = [&]() -> const Dataset* {
    if (!data_loaded) {
      data = load_trace_data(a, side);
      data_loaded = true;
      if (data && (data->num_times() != tr.T || data->num_units() != tr.n))
        throw io::DataError("data dimensions do not match the trace");
    }
    return data ? &*data : nullptr;
  };
  auto time_tag = [&](std::size_t t) { return "_t" + std::to_string(t + 1) + ".csv"; };

  for (const auto& what : a.what) {
    if (what == "coclust") {
      for (std::size_t t = 0; t < tr.T; ++t) {
        auto out = open_out(out_dir / ("coclust" + time_tag(t)));
        io::write_matrix_csv(out, coclustering(tr, t).probs, hash);
      }
    } else if (what == "binder" || what == "labels") {
      const Dataset* d = need_data();
      if (!d && what == "labels")
        throw io::DataError("labels need the observations; pass --data");
      for (std::size_t t = 0; t < tr.T; ++t) {
        const auto cands = sampled_partitions(tr, t);
        const BinderResult b = binder_partition(coclustering(tr, t), cands);
        std::optional<std::vector<ClusterSummary>> labs;
        if (d) labs = label_clusters(*d, b.partition, t);
        if (what == "binder") {
          auto out = open_out(out_dir / ("binder" + time_tag(t)));
          io::write_partition_csv(out, d, b.partition, labs ? &*labs : nullptr, hash);
        } else {
          auto out = open_out(out_dir / ("labels" + time_tag(t)));
          out << io::provenance_comment(hash) << '\n' << "cluster,size,mean,sd,label\n";
          for (const auto& s : *labs)
            out << s.cluster + 1 << ',' << s.size << ',' << s.mean << ',' << s.sd << ','
                << to_string(s.label) << '\n';
        }
      }
    } else if (what == "predictive") {
      const Dataset* d = need_data();
      for (std::size_t t = 0; t < tr.T; ++t) {
        const auto grid = d ? default_grid(*d, t, a.grid_points) : grid_from_trace(tr, t, a.grid_points);
        auto out = open_out(out_dir / ("predictive" + time_tag(t)));
        io::write_density_csv(out, posterior_predictive_grid(tr, t, grid), hash);
      }
    } else if (what == "psi-posterior") {
      json j;
      j["version"] = io::artifact_version();
      j["config_hash"] = hash;
      j["draws"] = tr.draws.size();
      j["psi"] = io::posterior_summary_json(summarize_draws(tr.psi_draws()));
      j["M"] = io::posterior_summary_json(summarize_draws(tr.mass_draws()));
      auto out = open_out(out_dir / "posterior.json");
      out << j.dump(2) << '\n';
    } else {
      throw io::ConfigError("unknown --what '" + what +
                            "' (expected coclust, binder, labels, predictive or psi-posterior)");
    }
  }
  std::cerr << "summaries written to " << out_dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AR1-DP dependent mixture: simulate panels, fit by particle Gibbs, summarize traces"};
  app.require_subcommand(1);
  app.set_version_flag("--version", io::artifact_version());

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Write a simulated long-format panel CSV");
  s->add_option("--scenario", sim.scenario, "Scenario id 1-7, or gender-like")->required();
  s->add_option("--seed", sim.seed, "Random seed");
  s->add_option("--out", sim.out, "Output CSV path (default: $AR1DP_OUTPUT_DIR or ./ar1dp_out)");
  s->add_option("--n", sim.n, "Number of units");
  s->add_option("--T", sim.T, "Number of time points");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Run the sampler described by a JSON config");
  f->add_option("config", fit.config, "Config file")->required();
  f->add_option("--seed", fit.seed, "Override mcmc.seed");
  f->add_option("--threads", fit.threads, "Threads for particle weighting");
  f->add_option("--chains", fit.chains, "Independent chains (seeds seed, seed+1, ...)");
  f->add_option("--trace-format", fit.trace_format, "binary or csv");
  f->add_option("--output-dir", fit.output_dir, "Override output_dir");
  f->add_flag("--quiet", fit.quiet, "No progress output");

  SummarizeArgs sum;
  auto* m = app.add_subcommand("summarize", "Summaries of a trace");
  m->add_option("--trace", sum.trace, "Trace sidecar (trace.json)")->required();
  m->add_option("--what", sum.what, "coclust, binder, labels, predictive, psi-posterior")
      ->required()
      ->delimiter(',');
  m->add_option("--data", sum.data, "Dataset CSV (default: the one recorded in the trace)");
  m->add_option("--out", sum.out, "Output directory (default: next to the trace)");
  m->add_option("--grid-points", sum.grid_points, "Predictive grid size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*f) return cmd_fit(fit);
    if (*m) return cmd_summarize(sum);
  } catch (const io::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const io::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
