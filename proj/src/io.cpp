#include "ar1dp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#ifndef AR1DP_VERSION
#define AR1DP_VERSION "0.0.0"
#endif

namespace ar1dp::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string artifact_version() { return AR1DP_VERSION; }

std::string provenance_comment(const std::string& config_hash) {
  return "# ar1dp " + artifact_version() + " config_hash=" + config_hash;
}

namespace {

// Shortest representation that reads back to the same double.
std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, long long& out) {
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

bool is_comment_or_blank(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset CSV

DatasetCsv read_dataset_csv(const fs::path& path, const std::vector<std::string>& covariate_columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");
  return parse_dataset_csv(in, covariate_columns, path.string());
}

DatasetCsv parse_dataset_csv(std::istream& in, const std::vector<std::string>& covariate_columns,
                             const std::string& source_name) {
  auto fail = [&](std::size_t line_no, const std::string& msg) -> DataError {
    return DataError(source_name + ":" + std::to_string(line_no) + ": " + msg);
  };

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_blank(line)) continue;
    for (auto f : split_csv(line)) header.emplace_back(f);
    break;
  }
  if (header.empty()) throw DataError(source_name + ": no header row");

  auto find_col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_time = find_col("time");
  const auto c_unit = find_col("unit");
  const auto c_value = find_col("value");
  if (!c_time || !c_unit || !c_value)
    throw DataError(source_name + ": header must contain time, unit and value columns");
  const auto c_cluster = find_col("true_cluster");
  std::vector<std::size_t> c_cov;
  for (const auto& name : covariate_columns) {
    auto c = find_col(name);
    if (!c) throw DataError(source_name + ": covariate column '" + name + "' not found");
    c_cov.push_back(*c);
  }
  const std::size_t p = c_cov.size();

  struct Row {
    std::size_t time;
    std::size_t unit;
    double value;
    long long cluster;
    std::vector<double> x;
  };
  std::vector<Row> rows;
  std::vector<std::string> time_names;
  std::vector<std::string> unit_names;
  std::unordered_map<std::string, std::size_t> time_index;
  std::unordered_map<std::string, std::size_t> unit_index;

  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_blank(line)) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size())
      throw fail(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                              std::to_string(f.size()));
    Row r{};
    const std::string tname(f[*c_time]);
    const std::string uname(f[*c_unit]);
    if (tname.empty() || uname.empty()) throw fail(line_no, "empty time or unit");
    auto [ti, tnew] = time_index.emplace(tname, time_names.size());
    if (tnew) time_names.push_back(tname);
    auto [ui, unew] = unit_index.emplace(uname, unit_names.size());
    if (unew) unit_names.push_back(uname);
    r.time = ti->second;
    r.unit = ui->second;
    if (!parse_double(f[*c_value], r.value))
      throw fail(line_no, "value '" + std::string(f[*c_value]) + "' is not a number");
    r.cluster = 0;
    if (c_cluster && !parse_int(f[*c_cluster], r.cluster))
      throw fail(line_no, "true_cluster '" + std::string(f[*c_cluster]) + "' is not an integer");
    r.x.resize(p);
    for (std::size_t k = 0; k < p; ++k)
      if (!parse_double(f[c_cov[k]], r.x[k]))
        throw fail(line_no, "covariate '" + header[c_cov[k]] + "' is not a number");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError(source_name + ": no data rows");

  // Numeric times sort numerically; otherwise keep first-appearance order.
  std::vector<std::size_t> time_rank(time_names.size());
  {
    std::vector<double> tv(time_names.size());
    bool numeric = true;
    for (std::size_t i = 0; i < time_names.size() && numeric; ++i)
      numeric = parse_double(time_names[i], tv[i]);
    std::vector<std::size_t> order(time_names.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (numeric)
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return tv[a] < tv[b]; });
    for (std::size_t k = 0; k < order.size(); ++k) time_rank[order[k]] = k;
    std::vector<std::string> sorted(time_names.size());
    for (std::size_t i = 0; i < time_names.size(); ++i) sorted[time_rank[i]] = time_names[i];
    time_names = std::move(sorted);
  }

  const std::size_t T = time_names.size();
  const std::size_t n = unit_names.size();
  Matrix<double> y(T, n, 0.0);
  Matrix<int> seen(T, n, 0);
  Matrix<int> cluster(T, n, 0);
  std::vector<double> x(T * n * p, 0.0);
  for (const auto& r : rows) {
    const std::size_t t = time_rank[r.time];
    if (seen(t, r.unit))
      throw DataError(source_name + ": duplicate row for time '" + time_names[t] + "', unit '" +
                      unit_names[r.unit] + "'");
    seen(t, r.unit) = 1;
    y(t, r.unit) = r.value;
    if (c_cluster) {
      if (r.cluster < 1) throw DataError(source_name + ": true_cluster must be >= 1");
      cluster(t, r.unit) = static_cast<int>(r.cluster - 1);
    }
    std::copy(r.x.begin(), r.x.end(), x.begin() + static_cast<std::ptrdiff_t>((t * n + r.unit) * p));
  }
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < n; ++j)
      if (!seen(t, j))
        throw DataError(source_name + ": missing observation for time '" + time_names[t] +
                        "', unit '" + unit_names[j] + "' (panel must be complete)");

  DatasetCsv out;
  out.dataset = p > 0 ? Dataset(std::move(y), std::move(x), p) : Dataset(std::move(y));
  out.dataset.time_labels = std::move(time_names);
  out.dataset.unit_labels = std::move(unit_names);
  out.dataset.covariate_names = covariate_columns;
  if (c_cluster) out.true_cluster = std::move(cluster);
  return out;
}

void write_dataset_csv(std::ostream& out, const Dataset& data, const Matrix<int>* true_cluster,
                       const std::string& config_hash) {
  const std::size_t T = data.num_times();
  const std::size_t n = data.num_units();
  const std::size_t p = data.num_covariates();
  out << provenance_comment(config_hash) << '\n';
  out << "time,unit,value";
  if (true_cluster) out << ",true_cluster";
  for (std::size_t k = 0; k < p; ++k)
    out << ',' << (k < data.covariate_names.size() ? data.covariate_names[k] : "x" + std::to_string(k + 1));
  out << '\n';
  for (std::size_t t = 0; t < T; ++t) {
    const std::string tl = t < data.time_labels.size() ? data.time_labels[t] : std::to_string(t + 1);
    for (std::size_t j = 0; j < n; ++j) {
      out << tl << ',' << (j < data.unit_labels.size() ? data.unit_labels[j] : std::to_string(j + 1))
          << ',' << fmt_double(data.y(t, j));
      if (true_cluster) out << ',' << (*true_cluster)(t, j) + 1;
      for (double v : data.x(t, j)) out << ',' << fmt_double(v);
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Run configuration

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

double get_double(const json& obj, const char* key, const std::string& where, double dflt) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  return v.get<double>();
}

std::size_t get_size(const json& obj, const char* key, const std::string& where, std::size_t dflt) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  return v.get<std::size_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& where,
                       const std::string& dflt) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + " must be a string");
  return v.get<std::string>();
}

bool get_bool(const json& obj, const char* key, const std::string& where, bool dflt) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(where + "." + key + " must be true or false");
  return v.get<bool>();
}

}  // namespace

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  check_keys(j, "", {"preset", "data", "output_dir", "model", "prior", "mcmc", "trace_format"});
  RunConfig c;
  c.preset = get_string(j, "preset", "config", "applications");
  if (c.preset == "applications") {
    c.mcmc = MCMCConfig::applications();
    c.prior.base = BaseMeasure{0.0, 0.01, 2.0, 1.0, 1.0};
  } else if (c.preset == "simulation") {
    c.mcmc = MCMCConfig::simulation();
    c.prior.base = BaseMeasure{0.0, 0.01, 2.0, 2.0, 1.0};
  } else {
    throw ConfigError("preset must be 'applications' or 'simulation', got '" + c.preset + "'");
  }

  if (!j.contains("data")) throw ConfigError("missing required key 'data'");
  {
    const fs::path d = get_string(j, "data", "config", "");
    c.data_path = (d.is_relative() && !base_dir.empty() ? base_dir / d : d).lexically_normal();
  }
  if (j.contains("output_dir")) {
    const fs::path o = get_string(j, "output_dir", "config", "");
    c.output_dir = (o.is_relative() && !base_dir.empty() ? base_dir / o : o).lexically_normal();
  }
  c.trace_format = get_string(j, "trace_format", "config", c.trace_format);
  if (c.trace_format != "binary" && c.trace_format != "csv")
    throw ConfigError("trace_format must be 'binary' or 'csv'");

  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, "model", {"kernel", "base_measure", "covariates", "regression_prior_variance"});
    const auto kernel = get_string(m, "kernel", "model", "gaussian");
    if (kernel != "gaussian") throw ConfigError("model.kernel: only 'gaussian' is supported");
    if (m.contains("base_measure")) {
      const auto& b = m.at("base_measure");
      check_keys(b, "model.base_measure", {"mu0", "lambda0", "alpha", "beta", "kernel_lambda"});
      const std::string w = "model.base_measure";
      auto& base = c.prior.base;
      base.mu0 = get_double(b, "mu0", w, base.mu0);
      base.lambda0 = get_double(b, "lambda0", w, base.lambda0);
      base.alpha = get_double(b, "alpha", w, base.alpha);
      base.beta = get_double(b, "beta", w, base.beta);
      base.kernel_lambda = get_double(b, "kernel_lambda", w, base.kernel_lambda);
    }
    if (m.contains("covariates")) {
      const auto& cv = m.at("covariates");
      if (!cv.is_array()) throw ConfigError("model.covariates must be an array of column names");
      for (const auto& e : cv) {
        if (!e.is_string()) throw ConfigError("model.covariates entries must be strings");
        c.covariates.push_back(e.get<std::string>());
      }
    }
    c.prior.regression_prior_variance = get_double(m, "regression_prior_variance", "model",
                                                   c.prior.regression_prior_variance);
  }

  if (j.contains("prior")) {
    const auto& p = j.at("prior");
    check_keys(p, "prior", {"process", "psi", "mass", "truncation"});
    try {
      c.prior.process = parse_weight_process(get_string(p, "process", "prior", "ar1dp"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("prior.process: ") + e.what());
    }
    if (p.contains("psi")) {
      const auto& ps = p.at("psi");
      check_keys(ps, "prior.psi", {"a", "b"});
      c.prior.psi_prior.a = get_double(ps, "a", "prior.psi", c.prior.psi_prior.a);
      c.prior.psi_prior.b = get_double(ps, "b", "prior.psi", c.prior.psi_prior.b);
    }
    if (p.contains("mass")) {
      const auto& ms = p.at("mass");
      check_keys(ms, "prior.mass", {"shape", "rate"});
      c.prior.mass_prior.shape = get_double(ms, "shape", "prior.mass", c.prior.mass_prior.shape);
      c.prior.mass_prior.rate = get_double(ms, "rate", "prior.mass", c.prior.mass_prior.rate);
    }
    c.prior.truncation = get_size(p, "truncation", "prior", c.prior.truncation);
  }

  if (j.contains("mcmc")) {
    const auto& m = j.at("mcmc");
    check_keys(m, "mcmc",
               {"iterations", "burn_in", "thin", "particles", "psi_proposal_sd", "adapt_psi_proposal",
                "target_psi_acceptance", "mass_proposal_sd", "resampling", "latent_blocking", "label_swaps", "seed", "threads"});
    auto& mc = c.mcmc;
    mc.iterations = get_size(m, "iterations", "mcmc", mc.iterations);
    mc.burn_in = get_size(m, "burn_in", "mcmc", mc.burn_in);
    mc.thin = get_size(m, "thin", "mcmc", mc.thin);
    mc.num_particles = get_size(m, "particles", "mcmc", mc.num_particles);
    mc.psi_proposal_sd = get_double(m, "psi_proposal_sd", "mcmc", mc.psi_proposal_sd);
    mc.adapt_psi_proposal = get_bool(m, "adapt_psi_proposal", "mcmc", mc.adapt_psi_proposal);
    mc.target_psi_acceptance = get_double(m, "target_psi_acceptance", "mcmc", mc.target_psi_acceptance);
    mc.mass_proposal_sd = get_double(m, "mass_proposal_sd", "mcmc", mc.mass_proposal_sd);
    try {
      mc.resampling = parse_resampling(get_string(m, "resampling", "mcmc", "multinomial"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("mcmc.resampling: ") + e.what());
    }
    try {
      mc.latent_blocking = parse_latent_blocking(
          get_string(m, "latent_blocking", "mcmc", std::string(to_string(mc.latent_blocking))));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("mcmc.latent_blocking: ") + e.what());
    }
    mc.label_swaps = get_size(m, "label_swaps", "mcmc", mc.label_swaps);
    mc.seed = get_size(m, "seed", "mcmc", mc.seed);
    mc.threads = get_size(m, "threads", "mcmc", mc.threads);
  }

  try {
    c.prior.validate();
    c.mcmc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig read_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j, fs::absolute(path).parent_path());
}

json resolved_config_json(const RunConfig& c) {
  const auto& b = c.prior.base;
  const auto& m = c.mcmc;
  json j;
  j["preset"] = c.preset;
  j["data"] = c.data_path.string();
  j["output_dir"] = c.output_dir.string();
  j["trace_format"] = c.trace_format;
  j["model"] = {{"kernel", "gaussian"},
                {"base_measure",
                 {{"mu0", b.mu0}, {"lambda0", b.lambda0}, {"alpha", b.alpha}, {"beta", b.beta},
                  {"kernel_lambda", b.kernel_lambda}}},
                {"covariates", c.covariates},
                {"regression_prior_variance", c.prior.regression_prior_variance}};
  j["prior"] = {{"process", std::string(to_string(c.prior.process))},
                {"psi", {{"a", c.prior.psi_prior.a}, {"b", c.prior.psi_prior.b}}},
                {"mass", {{"shape", c.prior.mass_prior.shape}, {"rate", c.prior.mass_prior.rate}}},
                {"truncation", c.prior.truncation}};
  j["mcmc"] = {{"iterations", m.iterations},
               {"burn_in", m.burn_in},
               {"thin", m.thin},
               {"particles", m.num_particles},
               {"psi_proposal_sd", m.psi_proposal_sd},
               {"adapt_psi_proposal", m.adapt_psi_proposal},
               {"target_psi_acceptance", m.target_psi_acceptance},
               {"mass_proposal_sd", m.mass_proposal_sd},
               {"resampling", std::string(to_string(m.resampling))},
               {"latent_blocking", std::string(to_string(m.latent_blocking))},
               {"label_swaps", m.label_swaps},
               {"seed", m.seed},
               {"threads", m.threads}};
  return j;
}

std::string config_hash(const RunConfig& config) {
  json j = resolved_config_json(config);
  // Output location and thread count do not change the draws.
  j.erase("output_dir");
  j["mcmc"].erase("threads");
  return fnv1a_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Trace files

namespace {

constexpr char kMagic[8] = {'A', 'R', '1', 'D', 'P', 'T', 'R', 'C'};

struct FieldSpec {
  std::string name;
  std::string dtype;  // f64, i32 or u64
  std::vector<std::size_t> shape;
};

std::vector<FieldSpec> trace_fields(const Trace& tr) {
  const std::size_t D = tr.draws.size();
  return {{"iteration", "u64", {D}},           {"psi", "f64", {D}},
          {"M", "f64", {D}},                   {"s", "i32", {D, tr.T, tr.n}},
          {"theta_mu", "f64", {D, tr.J}},      {"theta_tau", "f64", {D, tr.J}},
          {"beta", "f64", {D, tr.T, tr.p}},    {"weights", "f64", {D, tr.T, tr.J}}};
}

std::size_t shape_count(const std::vector<std::size_t>& shape) {
  std::size_t c = 1;
  for (auto s : shape) c *= s;
  return c;
}

// Values per draw: product of all but the leading dimension.
std::size_t per_draw(const std::vector<std::size_t>& shape) {
  std::size_t c = 1;
  for (std::size_t k = 1; k < shape.size(); ++k) c *= shape[k];
  return c;
}

std::size_t dtype_size(const std::string& dtype) { return dtype == "i32" ? 4 : 8; }

// Per-draw values of one field, flattened row-major.
template <class F>
void for_each_value(const Trace& tr, const std::string& name, F&& emit) {
  for (const auto& d : tr.draws) {
    if (name == "iteration") {
      emit(static_cast<std::uint64_t>(d.iteration + 1));
    } else if (name == "psi") {
      emit(d.psi);
    } else if (name == "M") {
      emit(d.mass);
    } else if (name == "s") {
      for (int v : d.alloc.storage()) emit(static_cast<std::int32_t>(v + 1));
    } else if (name == "theta_mu") {
      for (const auto& c : d.comps) emit(c.mu);
    } else if (name == "theta_tau") {
      for (const auto& c : d.comps) emit(c.tau);
    } else if (name == "beta") {
      for (double v : d.beta.storage()) emit(v);
    } else if (name == "weights") {
      for (double v : d.weights.storage()) emit(v);
    }
  }
}

json base_json(const BaseMeasure& b) {
  return {{"mu0", b.mu0}, {"lambda0", b.lambda0}, {"alpha", b.alpha}, {"beta", b.beta},
          {"kernel_lambda", b.kernel_lambda}};
}

std::string column_name(const std::string& field, const std::vector<std::size_t>& shape,
                        std::size_t flat) {
  if (shape.size() <= 1) return field;
  std::vector<std::size_t> idx(shape.size() - 1);
  for (std::size_t k = shape.size() - 1; k-- > 1;) {
    idx[k - 1] = flat % shape[k];
    flat /= shape[k];
  }
  std::string s = field + "[";
  for (std::size_t k = 0; k < idx.size(); ++k) s += (k ? "," : "") + std::to_string(idx[k] + 1);
  return s + "]";
}

}  // namespace

fs::path write_trace(const fs::path& dir, const Trace& trace, const std::string& format,
                     const json& extra, const std::string& stem) {
  if (format != "binary" && format != "csv")
    throw std::invalid_argument("trace format must be 'binary' or 'csv'");
  fs::create_directories(dir);
  const auto fields = trace_fields(trace);
  const std::size_t D = trace.draws.size();

  json side;
  side["schema"] = "ar1dp-trace";
  side["schema_version"] = kTraceSchemaVersion;
  side["version"] = artifact_version();
  side["config_hash"] = trace.config_hash;
  side["seed"] = trace.seed;
  side["dims"] = {{"draws", D}, {"T", trace.T}, {"n", trace.n}, {"J", trace.J}, {"p", trace.p}};
  side["base_measure"] = base_json(trace.base);
  side["index_base"] = 1;
  side["format"] = format;
  for (const auto& [k, v] : extra.items()) side[k] = v;

  const std::string data_name = stem + (format == "binary" ? ".bin" : ".csv");
  side["data_file"] = data_name;
  json jfields = json::array();

  std::ofstream out(dir / data_name, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + (dir / data_name).string() + "'");

  if (format == "binary") {
    side["byte_order"] = "little";
    out.write(kMagic, sizeof kMagic);
    const std::uint32_t header[2] = {kTraceSchemaVersion, 0};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    std::size_t offset = sizeof kMagic + sizeof header;
    for (const auto& f : fields) {
      const std::size_t bytes = shape_count(f.shape) * dtype_size(f.dtype);
      jfields.push_back({{"name", f.name}, {"dtype", f.dtype}, {"shape", f.shape},
                         {"offset", offset}, {"bytes", bytes}});
      for_each_value(trace, f.name, [&](auto v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      });
      offset += bytes;
    }
  } else {
    // One row per draw; matrix fields flattened row-major into columns.
    out << provenance_comment(trace.config_hash) << '\n';
    std::size_t col = 0;
    std::string sep;
    for (const auto& f : fields) {
      const std::size_t per = per_draw(f.shape);
      jfields.push_back({{"name", f.name}, {"dtype", f.dtype}, {"shape", f.shape},
                         {"first_column", col}, {"columns", per}});
      for (std::size_t i = 0; i < per; ++i) {
        out << sep << column_name(f.name, f.shape, i);
        sep = ",";
      }
      col += per;
    }
    out << '\n';
    std::vector<std::vector<std::string>> cells(D);
    for (const auto& f : fields) {
      const std::size_t per = per_draw(f.shape);
      std::size_t k = 0;
      for_each_value(trace, f.name, [&](auto v) {
        std::string s;
        if constexpr (std::is_floating_point_v<decltype(v)>) s = fmt_double(v);
        else s = std::to_string(v);
        cells[k / per].push_back(std::move(s));
        ++k;
      });
    }
    for (const auto& row : cells) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
      out << '\n';
    }
  }
  side["fields"] = jfields;
  out.close();
  if (!out) throw std::runtime_error("error writing '" + (dir / data_name).string() + "'");

  const fs::path side_path = dir / (stem + ".json");
  std::ofstream sj(side_path);
  if (!sj) throw std::runtime_error("cannot write '" + side_path.string() + "'");
  sj << side.dump(2) << '\n';
  return side_path;
}

json read_trace_sidecar(const fs::path& sidecar) {
  std::ifstream in(sidecar);
  if (!in) throw DataError("cannot open trace '" + sidecar.string() + "'");
  json side;
  try {
    side = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("trace sidecar '" + sidecar.string() + "' is not valid JSON: " + e.what());
  }
  if (side.value("schema", "") != "ar1dp-trace")
    throw DataError("'" + sidecar.string() + "' is not an ar1dp trace sidecar");
  if (side.value("schema_version", 0) != kTraceSchemaVersion)
    throw DataError("unsupported trace schema version in '" + sidecar.string() + "'");
  return side;
}

Trace read_trace(const fs::path& sidecar) {
  const json side = read_trace_sidecar(sidecar);
  Trace tr;
  try {
    const auto& dims = side.at("dims");
    const std::size_t D = dims.at("draws").get<std::size_t>();
    tr.T = dims.at("T").get<std::size_t>();
    tr.n = dims.at("n").get<std::size_t>();
    tr.J = dims.at("J").get<std::size_t>();
    tr.p = dims.at("p").get<std::size_t>();
    tr.seed = side.at("seed").get<std::uint64_t>();
    tr.config_hash = side.at("config_hash").get<std::string>();
    const auto& b = side.at("base_measure");
    tr.base = {b.at("mu0").get<double>(), b.at("lambda0").get<double>(), b.at("alpha").get<double>(),
               b.at("beta").get<double>(), b.at("kernel_lambda").get<double>()};

    tr.draws.resize(D);
    for (auto& d : tr.draws) {
      d.alloc = AllocationState(tr.T, tr.n, 0);
      d.comps.assign(tr.J, Component{});
      d.beta = Matrix<double>(tr.T, tr.p, 0.0);
      d.weights = WeightMatrix(tr.T, tr.J, 0.0);
    }

    // Flat per-field values in row-major order across draws.
    std::map<std::string, std::vector<double>> values;
    const fs::path data_path = sidecar.parent_path() / side.at("data_file").get<std::string>();
    const std::string format = side.at("format").get<std::string>();
    if (format == "binary") {
      std::ifstream in(data_path, std::ios::binary);
      if (!in) throw DataError("cannot open trace data '" + data_path.string() + "'");
      char magic[sizeof kMagic];
      in.read(magic, sizeof magic);
      if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw DataError("'" + data_path.string() + "' is not an ar1dp binary trace");
      for (const auto& f : side.at("fields")) {
        const std::string name = f.at("name");
        const std::string dtype = f.at("dtype");
        std::size_t count = 1;
        for (const auto& s : f.at("shape")) count *= s.get<std::size_t>();
        in.seekg(static_cast<std::streamoff>(f.at("offset").get<std::size_t>()));
        auto& v = values[name];
        v.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
          if (dtype == "f64") {
            double x;
            in.read(reinterpret_cast<char*>(&x), sizeof x);
            v[i] = x;
          } else if (dtype == "i32") {
            std::int32_t x;
            in.read(reinterpret_cast<char*>(&x), sizeof x);
            v[i] = x;
          } else {
            std::uint64_t x;
            in.read(reinterpret_cast<char*>(&x), sizeof x);
            v[i] = static_cast<double>(x);
          }
        }
        if (!in) throw DataError("trace data '" + data_path.string() + "' is truncated");
      }
    } else if (format == "csv") {
      const auto rows = read_numeric_csv(data_path);
      if (rows.size() != D) throw DataError("trace CSV row count does not match sidecar");
      for (const auto& f : side.at("fields")) {
        const std::string name = f.at("name");
        const std::size_t first = f.at("first_column").get<std::size_t>();
        const std::size_t cols = f.at("columns").get<std::size_t>();
        auto& v = values[name];
        for (const auto& row : rows) {
          if (row.size() < first + cols) throw DataError("trace CSV row too short");
          v.insert(v.end(), row.begin() + static_cast<std::ptrdiff_t>(first),
                   row.begin() + static_cast<std::ptrdiff_t>(first + cols));
        }
      }
    } else {
      throw DataError("unknown trace format '" + format + "'");
    }

    auto field = [&](const char* name, std::size_t per) -> const std::vector<double>& {
      auto it = values.find(name);
      if (it == values.end() || it->second.size() != per * D)
        throw DataError(std::string("trace field '") + name + "' missing or misshapen");
      return it->second;
    };
    const auto& it_v = field("iteration", 1);
    const auto& psi_v = field("psi", 1);
    const auto& m_v = field("M", 1);
    const auto& s_v = field("s", tr.T * tr.n);
    const auto& mu_v = field("theta_mu", tr.J);
    const auto& tau_v = field("theta_tau", tr.J);
    const auto& beta_v = field("beta", tr.T * tr.p);
    const auto& w_v = field("weights", tr.T * tr.J);
    for (std::size_t k = 0; k < D; ++k) {
      auto& d = tr.draws[k];
      d.iteration = static_cast<std::size_t>(it_v[k]) - 1;
      d.psi = psi_v[k];
      d.mass = m_v[k];
      for (std::size_t i = 0; i < tr.T * tr.n; ++i)
        d.alloc.storage()[i] = static_cast<int>(s_v[k * tr.T * tr.n + i]) - 1;
      for (std::size_t h = 0; h < tr.J; ++h) d.comps[h] = {mu_v[k * tr.J + h], tau_v[k * tr.J + h]};
      std::copy_n(beta_v.begin() + static_cast<std::ptrdiff_t>(k * tr.T * tr.p), tr.T * tr.p,
                  d.beta.storage().begin());
      std::copy_n(w_v.begin() + static_cast<std::ptrdiff_t>(k * tr.T * tr.J), tr.T * tr.J,
                  d.weights.storage().begin());
    }
  } catch (const json::exception& e) {
    throw DataError("malformed trace sidecar '" + sidecar.string() + "': " + e.what());
  }
  return tr;
}

void write_iteration_log(std::ostream& out, const std::vector<IterationLog>& log,
                         const std::string& config_hash) {
  out << provenance_comment(config_hash) << '\n';
  out << "iteration,psi,psi_accepted,psi_acceptance_rate,psi_proposal_sd,M,M_accepted,"
         "M_acceptance_rate\n";
  std::size_t psi_acc = 0;
  std::size_t m_acc = 0;
  for (std::size_t k = 0; k < log.size(); ++k) {
    const auto& e = log[k];
    psi_acc += e.psi_accepted;
    m_acc += e.mass_accepted;
    const double denom = static_cast<double>(k + 1);
    out << e.iteration + 1 << ',' << fmt_double(e.psi) << ',' << int{e.psi_accepted} << ','
        << fmt_double(static_cast<double>(psi_acc) / denom) << ',' << fmt_double(e.psi_proposal_sd)
        << ',' << fmt_double(e.mass) << ',' << int{e.mass_accepted} << ','
        << fmt_double(static_cast<double>(m_acc) / denom) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Summary artifacts

void write_matrix_csv(std::ostream& out, const Matrix<double>& m, const std::string& config_hash) {
  out << provenance_comment(config_hash) << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << fmt_double(m(r, c));
    out << '\n';
  }
}

void write_partition_csv(std::ostream& out, const Dataset* data, const Partition& partition,
                         const std::vector<ClusterSummary>* labels, const std::string& config_hash) {
  out << provenance_comment(config_hash) << '\n';
  out << "unit,cluster,label\n";
  const auto& lab = partition.labels();
  for (std::size_t j = 0; j < lab.size(); ++j) {
    const std::string unit =
        data && j < data->unit_labels.size() ? data->unit_labels[j] : std::to_string(j + 1);
    out << unit << ',' << lab[j] + 1 << ',';
    if (labels) {
      for (const auto& s : *labels)
        if (s.cluster == static_cast<std::size_t>(lab[j])) out << to_string(s.label);
    } else {
      out << "NA";
    }
    out << '\n';
  }
}

void write_density_csv(std::ostream& out, const DensityGrid& grid, const std::string& config_hash) {
  out << provenance_comment(config_hash) << '\n';
  out << "y,density\n";
  for (std::size_t i = 0; i < grid.grid.size(); ++i)
    out << fmt_double(grid.grid[i]) << ',' << fmt_double(grid.values[i]) << '\n';
}

json posterior_summary_json(const PosteriorSummary& s) {
  return {{"mean", s.mean},
          {"median", s.median},
          {"interval95", {s.lower95, s.upper95}},
          {"prob_positive", s.prob_positive}};
}

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (is_comment_or_blank(line)) continue;
    const auto f = split_csv(line);
    std::vector<double> row(f.size());
    bool ok = true;
    for (std::size_t i = 0; i < f.size() && ok; ++i) ok = parse_double(f[i], row[i]);
    if (!ok) {
      if (first) {
        first = false;
        continue;
      }
      throw DataError("'" + path.string() + "': non-numeric row");
    }
    first = false;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ar1dp::io
