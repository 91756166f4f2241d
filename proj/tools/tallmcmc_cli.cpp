// tallmcmc_cli: generate / ingest / run / diagnose / saturation / compare.
// Exit codes: 0 success, 2 usage or invalid configuration, 3 runtime failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tallmcmc/tallmcmc.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace tallmcmc;

namespace {

constexpr int kUsage = 2;
constexpr int kRuntime = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kSamplers{"mh",   "confidence",         "austerity",  "firefly",
                                         "sgld", "delayed_acceptance", "rhee_glynn"};
const std::vector<std::string> kFamilies{"gaussian", "logistic", "gamma"};

std::string joined(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

/// Reads keys of one JSON object; finish() rejects anything not read.
class Fields {
public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw UsageError(where_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw UsageError(where_ + "." + key + ": wrong type");
    }
  }

  template <class T>
  std::optional<T> get_optional(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) return std::nullopt;
    return get<T>(key, T{});
  }

  const json& sub(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return has(key) ? j_.at(key) : empty;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw UsageError(where_ + ": unknown key '" + k + "'");
  }

private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <class F>
void as_usage(F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Run configuration

struct ModelConfig {
  std::string family = "gaussian";
  double kappa = 2.0;
  std::string prior = "flat";
  double prior_scale = 2.5;
  double intercept_scale = 10.0;
  bool first_is_intercept = false;
  double trust_radius = 1.0;

  json to_json() const {
    json j{{"family", family}, {"prior", prior}, {"trust_radius", trust_radius}};
    if (family == "gamma") j["kappa"] = kappa;
    if (prior == "cauchy") {
      j["prior_scale"] = prior_scale;
      j["intercept_scale"] = intercept_scale;
      j["first_is_intercept"] = first_is_intercept;
    }
    return j;
  }

  static ModelConfig from_json(const json& j) {
    Fields f(j, "model");
    ModelConfig m;
    m.family = f.get("family", m.family);
    m.kappa = f.get("kappa", m.kappa);
    m.prior = f.get("prior", m.prior);
    m.prior_scale = f.get("prior_scale", m.prior_scale);
    m.intercept_scale = f.get("intercept_scale", m.intercept_scale);
    m.first_is_intercept = f.get("first_is_intercept", m.first_is_intercept);
    m.trust_radius = f.get("trust_radius", m.trust_radius);
    f.finish();
    m.validate();
    return m;
  }

  void validate() const {
    if (std::find(kFamilies.begin(), kFamilies.end(), family) == kFamilies.end())
      throw UsageError("unknown model family '" + family + "' (valid: " + joined(kFamilies) + ")");
    if (prior != "flat" && prior != "cauchy") throw UsageError("prior must be 'flat' or 'cauchy'");
    if (!(kappa > 0.0)) throw UsageError("model.kappa must be > 0");
    if (!(prior_scale > 0.0) || !(intercept_scale > 0.0)) throw UsageError("prior scales must be > 0");
    if (!(trust_radius > 0.0)) throw UsageError("model.trust_radius must be > 0");
  }

  Model build(const Dataset& data) const {
    const Index dim = family == "gaussian" ? 2 : data.d();
    Prior p = FlatPrior{};
    if (prior == "cauchy") p = CauchyPrior::standard(dim, prior_scale, intercept_scale, first_is_intercept);
    if (family == "gaussian") return Model(GaussianLocationScale{}, p, trust_radius);
    if (family == "logistic") return Model(LogisticRegression{}, p, trust_radius);
    return Model(GammaRegression{kappa}, p, trust_radius);
  }
};

struct ProposalConfig {
  std::optional<double> scale;  // default c / sqrt(n)
  double c = 1.0;
  bool adapt = true;

  json to_json() const {
    json j{{"c", c}, {"adapt", adapt}};
    j["scale"] = scale ? json(*scale) : json(nullptr);
    return j;
  }

  static ProposalConfig from_json(const json& j) {
    Fields f(j, "proposal");
    ProposalConfig p;
    p.scale = f.get_optional<double>("scale");
    p.c = f.get("c", p.c);
    p.adapt = f.get("adapt", p.adapt);
    f.finish();
    if (p.scale && !(*p.scale > 0.0)) throw UsageError("proposal.scale must be > 0");
    if (!(p.c > 0.0)) throw UsageError("proposal.c must be > 0");
    return p;
  }

  ProposalRW build(Index n) const {
    auto p = ProposalRW::for_data_size(n, c, adapt);
    if (scale) p.scale = *scale;
    return p;
  }
};

struct SamplerConfig {
  std::string name = "mh";
  // confidence
  double delta = 0.1;
  double gamma = 1.5;
  std::string scheme = "replace_from_unused";
  std::string proxy = "single";  // none | single | drop
  int alpha = 10;
  // austerity
  double a_eps = 0.05;
  long t_init = 100;
  double growth = 2.0;
  // firefly
  double fraction = 0.1;
  // sgld (0 means: derive from n and the proposal scale)
  long t_sub = 0;
  double eps0 = 0.0;
  double exponent = 1.0 / 3.0;
  bool noise = true;
  // delayed acceptance
  int batches = 10;
  // rhee_glynn
  long rg_t = 100;
  double rg_eps = 1.0;

  json to_json() const {
    json j{{"name", name}};
    if (name == "confidence") {
      j.update({{"delta", delta}, {"gamma", gamma}, {"scheme", scheme}, {"proxy", proxy}, {"alpha", alpha}});
    } else if (name == "austerity") {
      j.update({{"eps", a_eps}, {"t_init", t_init}, {"growth", growth}});
    } else if (name == "firefly") {
      j["fraction"] = fraction;
    } else if (name == "sgld") {
      j.update({{"t_sub", t_sub}, {"eps0", eps0}, {"exponent", exponent}, {"noise", noise}});
    } else if (name == "delayed_acceptance") {
      j["batches"] = batches;
    } else if (name == "rhee_glynn") {
      j.update({{"t", rg_t}, {"eps", rg_eps}});
    }
    return j;
  }

  static SamplerConfig from_json(const json& j) {
    Fields f(j, "sampler");
    SamplerConfig s;
    s.name = f.get("name", s.name);
    if (std::find(kSamplers.begin(), kSamplers.end(), s.name) == kSamplers.end())
      throw UsageError("unknown sampler '" + s.name + "' (valid: " + joined(kSamplers) + ")");
    if (s.name == "confidence") {
      s.delta = f.get("delta", s.delta);
      s.gamma = f.get("gamma", s.gamma);
      s.scheme = f.get("scheme", s.scheme);
      s.proxy = f.get("proxy", s.proxy);
      s.alpha = f.get("alpha", s.alpha);
    } else if (s.name == "austerity") {
      s.a_eps = f.get("eps", s.a_eps);
      s.t_init = f.get("t_init", s.t_init);
      s.growth = f.get("growth", s.growth);
    } else if (s.name == "firefly") {
      s.fraction = f.get("fraction", s.fraction);
    } else if (s.name == "sgld") {
      s.t_sub = f.get("t_sub", s.t_sub);
      s.eps0 = f.get("eps0", s.eps0);
      s.exponent = f.get("exponent", s.exponent);
      s.noise = f.get("noise", s.noise);
    } else if (s.name == "delayed_acceptance") {
      s.batches = f.get("batches", s.batches);
    } else if (s.name == "rhee_glynn") {
      s.rg_t = f.get("t", s.rg_t);
      s.rg_eps = f.get("eps", s.rg_eps);
    }
    f.finish();
    s.validate();
    return s;
  }

  ConfidenceConfig confidence() const {
    ConfidenceConfig c;
    c.delta = delta;
    c.gamma = gamma;
    if (scheme == "replace_from_unused")
      c.scheme = SubsampleScheme::replace_from_unused;
    else if (scheme == "without_replacement")
      c.scheme = SubsampleScheme::without_replacement;
    else
      throw UsageError("sampler.scheme must be 'replace_from_unused' or 'without_replacement'");
    if (proxy == "single")
      c.proxy = ProxyPolicy{ProxyMode::single_at_map, alpha};
    else if (proxy == "drop")
      c.proxy = ProxyPolicy{ProxyMode::drop_every_alpha, alpha};
    else if (proxy != "none")
      throw UsageError("sampler.proxy must be 'none', 'single' or 'drop'");
    return c;
  }

  void validate() const {
    as_usage([&] {
      if (name == "confidence") confidence().validate();
      if (name == "austerity") AusterityConfig{a_eps, t_init, growth}.validate();
      if (name == "firefly") FireflyConfig{fraction}.validate();
      if (name == "sgld") {
        if (t_sub < 0) throw std::invalid_argument("sampler.t_sub must be >= 0");
        if (!(eps0 >= 0.0)) throw std::invalid_argument("sampler.eps0 must be >= 0");
        if (!(exponent >= 0.0)) throw std::invalid_argument("sampler.exponent must be >= 0");
      }
      if (name == "delayed_acceptance" && batches < 1) throw std::invalid_argument("sampler.batches must be >= 1");
      if (name == "rhee_glynn") RheeGlynnConfig{rg_t, rg_eps}.validate();
    });
  }
};

struct RunConfig {
  fs::path data;
  ModelConfig model;
  SamplerConfig sampler;
  ProposalConfig proposal;
  long n_iter = 1000;
  std::uint64_t seed = 1;
  std::uint64_t chain = 0;
  std::optional<std::vector<double>> theta0;  // default: the MAP
  fs::path out = ".";
  std::string name = "trace";

  json to_json() const {
    json j{{"data", data.string()},
           {"model", model.to_json()},
           {"sampler", sampler.to_json()},
           {"proposal", proposal.to_json()},
           {"n_iter", n_iter},
           {"seed", seed},
           {"chain", chain},
           {"out", out.string()},
           {"name", name}};
    j["theta0"] = theta0 ? json(*theta0) : json(nullptr);
    return j;
  }

  /// Accepts a bare config or a trace sidecar {"config": ..., "result": ...}.
  static RunConfig from_json(const json& doc) {
    const bool sidecar = doc.is_object() && doc.contains("config") && doc.contains("result");
    const json& j = sidecar ? doc.at("config") : doc;
    if (sidecar)
      for (const auto& [k, v] : doc.items())
        if (k != "config" && k != "result") throw UsageError("sidecar: unknown key '" + k + "'");
    Fields f(j, "config");
    RunConfig c;
    c.data = f.get<std::string>("data", "");
    c.model = ModelConfig::from_json(f.sub("model"));
    c.sampler = SamplerConfig::from_json(f.sub("sampler"));
    c.proposal = ProposalConfig::from_json(f.sub("proposal"));
    c.n_iter = f.get("n_iter", c.n_iter);
    c.seed = f.get("seed", c.seed);
    c.chain = f.get("chain", c.chain);
    c.theta0 = f.get_optional<std::vector<double>>("theta0");
    c.out = f.get<std::string>("out", c.out.string());
    c.name = f.get("name", c.name);
    f.finish();
    return c;
  }

  void validate() const {
    if (data.empty()) throw UsageError("no dataset given (config 'data' or --data)");
    if (!fs::exists(data)) throw UsageError("dataset '" + data.string() + "' does not exist");
    if (n_iter < 1) throw UsageError("n_iter must be >= 1");
    if (name.empty() || name.find('/') != std::string::npos) throw UsageError("name must be a plain file stem");
    model.validate();
    sampler.validate();
  }
};

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw UsageError("cannot open config '" + p.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config '" + p.string() + "': " + e.what());
  }
}

Theta map_start(const ModelConfig& mc, const Model& model, const Dataset& data) {
  Theta init = Theta::Zero(model.dim(data));
  if (mc.family == "gamma" && (data.features().col(0).array() == 1.0).all())
    init[0] = std::log(data.response().mean());
  return init;
}

struct RunOutcome {
  ChainTrace trace;
  Theta start;
  std::optional<MapResult> map;
};

RunOutcome execute(const RunConfig& cfg) {
  const auto stored = read_dataset(cfg.data);
  const Dataset& data = stored.data;
  const Index n = data.n();
  const Model model = cfg.model.build(data);
  model.check(data);

  RunOutcome r;
  if (cfg.theta0) {
    r.start = Eigen::Map<const Eigen::VectorXd>(cfg.theta0->data(), static_cast<Index>(cfg.theta0->size()));
  } else {
    r.map = find_map(model, data, map_start(cfg.model, model, data));
    if (!r.map->converged) std::cerr << "warning: MAP search did not converge; starting from its last iterate\n";
    r.start = r.map->theta;
  }
  model.check_theta(data, r.start);

  const auto prop = cfg.proposal.build(n);
  const auto& s = cfg.sampler;
  const auto seed = cfg.seed;
  const auto chain = cfg.chain;
  if (s.name == "mh") {
    r.trace = mh_run(model, data, prop, r.start, cfg.n_iter, seed, chain);
  } else if (s.name == "confidence") {
    r.trace = confidence_run(model, data, s.confidence(), prop, r.start, cfg.n_iter, seed, chain);
  } else if (s.name == "austerity") {
    r.trace = austerity_run(model, data, AusterityConfig{s.a_eps, s.t_init, s.growth}, prop, r.start, cfg.n_iter,
                            seed, chain);
  } else if (s.name == "firefly") {
    EvalCounter setup;
    const auto bounds = build_proxy(model, data, r.start, {}, &setup);
    r.trace = firefly_run(model, data, bounds, FireflyConfig{s.fraction}, prop, r.start, cfg.n_iter, seed, chain);
  } else if (s.name == "sgld") {
    const Index t_sub = s.t_sub > 0 ? s.t_sub : std::max<Index>(1, n / 10);
    const StepSchedule sched = s.eps0 > 0.0 ? StepSchedule{s.eps0, s.exponent}
                                            : StepSchedule::matching_rw_scale(prop.scale, s.exponent);
    r.trace = sgld_run(model, data, SgldConfig{t_sub, sched, s.noise}, r.start, cfg.n_iter, seed, chain);
  } else if (s.name == "delayed_acceptance") {
    r.trace = delayed_acceptance_run(model, data, s.batches, prop, r.start, cfg.n_iter, seed, chain);
  } else {
    r.trace = rhee_glynn_pm_run(model, data, RheeGlynnConfig{s.rg_t, s.rg_eps}, prop, r.start, cfg.n_iter, seed,
                                chain);
  }
  return r;
}

json theta_json(const Theta& t) { return std::vector<double>(t.data(), t.data() + t.size()); }

fs::path sidecar_of(const fs::path& trace_csv) {
  auto p = trace_csv;
  return p.replace_extension(".json");
}

void write_run(const RunConfig& cfg, const RunOutcome& r) {
  fs::create_directories(cfg.out);
  const auto csv = cfg.out / (cfg.name + ".csv");
  write_trace_csv(csv, r.trace);
  json result{{"sampler_tag", r.trace.sampler_tag},
              {"n_data", r.trace.n_data},
              {"iterations", r.trace.size()},
              {"acceptance_rate", r.trace.acceptance_rate()},
              {"setup_evals", r.trace.setup_evals},
              {"total_evals", r.trace.total_evals()},
              {"bounded_evals", r.trace.bounded_evals},
              {"start", theta_json(r.start)}};
  if (r.map) {
    result["map"] = theta_json(r.map->theta);
    result["map_converged"] = r.map->converged;
  }
  if (r.trace.size() > 0) {
    const auto e = eval_summary(r.trace);
    result["mean_fraction"] = e.mean_fraction;
    result["median_fraction"] = e.median_fraction;
  }
  std::ofstream js(sidecar_of(csv));
  js << json{{"config", cfg.to_json()}, {"result", result}}.dump(2) << '\n';
  if (!js) throw IoError("write failed on '" + sidecar_of(csv).string() + "'");
  std::cout << csv.string() << ": " << r.trace.size() << " iterations, acceptance " << std::setprecision(4)
            << r.trace.acceptance_rate() << ", mean L/n " << result.value("mean_fraction", 0.0) << ", median L/n "
            << result.value("median_fraction", 0.0) << '\n';
}

// ---------------------------------------------------------------------------
// Trace loading for diagnose / compare

struct LoadedTrace {
  fs::path path;
  ChainTrace trace;
};

LoadedTrace load_trace(const fs::path& p) {
  if (!fs::exists(p)) throw IoError("trace '" + p.string() + "' does not exist");
  LoadedTrace t{p, read_trace_csv(p)};
  const auto side = sidecar_of(p);
  if (fs::exists(side)) {
    std::ifstream in(side);
    try {
      const auto j = json::parse(in);
      t.trace.n_data = j.at("result").at("n_data").get<Index>();
      t.trace.sampler_tag = j.at("result").value("sampler_tag", "");
    } catch (const json::exception& e) {
      throw IoError("trace metadata '" + side.string() + "': " + e.what());
    }
  }
  if (t.trace.size() == 0) throw IoError("trace '" + p.string() + "' has no iterations");
  return t;
}

std::string stem_of(const fs::path& p) { return p.stem().string(); }

void write_comparison_csv(const fs::path& path, const std::vector<MarginalComparison>& cmp) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create '" + path.string() + "'");
  out << "coordinate,mean_a,mean_b,mean_diff,sd_a,sd_b,sd_diff,mcse_a,mcse_b,wasserstein\n" << std::setprecision(10);
  for (std::size_t j = 0; j < cmp.size(); ++j) {
    const auto& c = cmp[j];
    out << j << ',' << c.mean_a << ',' << c.mean_b << ',' << c.mean_diff << ',' << c.sd_a << ',' << c.sd_b << ','
        << c.sd_diff << ',' << c.mcse_a << ',' << c.mcse_b << ',' << c.wasserstein << '\n';
  }
}

// ---------------------------------------------------------------------------
// Subcommands

struct GenerateArgs {
  std::string kind;
  Index n = 1000;
  std::uint64_t seed = 0;
  Index d = 2;
  double separation = 1.0;
  double kappa = 2.0;
  std::vector<double> theta_true;
  std::string out;
};

int cmd_generate(const GenerateArgs& a) {
  SyntheticSpec s;
  s.kind = synthetic_kind_from_string(a.kind);
  s.n = a.n;
  s.seed = a.seed;
  s.d = a.d;
  s.separation = a.separation;
  s.kappa = a.kappa;
  s.theta_true = a.theta_true;
  as_usage([&] { s.validate(); });
  const auto data = generate(s);
  auto meta = DatasetMeta::plain(data, std::string("synthetic:") + to_string(s.kind) + ":seed=" + std::to_string(a.seed));
  if (s.kind == SyntheticKind::gamma_from_covariates) {
    meta.intercept = true;
    meta.column_names[0] = "intercept";
  }
  write_dataset(a.out, data, meta);
  std::cout << a.out << ": n=" << data.n() << " d=" << data.d() << '\n';
  return 0;
}

struct IngestArgs {
  std::string csv, out;
  bool no_standardize = false, intercept = false, header = false;
  std::string delimiter = ",";
  std::vector<std::string> roles;
  std::string last_column = "label";
  Index subset_n = 0;
  std::uint64_t subset_seed = 0;
};

int cmd_ingest(const IngestArgs& a) {
  PreprocessSpec spec;
  spec.standardize = !a.no_standardize;
  spec.add_intercept = a.intercept;
  spec.header = a.header;
  if (a.delimiter.size() != 1) throw UsageError("--delimiter must be one character");
  spec.delimiter = a.delimiter[0];
  spec.column_roles = a.roles;
  spec.last_column = a.last_column == "response" ? ResponseKind::continuous
                     : a.last_column == "none"   ? ResponseKind::none
                                                 : ResponseKind::label;
  IngestResult r;
  as_usage([&] { r = ingest_csv(a.csv, spec); });
  for (const auto& note : r.notes) std::cout << "note: " << note << '\n';
  Dataset data = std::move(r.data);
  if (a.subset_n > 0) {
    as_usage([&] { data = subset(data, a.subset_n, a.subset_seed); });
    r.meta.source += ":subset=" + std::to_string(a.subset_n) + ":seed=" + std::to_string(a.subset_seed);
  }
  write_dataset(a.out, data, r.meta);
  std::cout << a.out << ": n=" << data.n() << " d=" << data.d() << '\n';
  return 0;
}

struct RunArgs {
  std::string config;
  std::string data, model, sampler, out, name, proxy;
  std::optional<long> n_iter;
  std::optional<std::uint64_t> seed, chain;
  std::optional<double> delta, scale;
  std::optional<int> alpha;
  int chains = 1;
};

int cmd_run(const RunArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : RunConfig::from_json(read_json_file(a.config));
  if (!a.data.empty()) cfg.data = a.data;
  if (!a.model.empty()) cfg.model.family = a.model;
  if (!a.sampler.empty() && a.sampler != cfg.sampler.name) {
    if (std::find(kSamplers.begin(), kSamplers.end(), a.sampler) == kSamplers.end())
      throw UsageError("unknown sampler '" + a.sampler + "' (valid: " + joined(kSamplers) + ")");
    cfg.sampler = SamplerConfig{};
    cfg.sampler.name = a.sampler;
  }
  if (!a.out.empty()) cfg.out = a.out;
  if (!a.name.empty()) cfg.name = a.name;
  if (a.n_iter) cfg.n_iter = *a.n_iter;
  if (a.seed) cfg.seed = *a.seed;
  if (a.chain) cfg.chain = *a.chain;
  if (a.scale) cfg.proposal.scale = *a.scale;
  if (a.delta || a.alpha || !a.proxy.empty()) {
    if (cfg.sampler.name != "confidence") throw UsageError("--delta, --alpha and --proxy apply to the confidence sampler");
    if (a.delta) cfg.sampler.delta = *a.delta;
    if (a.alpha) cfg.sampler.alpha = *a.alpha;
    if (!a.proxy.empty()) cfg.sampler.proxy = a.proxy;
  }
  if (a.chains < 1) throw UsageError("--chains must be >= 1");
  cfg.validate();

  for (int k = 0; k < a.chains; ++k) {
    RunConfig c = cfg;
    if (a.chains > 1) {
      c.chain = cfg.chain + static_cast<std::uint64_t>(k);
      c.name = cfg.name + "_c" + std::to_string(c.chain);
    }
    write_run(c, execute(c));
  }
  return 0;
}

struct DiagnoseArgs {
  std::vector<std::string> traces;
  std::string reference, out = ".";
  std::size_t burn_in = 0, max_lag = 200, bins = 40;
};

int cmd_diagnose(const DiagnoseArgs& a) {
  std::vector<LoadedTrace> ts;
  for (const auto& p : a.traces) ts.push_back(load_trace(p));
  const Index dim = ts.front().trace.dim();
  for (const auto& t : ts)
    if (t.trace.dim() != dim) throw IoError("trace '" + t.path.string() + "' has a different dimension");
  for (const auto& t : ts)
    if (t.trace.size() <= a.burn_in) throw UsageError("burn-in exceeds the length of '" + t.path.string() + "'");
  fs::create_directories(a.out);
  const fs::path out = a.out;

  json report{{"traces", json::array()}, {"notes", json::array()}};
  std::ofstream summary(out / "summary.csv");
  if (!summary) throw IoError("cannot create '" + (out / "summary.csv").string() + "'");
  summary << "trace,coordinate,mean,sd,mcse,acceptance_rate,mean_fraction,median_fraction\n" << std::setprecision(10);

  for (const auto& t : ts) {
    const auto stem = stem_of(t.path);
    json tj{{"path", t.path.string()}, {"iterations", t.trace.size()}, {"acceptance_rate", t.trace.acceptance_rate()}};
    std::optional<EvalSummary> es;
    if (t.trace.n_data > 0) {
      es = eval_summary(t.trace);
      tj["mean_fraction"] = es->mean_fraction;
      tj["median_fraction"] = es->median_fraction;
      tj["fraction_quantiles"] = es->quantiles;
      write_histogram_csv(out / ("eval_hist_" + stem + ".csv"), histogram(eval_fractions(t.trace), a.bins, 0.0, 2.0));
    } else {
      report["notes"].push_back("no metadata for '" + t.path.string() + "': evaluation summary skipped");
    }
    std::vector<std::string> names;
    std::vector<Autocorrelation> acfs;
    for (Index j = 0; j < dim; ++j) {
      const auto [x, w] = trace_marginal(t.trace, j, a.burn_in);
      const auto m = weighted_moments(x, w);
      const double se = batch_means_se(x);
      summary << t.path.string() << ',' << j << ',' << m.mean << ',' << m.sd << ',' << se << ','
              << t.trace.acceptance_rate() << ',';
      if (es) summary << es->mean_fraction << ',' << es->median_fraction;
      else summary << ',';
      summary << '\n';
      names.push_back("theta_" + std::to_string(j));
      acfs.push_back(autocorrelation(x, a.max_lag));
    }
    write_autocorrelation_csv(out / ("acf_" + stem + ".csv"), names, acfs);
    report["traces"].push_back(tj);
  }

  if (ts.size() >= 2) {
    std::ofstream gr(out / "gelman_rubin.csv");
    gr << "coordinate,rhat\n" << std::setprecision(10);
    json rh = json::array();
    for (Index j = 0; j < dim; ++j) {
      std::vector<std::vector<double>> chains;
      for (const auto& t : ts) chains.push_back(trace_marginal(t.trace, j, a.burn_in).first);
      const double r = gelman_rubin(chains);
      gr << j << ',' << r << '\n';
      rh.push_back(r);
      std::cout << "R-hat theta_" << j << ": " << r << '\n';
    }
    report["gelman_rubin"] = rh;
  } else {
    const std::string note = "Gelman-Rubin skipped: needs at least 2 chains";
    report["notes"].push_back(note);
    std::cout << "note: " << note << '\n';
  }

  if (!a.reference.empty()) {
    const auto ref = load_trace(a.reference);
    for (const auto& t : ts) {
      const auto cmp = compare_posteriors(t.trace, ref.trace, a.burn_in, a.burn_in);
      write_comparison_csv(out / ("compare_" + stem_of(t.path) + ".csv"), cmp);
    }
  }

  std::ofstream rj(out / "report.json");
  rj << report.dump(2) << '\n';
  for (const auto& t : report["traces"])
    std::cout << t["path"].get<std::string>() << ": acceptance " << t["acceptance_rate"].get<double>() << '\n';
  return 0;
}

struct SaturationArgs {
  std::string kind = "logistic_two_gaussians";
  std::vector<Index> n_list;
  long n_iter = 1000;
  std::uint64_t seed = 1;
  double delta = 0.1;
  std::string proxy = "single";
  int alpha = 10;
  Index d = 2;
  double separation = 1.0;
  std::string out;
};

int cmd_saturation(const SaturationArgs& a) {
  if (a.n_list.empty()) throw UsageError("--n-list is empty");
  for (Index n : a.n_list)
    if (n < 10) throw UsageError("n = " + std::to_string(n) + " is below 10: the concentration bound is degenerate");
  if (a.n_iter < 1) throw UsageError("--n-iter must be >= 1");
  SamplerConfig sc;
  sc.name = "confidence";
  sc.delta = a.delta;
  sc.proxy = a.proxy;
  sc.alpha = a.alpha;
  sc.validate();
  const auto kind = synthetic_kind_from_string(a.kind);
  if (kind != SyntheticKind::gaussian_1d && kind != SyntheticKind::logistic_two_gaussians)
    throw UsageError("saturation supports gaussian_1d and logistic_two_gaussians");

  std::ostringstream table;
  table << "n,median_L,median_log10_fraction,mean_log10_fraction,mean_fraction,acceptance_rate\n"
        << std::setprecision(8);
  for (Index n : a.n_list) {
    SyntheticSpec s;
    s.kind = kind;
    s.n = n;
    s.seed = a.seed;
    s.d = a.d;
    s.separation = a.separation;
    const auto data = generate(s);
    const Model model = kind == SyntheticKind::gaussian_1d ? Model(GaussianLocationScale{})
                                                           : Model(LogisticRegression{}, CauchyPrior::standard(a.d));
    const Theta map = find_map(model, data, Theta::Zero(model.dim(data))).theta;
    const auto tr =
        confidence_run(model, data, sc.confidence(), ProposalRW::for_data_size(n), map, a.n_iter, a.seed);
    std::vector<double> lf;
    for (auto l : tr.evals) lf.push_back(std::log10(static_cast<double>(l) / static_cast<double>(n)));
    double mean_lf = 0.0;
    for (double v : lf) mean_lf += v / static_cast<double>(lf.size());
    std::sort(lf.begin(), lf.end());
    const auto e = eval_summary(tr);
    table << n << ',' << e.median_evals << ',' << quantile_sorted(lf, 0.5) << ',' << mean_lf << ','
          << e.mean_fraction << ',' << tr.acceptance_rate() << '\n';
  }
  std::cout << table.str();
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    f << table.str();
    if (!f) throw IoError("write failed on '" + a.out + "'");
  }
  return 0;
}

struct CompareArgs {
  std::string a, b, out;
  std::size_t burn_in = 0;
};

int cmd_compare(const CompareArgs& c) {
  const auto ta = load_trace(c.a), tb = load_trace(c.b);
  const auto cmp = compare_posteriors(ta.trace, tb.trace, c.burn_in, c.burn_in);
  if (!c.out.empty()) write_comparison_csv(c.out, cmp);
  std::cout << std::setprecision(6);
  for (std::size_t j = 0; j < cmp.size(); ++j)
    std::cout << "theta_" << j << ": mean diff " << cmp[j].mean_diff << " (mcse " << cmp[j].mcse_a << ", "
              << cmp[j].mcse_b << "), sd diff " << cmp[j].sd_diff << ", W1 " << cmp[j].wasserstein << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subsampling MCMC for tall data"};
  app.require_subcommand(1);

  std::vector<std::string> kinds{"gaussian_1d", "lognormal_1d", "logistic_two_gaussians", "gamma_from_covariates"};

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  gen->add_option("--kind", ga.kind, "Synthetic family")->required()->check(CLI::IsMember(kinds));
  gen->add_option("--n", ga.n, "Number of records")->check(CLI::PositiveNumber);
  gen->add_option("--seed", ga.seed, "Seed");
  gen->add_option("--d", ga.d, "Feature dimension (logistic) or dimension with intercept (gamma)");
  gen->add_option("--separation", ga.separation, "Logistic class centres at +-separation");
  gen->add_option("--kappa", ga.kappa, "Gamma shape");
  gen->add_option("--theta-true", ga.theta_true, "Gamma coefficients")->delimiter(',');
  gen->add_option("--out", ga.out, "Dataset store path")->required();

  IngestArgs ia;
  auto* ing = app.add_subcommand("ingest", "Convert a delimited text file into a dataset store");
  ing->add_option("--csv", ia.csv, "Input file")->required();
  ing->add_option("--out", ia.out, "Dataset store path")->required();
  ing->add_flag("--no-standardize", ia.no_standardize, "Keep raw feature scales");
  ing->add_flag("--intercept", ia.intercept, "Prepend a constant column");
  ing->add_flag("--header", ia.header, "First line holds column names");
  ing->add_option("--delimiter", ia.delimiter, "Field separator");
  ing->add_option("--roles", ia.roles, "Per-column role: feature, label, response, ignore")->delimiter(',');
  ing->add_option("--last-column", ia.last_column, "Role of the last column when --roles is absent")
      ->check(CLI::IsMember({"label", "response", "none"}));
  ing->add_option("--subset", ia.subset_n, "Keep a uniform random subset of this size");
  ing->add_option("--subset-seed", ia.subset_seed, "Seed for --subset");

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Run a sampler; flags override the config file");
  run->add_option("--config", ra.config, "JSON run config or a trace sidecar");
  run->add_option("--data", ra.data, "Dataset store");
  run->add_option("--model", ra.model, "gaussian, logistic or gamma");
  run->add_option("--sampler", ra.sampler, "One of: " + joined(kSamplers));
  run->add_option("--n-iter", ra.n_iter, "Iterations");
  run->add_option("--seed", ra.seed, "Seed");
  run->add_option("--chain", ra.chain, "Chain index (first chain when --chains > 1)");
  run->add_option("--chains", ra.chains, "Independent chains to run");
  run->add_option("--out", ra.out, "Output directory");
  run->add_option("--name", ra.name, "Trace file stem");
  run->add_option("--scale", ra.scale, "Random-walk scale");
  run->add_option("--delta", ra.delta, "Confidence level parameter");
  run->add_option("--proxy", ra.proxy, "none, single or drop");
  run->add_option("--alpha", ra.alpha, "Proxy refresh period");

  DiagnoseArgs da;
  auto* dia = app.add_subcommand("diagnose", "Autocorrelation, R-hat, evaluation summaries");
  dia->add_option("traces", da.traces, "Trace CSV files")->required();
  dia->add_option("--reference", da.reference, "Reference trace for posterior comparisons");
  dia->add_option("--out", da.out, "Report directory");
  dia->add_option("--burn-in", da.burn_in, "Iterations to drop");
  dia->add_option("--max-lag", da.max_lag, "Autocorrelation lags");
  dia->add_option("--bins", da.bins, "Histogram bins for L/n")->check(CLI::PositiveNumber);

  SaturationArgs sa;
  auto* sat = app.add_subcommand("saturation", "Confidence sampler cost across dataset sizes");
  sat->add_option("--kind", sa.kind, "gaussian_1d or logistic_two_gaussians")->check(CLI::IsMember(kinds));
  sat->add_option("--n-list", sa.n_list, "Dataset sizes")->required()->delimiter(',');
  sat->add_option("--n-iter", sa.n_iter, "Iterations per size");
  sat->add_option("--seed", sa.seed, "Seed");
  sat->add_option("--delta", sa.delta, "Confidence level parameter");
  sat->add_option("--proxy", sa.proxy, "none, single or drop");
  sat->add_option("--alpha", sa.alpha, "Proxy refresh period");
  sat->add_option("--d", sa.d, "Logistic feature dimension");
  sat->add_option("--separation", sa.separation, "Logistic class separation");
  sat->add_option("--out", sa.out, "CSV table path");

  CompareArgs ca;
  auto* cmp = app.add_subcommand("compare", "Marginal comparison of two traces");
  cmp->add_option("a", ca.a, "First trace")->required();
  cmp->add_option("b", ca.b, "Second trace")->required();
  cmp->add_option("--burn-in", ca.burn_in, "Iterations to drop from both");
  cmp->add_option("--out", ca.out, "CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*gen) return cmd_generate(ga);
    if (*ing) return cmd_ingest(ia);
    if (*run) return cmd_run(ra);
    if (*dia) return cmd_diagnose(da);
    if (*sat) return cmd_saturation(sa);
    if (*cmp) return cmd_compare(ca);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
