#include "bomi/cli/config.hpp"

#include <set>

#include <toml.hpp>

#include "bomi/csv.hpp"

namespace bomi::cli {
namespace {

nlohmann::ordered_json Points(const std::vector<VectorXd>& pts) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const VectorXd& p : pts) out.push_back(std::vector<double>(p.data(), p.data() + p.size()));
  return out;
}

const char* SchemeName(MappingScheme s) {
  return s == MappingScheme::kRandomized ? "randomized" : "leading";
}

// Reads typed keys from one TOML table and rejects keys nobody asked for.
class Section {
 public:
  Section(const toml::table& root, std::string name, const std::string& source)
      : name_(std::move(name)), source_(source) {
    if (name_.empty()) {
      table_ = &root;
    } else if (const toml::node* n = root.get(name_)) {
      table_ = n->as_table();
      if (!table_) Fail("", "must be a table");
    }
  }

  void Get(const char* key, double& out) {
    if (const toml::node* n = Find(key)) {
      auto v = n->value<double>();
      if (!v) Fail(key, "expected a number");
      out = *v;
    }
  }
  void Get(const char* key, int& out) {
    if (const toml::node* n = Find(key)) {
      auto v = n->value<std::int64_t>();
      if (!v || !n->is_integer()) Fail(key, "expected an integer");
      out = static_cast<int>(*v);
    }
  }
  void Get(const char* key, Eigen::Index& out) {
    int v = static_cast<int>(out);
    Get(key, v);
    out = v;
  }
  void Get(const char* key, unsigned& out) {
    int v = static_cast<int>(out);
    Get(key, v);
    if (v < 0) Fail(key, "must be >= 0");
    out = static_cast<unsigned>(v);
  }
  void Get(const char* key, std::uint64_t& out) {
    if (const toml::node* n = Find(key)) {
      auto v = n->value<std::int64_t>();
      if (!v || !n->is_integer() || *v < 0) Fail(key, "expected a non-negative integer");
      out = static_cast<std::uint64_t>(*v);
    }
  }
  void Get(const char* key, std::optional<std::uint64_t>& out) {
    if (Find(key)) {
      std::uint64_t v = 0;
      used_.erase(key);
      Get(key, v);
      out = v;
    }
  }
  void Get(const char* key, std::string& out) {
    if (const toml::node* n = Find(key)) {
      auto v = n->value<std::string>();
      if (!v) Fail(key, "expected a string");
      out = *v;
    }
  }
  void Get(const char* key, bool& out) {
    if (const toml::node* n = Find(key)) {
      auto v = n->value<bool>();
      if (!v) Fail(key, "expected true or false");
      out = *v;
    }
  }
  void Get(const char* key, std::vector<double>& out) {
    if (const toml::node* n = Find(key)) out = Numbers(key, *n);
  }
  void Get(const char* key, std::optional<std::vector<double>>& out) {
    if (const toml::node* n = Find(key)) out = Numbers(key, *n);
  }
  void Get(const char* key, std::vector<int>& out) {
    if (const toml::node* n = Find(key)) {
      out.clear();
      for (double v : Numbers(key, *n)) out.push_back(static_cast<int>(v));
    }
  }
  void Get(const char* key, VectorXd& out) {
    if (const toml::node* n = Find(key)) {
      const auto v = Numbers(key, *n);
      out = Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
  }
  void Get(const char* key, std::vector<VectorXd>& out) {
    if (const toml::node* n = Find(key)) {
      const toml::array* arr = n->as_array();
      if (!arr) Fail(key, "expected an array of points");
      out.clear();
      for (const toml::node& p : *arr) {
        const auto v = Numbers(key, p);
        out.push_back(Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
      }
    }
  }

  void Finish(const std::set<std::string>& subtables = {}) const {
    if (!table_) return;
    for (auto&& [key, node] : *table_) {
      const std::string k(key.str());
      if (!used_.count(k) && !subtables.count(k)) Fail(k.c_str(), "unknown key");
    }
  }

 private:
  const toml::node* Find(const char* key) {
    if (!table_) return nullptr;
    const toml::node* n = table_->get(key);
    if (n) used_.insert(key);
    return n;
  }

  std::vector<double> Numbers(const char* key, const toml::node& n) const {
    const toml::array* arr = n.as_array();
    if (!arr) Fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const toml::node& e : *arr) {
      auto v = e.value<double>();
      if (!v) Fail(key, "expected an array of numbers");
      out.push_back(*v);
    }
    return out;
  }

  [[noreturn]] void Fail(const std::string& key, const std::string& what) const {
    std::string where = name_.empty() ? key : name_ + (key.empty() ? "" : "." + key);
    throw InvalidConfig(source_ + ": " + where + ": " + what);
  }

  std::string name_;
  std::string source_;
  const toml::table* table_ = nullptr;
  std::set<std::string> used_;
};

}  // namespace

RunConfig RunConfig::Defaults() { return RunConfig{}; }

void RunConfig::Resolve() {
  experiment.seed = seed;
  model.noise.seed = noise_seed.value_or(seed);
  const int sessions = experiment.n_sessions;
  if (sessions < 1) throw InvalidConfig("experiment.sessions must be >= 1");
  experiment.k_p_schedule =
      k_p_schedule ? *k_p_schedule
                   : ExperimentConfig::GeometricSchedule(model.k_p, k_p_ratio, sessions);
  if (k_p_schedule && !k_p_schedule->empty()) model.k_p = k_p_schedule->front();
  model.noise.s_session =
      noise_schedule ? *noise_schedule
                     : NoiseSchedule::Geometric(noise_first, noise_ratio, sessions).s_session;
  if (static_cast<int>(model.noise.s_session.size()) < sessions) {
    throw InvalidConfig("noise.schedule needs one entry per session");
  }

  experiment.Validate();
  model.Validate();
  fit.search.Validate();
  if (fit.eta_source != "fit" && fit.eta_source != "config") {
    throw InvalidConfig("fit.eta_source must be \"fit\" or \"config\"");
  }
  if (fit.smoothing_window < 1) throw InvalidConfig("fit.smoothing_window must be >= 1");
  const VerifyOptions& v = verify;
  if (v.reduced_runs < 1 || !(v.reduced_horizon > 0) || !(v.reduced_step > 0) ||
      !(v.boundary_horizon > 0) || !(v.boundary_step > 0) || !(v.pe_window > 0) ||
      !(v.scan_sigma > 0) || !(v.scan.dt > 0) || !(v.scan.horizon > 0) ||
      v.scan.seeds < 1 || !(v.scan.tail_fraction > 0 && v.scan.tail_fraction < 1)) {
    throw InvalidConfig("verify options must be positive");
  }
  for (int s : plot.sessions) {
    if (s < 1) throw InvalidConfig("plot.sessions entries are 1-based");
  }
  if (posture.synergies < static_cast<Eigen::Index>(mapping.outputs)) {
    throw InvalidConfig("posture.synergies must be >= mapping.outputs");
  }
  if (mapping.outputs != experiment.start_position.size()) {
    throw InvalidConfig("mapping.outputs must match the target dimension");
  }
}

nlohmann::ordered_json RunConfig::ToJson() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["noise_seed"] = model.noise.seed;
  j["quick"] = quick;
  auto& e = j["experiment"];
  e["sessions"] = experiment.n_sessions;
  e["trials_per_session"] = experiment.trials_per_session;
  e["targets"] = Points(experiment.targets);
  e["start_position"] = Points({experiment.start_position}).front();
  e["stop_radius"] = experiment.stop_radius;
  e["trial_timeout"] = experiment.trial_timeout;
  e["sim_rate"] = experiment.sim_rate;
  e["record_rate"] = experiment.record_rate;
  e["k_p_ratio"] = k_p_ratio;
  e["k_p_schedule"] = experiment.k_p_schedule;
  e["w_hat_init_std"] = experiment.w_hat_init_std;
  auto& m = j["model"];
  m["gamma"] = model.gamma;
  m["eta"] = model.eta;
  m["mu"] = model.mu;
  m["k_p"] = model.k_p;
  m["a"] = model.a;
  m["time_unit"] = model.time_unit;
  auto& n = j["noise"];
  n["first"] = noise_first;
  n["ratio"] = noise_ratio;
  n["schedule"] = model.noise.s_session;
  n["decay_rate"] = model.noise.decay_rate;
  n["floor"] = model.noise.floor;
  auto& p = j["posture"];
  p["csv"] = posture.csv;
  p["rate_hz"] = posture.model.rate_hz;
  p["joints"] = posture.model.joints;
  p["latent_dim"] = posture.model.latent_dim;
  p["samples"] = posture.model.samples;
  p["seed"] = posture.model.seed;
  p["noise_floor"] = posture.model.noise_floor;
  p["synergies"] = posture.synergies;
  auto& mp = j["mapping"];
  mp["scheme"] = SchemeName(mapping.scheme);
  mp["outputs"] = mapping.outputs;
  mp["scale"] = mapping.scale;
  mp["seed"] = mapping.seed;
  auto& f = j["fit"];
  f["reference"] = fit.reference;
  f["gamma_lo"] = fit.search.lo;
  f["gamma_hi"] = fit.search.hi;
  f["coarse_step"] = fit.search.coarse_step;
  f["fine_step"] = fit.search.fine_step;
  f["fine_halfwidth"] = fit.search.fine_halfwidth;
  f["eta_source"] = fit.eta_source;
  f["smoothing_window"] = fit.smoothing_window;
  auto& v = j["verify"];
  v["reduced_runs"] = verify.reduced_runs;
  v["reduced_horizon"] = verify.reduced_horizon;
  v["reduced_step"] = verify.reduced_step;
  v["reduced_tolerance"] = verify.reduced_tolerance;
  v["boundary_horizon"] = verify.boundary_horizon;
  v["boundary_step"] = verify.boundary_step;
  v["boundary_amplitude"] = verify.boundary_amplitude;
  v["boundary_frequency"] = verify.boundary_frequency;
  v["pe_window"] = verify.pe_window;
  v["pe_threshold"] = verify.pe_threshold;
  v["scan_sigma"] = verify.scan_sigma;
  v["sweep_gamma_factors"] = verify.sweep_gamma_factors;
  v["scan_dt"] = verify.scan.dt;
  v["scan_horizon"] = verify.scan.horizon;
  v["scan_max_horizon"] = verify.scan.max_horizon;
  v["scan_tail_fraction"] = verify.scan.tail_fraction;
  v["scan_steady_tolerance"] = verify.scan.steady_tolerance;
  v["scan_seeds"] = verify.scan.seeds;
  v["scan_seed"] = verify.scan.seed;
  v["scan_w_tilde0"] = verify.scan.w_tilde0;
  v["scan_e0"] = verify.scan.e0;
  v["zero_noise_tolerance"] = verify.zero_noise_tolerance;
  j["plot"]["sessions"] = plot.sessions;
  return j;
}

std::string RunConfig::Hash() const { return HexDigest(Fnv1a(ToJson().dump())); }

RunConfig ParseConfig(const std::string& text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    throw InvalidConfig(source + ": " + std::string(e.description()));
  }
  RunConfig cfg = RunConfig::Defaults();

  Section top(root, "", source);
  top.Get("seed", cfg.seed);
  std::string out = cfg.out.string();
  top.Get("out", out);
  cfg.out = out;
  top.Finish({"experiment", "model", "noise", "posture", "mapping", "fit", "verify", "plot"});

  Section e(root, "experiment", source);
  e.Get("sessions", cfg.experiment.n_sessions);
  e.Get("trials_per_session", cfg.experiment.trials_per_session);
  e.Get("targets", cfg.experiment.targets);
  e.Get("start_position", cfg.experiment.start_position);
  e.Get("stop_radius", cfg.experiment.stop_radius);
  e.Get("trial_timeout", cfg.experiment.trial_timeout);
  e.Get("sim_rate", cfg.experiment.sim_rate);
  e.Get("record_rate", cfg.experiment.record_rate);
  e.Get("k_p_ratio", cfg.k_p_ratio);
  e.Get("k_p_schedule", cfg.k_p_schedule);
  e.Get("w_hat_init_std", cfg.experiment.w_hat_init_std);
  e.Finish();

  Section m(root, "model", source);
  m.Get("gamma", cfg.model.gamma);
  m.Get("eta", cfg.model.eta);
  m.Get("mu", cfg.model.mu);
  m.Get("k_p", cfg.model.k_p);
  m.Get("a", cfg.model.a);
  m.Get("time_unit", cfg.model.time_unit);
  m.Finish();

  Section n(root, "noise", source);
  n.Get("first", cfg.noise_first);
  n.Get("ratio", cfg.noise_ratio);
  n.Get("schedule", cfg.noise_schedule);
  n.Get("decay_rate", cfg.model.noise.decay_rate);
  n.Get("floor", cfg.model.noise.floor);
  n.Get("seed", cfg.noise_seed);
  n.Finish();

  Section p(root, "posture", source);
  p.Get("csv", cfg.posture.csv);
  p.Get("rate_hz", cfg.posture.model.rate_hz);
  p.Get("joints", cfg.posture.model.joints);
  p.Get("latent_dim", cfg.posture.model.latent_dim);
  p.Get("samples", cfg.posture.model.samples);
  p.Get("seed", cfg.posture.model.seed);
  p.Get("noise_floor", cfg.posture.model.noise_floor);
  p.Get("synergies", cfg.posture.synergies);
  p.Finish();

  Section mp(root, "mapping", source);
  std::string scheme = SchemeName(cfg.mapping.scheme);
  mp.Get("scheme", scheme);
  if (scheme == "leading") {
    cfg.mapping.scheme = MappingScheme::kLeadingComponents;
  } else if (scheme == "randomized") {
    cfg.mapping.scheme = MappingScheme::kRandomized;
  } else {
    throw InvalidConfig(source + ": mapping.scheme must be \"leading\" or \"randomized\"");
  }
  mp.Get("outputs", cfg.mapping.outputs);
  mp.Get("scale", cfg.mapping.scale);
  mp.Get("seed", cfg.mapping.seed);
  mp.Finish();

  Section f(root, "fit", source);
  f.Get("reference", cfg.fit.reference);
  f.Get("gamma_lo", cfg.fit.search.lo);
  f.Get("gamma_hi", cfg.fit.search.hi);
  f.Get("coarse_step", cfg.fit.search.coarse_step);
  f.Get("fine_step", cfg.fit.search.fine_step);
  f.Get("fine_halfwidth", cfg.fit.search.fine_halfwidth);
  f.Get("eta_source", cfg.fit.eta_source);
  f.Get("smoothing_window", cfg.fit.smoothing_window);
  f.Get("threads", cfg.fit.search.threads);
  f.Finish();

  Section v(root, "verify", source);
  VerifyOptions& vo = cfg.verify;
  v.Get("reduced_runs", vo.reduced_runs);
  v.Get("reduced_horizon", vo.reduced_horizon);
  v.Get("reduced_step", vo.reduced_step);
  v.Get("reduced_tolerance", vo.reduced_tolerance);
  v.Get("boundary_horizon", vo.boundary_horizon);
  v.Get("boundary_step", vo.boundary_step);
  v.Get("boundary_amplitude", vo.boundary_amplitude);
  v.Get("boundary_frequency", vo.boundary_frequency);
  v.Get("pe_window", vo.pe_window);
  v.Get("pe_threshold", vo.pe_threshold);
  v.Get("scan_sigma", vo.scan_sigma);
  v.Get("sweep_gamma_factors", vo.sweep_gamma_factors);
  v.Get("scan_dt", vo.scan.dt);
  v.Get("scan_horizon", vo.scan.horizon);
  v.Get("scan_max_horizon", vo.scan.max_horizon);
  v.Get("scan_tail_fraction", vo.scan.tail_fraction);
  v.Get("scan_steady_tolerance", vo.scan.steady_tolerance);
  v.Get("scan_seeds", vo.scan.seeds);
  v.Get("scan_seed", vo.scan.seed);
  v.Get("scan_w_tilde0", vo.scan.w_tilde0);
  v.Get("scan_e0", vo.scan.e0);
  v.Get("threads", vo.scan.threads);
  v.Get("zero_noise_tolerance", vo.zero_noise_tolerance);
  v.Finish();

  Section pl(root, "plot", source);
  pl.Get("sessions", cfg.plot.sessions);
  pl.Finish();
  return cfg;
}

RunConfig LoadConfig(const std::filesystem::path& path) {
  return ParseConfig(csv::ReadText(path), path.string());
}

ModelSetup BuildSetup(const RunConfig& cfg) {
  const PostureDataset data = cfg.posture.csv.empty()
                                  ? SynthesizePostureData(cfg.posture.model)
                                  : LoadPostureCsv(cfg.posture.csv, cfg.posture.model.rate_hz);
  const SynergyBasis basis = BuildSynergyBasis(data, cfg.posture.synergies);
  return {BuildMapping(basis, cfg.mapping), cfg.model};
}

}  // namespace bomi::cli
