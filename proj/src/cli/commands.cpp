#include "bomi/cli/commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "bomi/cli/svg.hpp"
#include "bomi/csv.hpp"
#include "bomi/fitting.hpp"
#include "bomi/metrics.hpp"
#include "bomi/verify.hpp"

namespace bomi::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

Json Provenance(const RunConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;
  j["config_hash"] = cfg.Hash();
  j["config"] = cfg.ToJson();
  return j;
}

std::string CsvComment(const RunConfig& cfg) {
  return "seed=" + std::to_string(cfg.seed) + " config=" + cfg.Hash();
}

void WriteJson(const fs::path& path, const Json& j) {
  auto out = csv::OpenForWrite(path);
  out << j.dump(2) << '\n';
}

Json FitJson(const ExponentialFit& f) {
  Json j;
  j["eta_hat"] = f.eta;
  j["alpha_hat"] = f.alpha;
  j["c_hat"] = f.c;
  j["r_squared"] = f.r_squared;
  j["eta_start"] = f.eta_start;
  j["warnings"] = f.warnings;
  return j;
}

void LogWarnings(const std::vector<std::string>& warnings, std::ostream& log) {
  for (const std::string& w : warnings) log << "warning: " << w << '\n';
}

}  // namespace

// --- simulate -----------------------------------------------------------------

int Simulate(const RunConfig& cfg, std::ostream& log) {
  const ModelSetup setup = BuildSetup(cfg);
  const auto warnings = setup.params.TimescaleWarnings();
  LogWarnings(warnings, log);

  const ExperimentResult run = RunExperiment(cfg.experiment, setup);
  const fs::path out = cfg.out;
  ExportRecords(run.records, out / "records.csv", Provenance(cfg), cfg.experiment.sim_rate);
  ExportSynergyBasis(setup.mapping.basis, out / "synergy");

  Json summary;
  summary["command"] = "simulate";
  summary["provenance"] = Provenance(cfg);
  summary["warnings"] = warnings;
  summary["trials"] = run.records.size();
  summary["diverged"] = run.diverged;
  summary["error"] = run.error;
  if (!run.records.empty()) {
    const std::string comment = CsvComment(cfg);
    const MetricSeries re = ReachingError(run.records);
    const MetricSeries fme = ForwardModelErrorSeries(run.records, setup.mapping.w);
    ExportSeries(re, out / "re.csv", comment);
    ExportSeries(GroupAndSmooth(re, run.records, cfg.fit.smoothing_window),
                 out / "re_smoothed.csv", comment);
    ExportSeries(fme, out / "fme.csv", comment);
    MetricSeries angles;
    angles.kind = MetricKind::kModeAngle;
    angles.smoothing = "end_of_session";
    const auto per_session = SessionModeAngles(run.records, setup.mapping);
    angles.values = Eigen::Map<const VectorXd>(per_session.data(),
                                               static_cast<Eigen::Index>(per_session.size()));
    for (std::size_t s = 0; s < per_session.size(); ++s) angles.index.push_back(static_cast<int>(s) + 1);
    ExportSeries(angles, out / "mode_angle.csv", comment);

    const auto re_means = SessionMeans(re, run.records);
    summary["reached"] = std::count_if(run.records.begin(), run.records.end(),
                                       [](const TrialRecord& r) { return r.reached; });
    summary["re_session_means"] = re_means;
    summary["re_ratio_last_first"] = re_means.back() / re_means.front();
    summary["fme_first"] = fme.values(0);
    summary["fme_last"] = fme.values(fme.size() - 1);
    summary["fme_ratio_last_first"] = fme.values(fme.size() - 1) / fme.values(0);
    summary["mode_angle_sessions"] = per_session;
    summary["re_decreasing"] = re_means.back() < re_means.front();
    summary["fme_decreasing"] = fme.values(fme.size() - 1) < fme.values(0);
    log << "simulated " << run.records.size() << " trials; RE session means "
        << re_means.front() << " -> " << re_means.back() << ", FME " << fme.values(0)
        << " -> " << fme.values(fme.size() - 1) << '\n';
  }
  WriteJson(out / "summary.json", summary);
  if (run.diverged) throw Diverged(run.error);
  return kExitOk;
}

// --- fit --------------------------------------------------------------------

int Fit(const RunConfig& cfg, std::ostream& log) {
  if (cfg.fit.reference.empty()) throw InvalidConfig("fit needs a reference records file");
  if (!fs::exists(cfg.fit.reference)) {
    throw IoError("reference file not found: " + cfg.fit.reference);
  }
  const ImportedRecords ref = ImportRecords(cfg.fit.reference);
  if (ref.sim_rate != cfg.experiment.sim_rate) {
    throw InvalidConfig("reference was recorded at sim_rate " + std::to_string(ref.sim_rate) +
                        ", config has " + std::to_string(cfg.experiment.sim_rate));
  }
  const std::size_t expected =
      static_cast<std::size_t>(cfg.experiment.n_sessions * cfg.experiment.trials_per_session);
  if (ref.records.size() != expected) {
    throw InvalidConfig("reference has " + std::to_string(ref.records.size()) +
                        " trials, config expects " + std::to_string(expected));
  }

  const MetricSeries re = ReachingError(ref.records);
  const ExponentialFit eta_fit = FitEta(re);
  LogWarnings(eta_fit.warnings, log);
  Json smoothed = nullptr;
  try {
    smoothed = FitJson(FitEta(GroupAndSmooth(re, ref.records, cfg.fit.smoothing_window)));
  } catch (const DegenerateData&) {
    // Too few grouped points to fit; the raw-series fit still stands.
  }

  ModelSetup setup = BuildSetup(cfg);
  if (cfg.fit.eta_source == "fit") {
    if (!(eta_fit.eta >= 0)) throw FitDiverged("fitted eta is negative; use eta_source = \"config\"");
    setup.params.eta = eta_fit.eta;
  }
  LogWarnings(setup.params.TimescaleWarnings(), log);
  log << "eta_hat " << eta_fit.eta << " (R^2 " << eta_fit.r_squared << "); searching gamma in ["
      << cfg.fit.search.lo << ", " << cfg.fit.search.hi << "]\n";
  const GammaFit gamma_fit = FitGamma(ref.records, cfg.experiment, setup, cfg.fit.search);
  log << "gamma_hat " << gamma_fit.gamma_hat << " (objective " << gamma_fit.objective << ")\n";

  const fs::path out = cfg.out;
  {
    auto csv_out = csv::OpenForWrite(out / "gamma_curve.csv");
    csv_out << "# " << CsvComment(cfg) << "\ngamma,objective\n";
    for (const GammaPoint& p : gamma_fit.curve) csv::WriteRow(csv_out, {p.gamma, p.objective});
  }
  Json report;
  report["command"] = "fit";
  report["provenance"] = Provenance(cfg);
  report["reference"] = cfg.fit.reference;
  report["reference_provenance"] = Json::parse(ref.provenance_json);
  report["eta_source"] = cfg.fit.eta_source;
  report["eta"] = FitJson(eta_fit);
  report["eta_smoothed"] = smoothed;
  report["eta_used"] = setup.params.eta;
  Json g;
  g["gamma_hat"] = gamma_fit.gamma_hat;
  g["objective"] = gamma_fit.objective;
  g["gamma_range"] = {cfg.fit.search.lo, cfg.fit.search.hi};
  g["coarse_step"] = cfg.fit.search.coarse_step;
  g["fine_step"] = cfg.fit.search.fine_step;
  g["coarse_minimum"] = gamma_fit.coarse_minimum;
  g["evaluated"] = gamma_fit.curve.size();
  g["curve_file"] = "gamma_curve.csv";
  report["gamma"] = g;
  WriteJson(out / "fit.json", report);
  return kExitOk;
}

// --- verify -------------------------------------------------------------------

VerificationResult RunVerification(const RunConfig& cfg, const ModelSetup& setup,
                                   std::ostream& log) {
  const VerifyOptions& vo = cfg.verify;
  const ModelParams& p = setup.params;
  const MappingMatrix& map = setup.mapping;
  const Eigen::Index n = map.outputs(), m = map.basis.joints(), h = map.basis.synergies();

  VerificationResult result;
  result.passed = true;
  Json& report = result.report;
  report["command"] = "verify";
  report["provenance"] = Provenance(cfg);
  report["warnings"] = p.TimescaleWarnings();
  LogWarnings(p.TimescaleWarnings(), log);
  const PerturbationScales eps = PerturbationScales::From(p);
  report["scales"] = {{"eps_u", eps.eps_u}, {"eps_delta", eps.eps_delta}, {"eps_w", eps.eps_w}};
  Json& checks = report["checks"] = Json::array();
  auto add = [&](const std::string& name, bool required, bool passed, Json details) {
    log << (passed ? "PASS " : (required ? "FAIL " : "NOTE ")) << name << '\n';
    if (required && !passed) result.passed = false;
    checks.push_back({{"name", name}, {"required", required}, {"passed", passed},
                      {"details", std::move(details)}});
  };
  RandomStream rng = RandomStream::Derived(cfg.seed, 0x5e41u);

  {  // f1..f3, g rewrite
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
      State s = State::Zero(n, m, h);
      s.u = rng.Normal(m);
      s.q = rng.Normal(m);
      s.x = rng.Normal(n);
      s.delta_q = rng.Normal(m);
      s.w_hat = map.w;
      for (Eigen::Index j = 0; j < h; ++j) s.w_hat.col(j) += rng.Normal(n);
      worst = std::max(worst, PerturbationIdentityError(s, rng.Normal(n), map, p));
    }
    add("perturbation_identity", true, worst <= 1e-12, {{"max_relative_error", worst}, {"states", 100}});
  }

  {  // Lemma 1
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_final = 0, worst_violation = 0, worst_increase = 0;
    bool lyapunov_ok = true;
    ReducedTrajectory first;
    ReducedSystem first_sys;
    for (int i = 0; i < vo.reduced_runs; ++i) {
      const ReducedSystem sys = ReducedSystem::FromParams(map.c.row(i % n), p);
      VectorXd z = rng.Normal(m + 1);
      z *= std::pow(unit(rng.engine()), 1.0 / static_cast<double>(m + 1)) / z.norm();
      ReducedTrajectory tr =
          SimulateReduced(sys, z.head(m), z.tail(1), vo.reduced_horizon, vo.reduced_step);
      const LyapunovReport lr = LyapunovCheck(tr, sys);
      worst_final = std::max(worst_final, std::sqrt(tr.back().u.squaredNorm() +
                                                    tr.back().ebar.squaredNorm()));
      worst_violation = std::max(worst_violation, lr.max_violation);
      worst_increase = std::max(worst_increase, lr.max_increase);
      lyapunov_ok &= lr.passed;
      if (i == 0) first = std::move(tr), first_sys = sys;
    }
    const double alpha1 = ReducedSystem::FromParams(map.c, p).Alpha1();
    add("reduced_system", true, worst_final < vo.reduced_tolerance && lyapunov_ok,
        {{"runs", vo.reduced_runs}, {"horizon", vo.reduced_horizon},
         {"max_final_norm", worst_final}, {"max_vdot_violation", worst_violation},
         {"max_v_increase", worst_increase}, {"alpha1", alpha1}});
    const LyapunovReport reversed = LyapunovCheck(TimeReversed(first), first_sys);
    add("lyapunov_negative_control", true, !reversed.passed,
        {{"max_violation", reversed.max_violation}});
  }

  {  // persistent excitation of the injected noise during session 1
    ExperimentConfig one = cfg.experiment;
    one.n_sessions = 1;
    SignalRecorder rec;
    const ExperimentResult run = RunExperiment(one, setup, rec.Observer());
    if (run.diverged) throw Diverged(run.error);
    const double dt = one.dt();
    const GramianReport noise = PeGramian(SignalRecorder::Stack(rec.noise), dt, vo.pe_window, vo.pe_threshold);
    const GramianReport dq = PeGramian(SignalRecorder::Stack(rec.delta_q), dt, vo.pe_window, vo.pe_threshold);
    auto gram_json = [](const GramianReport& g) {
      return Json{{"window", g.window_length}, {"alpha1", g.alpha1}, {"alpha2", g.alpha2},
                  {"windows", g.windows_checked}, {"threshold", g.threshold}};
    };
    add("pe_noise_session1", true, noise.pe_satisfied, gram_json(noise));
    add("pe_delta_q_session1", false, dq.pe_satisfied, gram_json(dq));
  }

  if (cfg.quick) {
    report["quick"] = true;
    return result;
  }
  report["quick"] = false;

  {  // Lemma 2
    BoundarySystem b;
    b.phi = map.basis.phi;
    b.u_frozen = 0.01 * map.basis.phi.row(0).transpose();
    b.a = p.a;
    b.gamma = p.gamma;
    MatrixXd w0(n, h);
    for (Eigen::Index j = 0; j < h; ++j) w0.col(j) = rng.Normal(n);
    w0 /= w0.norm();

    const BoundaryTrajectory eq = SimulateBoundaryLayer(
        b, MatrixXd::Zero(n, h), b.u_frozen / b.a, vo.boundary_horizon / 8, vo.boundary_step);
    double drift = 0;
    for (const BoundarySample& s : eq) {
      drift = std::max({drift, s.w_tilde.cwiseAbs().maxCoeff(),
                        (s.delta_q - b.u_frozen / b.a).cwiseAbs().maxCoeff()});
    }
    add("boundary_equilibrium", true, drift <= 1e-12, {{"max_drift", drift}});

    BoundarySystem idle = b;
    idle.u_frozen.setZero();
    const BoundaryTrajectory frozen = SimulateBoundaryLayer(
        idle, w0, VectorXd::Zero(m), vo.boundary_horizon / 8, vo.boundary_step);
    const double moved = (frozen.back().w_tilde - w0).cwiseAbs().maxCoeff();
    add("boundary_no_excitation", true, moved == 0.0, {{"max_change", moved}});

    const BoundaryTrajectory relax = SimulateBoundaryLayer(
        b, w0, VectorXd::Zero(m), vo.boundary_horizon / 2, vo.boundary_step, 10);
    const LyapunovReport lr = LyapunovCheck(relax, b);
    add("boundary_lyapunov", true, lr.passed,
        {{"max_violation", lr.max_violation}, {"max_increase", lr.max_increase}});

    BoundarySystem excited = b;
    excited.excitation = MultiSineExcitation(map.basis.phi, vo.boundary_amplitude, vo.boundary_frequency);
    const BoundaryTrajectory decay = SimulateBoundaryLayer(
        excited, w0, b.u_frozen / b.a, vo.boundary_horizon, vo.boundary_step, 10);
    const DecayFit fit = FitLogDecay(decay);
    add("boundary_exponential_decay", true, fit.slope < 0 && fit.r_squared > 0.95,
        {{"lambda", -fit.slope}, {"r_squared", fit.r_squared},
         {"w_tilde_initial", w0.norm()}, {"w_tilde_final", decay.back().w_tilde.norm()}});
  }

  {  // Theorem 1
    const double sigma = vo.scan_sigma;
    const RunNorm zero = SteadyStateNorm(map, p, 0.0, vo.scan.seed, vo.scan);
    add("theorem_zero_noise", true, !zero.diverged && zero.tail_norm < vo.zero_noise_tolerance,
        {{"steady_norm", zero.tail_norm}});

    auto rows_json = [](const ScanReport& r) {
      Json rows = Json::array();
      for (const ScanRow& row : r.rows) {
        rows.push_back({{"sigma", row.amplitude}, {"gamma", row.gamma}, {"eps_w", row.eps_w},
                        {"steady_norm", row.steady_norm}, {"steady_norm_sd", row.steady_norm_sd},
                        {"horizon", row.horizon_used}, {"steady", row.steady},
                        {"diverged", row.diverged}});
      }
      return rows;
    };
    const ScanReport scan = NeighborhoodScan(map, p, {sigma, 2 * sigma, 4 * sigma}, vo.scan);
    add("theorem_noise_scaling", true, scan.ratios_ok,
        {{"rows", rows_json(scan)}, {"ratios", scan.ratios}});

    std::vector<double> gammas;
    for (double f : vo.sweep_gamma_factors) gammas.push_back(p.gamma * f);
    const ScanReport sweep = EpsWSweep(map, p, sigma, gammas, vo.scan);
    std::vector<double> norms;
    double largest_eps = 0;
    for (const ScanRow& row : sweep.rows) {
      norms.push_back(row.steady_norm);
      if (!row.diverged) largest_eps = std::max(largest_eps, row.eps_w);
    }
    add("eps_w_sweep", true, sweep.ratios_ok,
        {{"rows", rows_json(sweep)}, {"normalized_slope", NormalizedTrendSlope(norms)},
         {"largest_passing_eps_w", largest_eps}});

    const fs::path out = cfg.out;
    auto write_rows = [&](const fs::path& path, const ScanReport& r) {
      auto os = csv::OpenForWrite(path);
      os << "# " << CsvComment(cfg) << "\nsigma,gamma,eps_w,steady_norm,steady_norm_sd,horizon,steady\n";
      for (const ScanRow& row : r.rows) {
        csv::WriteRow(os, {row.amplitude, row.gamma, row.eps_w, row.steady_norm,
                           row.steady_norm_sd, row.horizon_used, row.steady ? 1.0 : 0.0});
      }
    };
    write_rows(out / "scan.csv", scan);
    write_rows(out / "sweep.csv", sweep);
  }
  return result;
}

int Verify(const RunConfig& cfg, std::ostream& log) {
  const ModelSetup setup = BuildSetup(cfg);
  VerificationResult result = RunVerification(cfg, setup, log);
  result.report["passed"] = result.passed;
  WriteJson(fs::path(cfg.out) / "verify.json", result.report);
  return result.passed ? kExitOk : kExitCheckFailed;
}

// --- plot -------------------------------------------------------------------

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#17becf"};

void PlotRecords(const RunConfig& cfg, const fs::path& input, const ImportedRecords& data,
                 std::ostream& log) {
  Figure fig("Cursor trajectories (" + input.filename().string() + ")");
  for (int session : cfg.plot.sessions) {
    std::vector<const TrialRecord*> trials;
    for (const TrialRecord& r : data.records) {
      if (r.session_idx == session) trials.push_back(&r);
    }
    if (trials.empty()) {
      log << "warning: session " << session << " not in " << input << '\n';
      continue;
    }
    Panel& panel = fig.AddPanel();
    panel.title = "Session " + std::to_string(session);
    panel.x_label = "x1";
    panel.y_label = "x2";
    panel.equal_aspect = true;
    panel.x_lo = panel.y_lo = 0;
    panel.x_hi = panel.y_hi = 5;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      Polyline line;
      line.color = kPalette[trials[i]->target_idx % 8];
      line.width = 1.0;
      for (const TrajectorySample& s : trials[i]->samples) {
        line.x.push_back(s.x(0));
        line.y.push_back(s.x.size() > 1 ? s.x(1) : s.t);
      }
      panel.lines.push_back(std::move(line));
    }
    for (const VectorXd& t : cfg.experiment.targets) {
      if (t.size() >= 2) panel.markers.push_back({t(0), t(1), cfg.experiment.stop_radius});
    }
  }
  if (data.records.empty()) fig.AddPanel().note = "no trials in input";
  fig.SetComment(CsvComment(cfg) + " input=" + input.filename().string());
  fig.Write(fs::path(cfg.out) / (input.stem().string() + "_trajectories.svg"));
}

void PlotSeries(const RunConfig& cfg, const fs::path& input, std::ostream& log) {
  const MetricSeries s = ImportSeries(input);
  std::string title = "Reaching error";
  std::string x_label = "trial k";
  if (s.kind == MetricKind::kFME) title = "Forward model error";
  if (s.kind == MetricKind::kModeAngle) {
    title = "Mode angle between C_hat and C";
    x_label = "session";
  }
  Figure fig(title + " (" + input.filename().string() + ")");
  fig.SetComment(CsvComment(cfg) + " input=" + input.filename().string());
  Panel& panel = fig.AddPanel();
  panel.title = title;
  panel.x_label = x_label;
  panel.y_label = MetricName(s.kind);
  if (s.size() == 0) {
    panel.note = "warning: no data";
    log << "warning: " << input << " has no rows\n";
  } else {
    Polyline line;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      line.x.push_back(s.index[static_cast<std::size_t>(i)]);
      line.y.push_back(s.values(i));
    }
    panel.lines.push_back(std::move(line));
  }
  fig.Write(fs::path(cfg.out) / (input.stem().string() + ".svg"));
}

}  // namespace

int Plot(const RunConfig& cfg, const std::vector<fs::path>& inputs, std::ostream& log) {
  if (inputs.empty()) throw InvalidConfig("plot needs at least one input file");
  for (const fs::path& input : inputs) {
    if (!fs::exists(input)) throw IoError("input not found: " + input.string());
    const fs::path sidecar = SidecarPath(input);
    bool is_records = false;
    if (fs::exists(sidecar)) {
      const auto meta = nlohmann::json::parse(csv::ReadText(sidecar), nullptr, false);
      is_records = !meta.is_discarded() && meta.is_object() &&
                   meta.value("schema_version", std::string()) == kRecordSchemaVersion;
    }
    if (is_records) {
      PlotRecords(cfg, input, ImportRecords(input), log);
    } else {
      PlotSeries(cfg, input, log);
    }
  }
  return kExitOk;
}

// --- entry point ----------------------------------------------------------------

int Main(int argc, char** argv) {
  CLI::App app{"Synergy-based motor-learning model: simulate, fit, verify, plot"};
  app.require_subcommand(1);

  std::string config_path, out, reference, eta_source;
  std::uint64_t seed = 0;
  int sessions = 0, trials = 0;
  unsigned threads = 0;
  bool quick = false;
  std::vector<double> gamma_range;
  std::vector<std::string> inputs;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "TOML configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "target and noise seed");
    sub->add_flag("--quick", quick, "reduced workload");
    sub->add_option("--sessions", sessions, "number of sessions");
    sub->add_option("--trials", trials, "trials per session");
    sub->add_option("--threads", threads, "worker threads (0 = all cores)");
  };
  CLI::App* sim = app.add_subcommand("simulate", "run the experiment protocol");
  common(sim);
  CLI::App* fit = app.add_subcommand("fit", "fit eta and gamma to reference records");
  common(fit);
  fit->add_option("--reference", reference, "reference records CSV");
  fit->add_option("--gamma-range", gamma_range, "gamma search interval")->expected(2);
  fit->add_option("--eta-source", eta_source, "fit | config")->check(CLI::IsMember({"fit", "config"}));
  CLI::App* ver = app.add_subcommand("verify", "run the stability checks");
  common(ver);
  CLI::App* plot = app.add_subcommand("plot", "draw SVG figures from CSV artifacts");
  common(plot);
  plot->add_option("inputs", inputs, "records or metric CSV files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  fs::path out_dir = out.empty() ? fs::path("out") : fs::path(out);
  CLI::App* cmd = app.get_subcommands().front();
  try {
    RunConfig cfg = config_path.empty() ? RunConfig::Defaults() : LoadConfig(config_path);
    if (!out.empty()) cfg.out = out;
    out_dir = cfg.out;
    if (cmd->get_option("--seed")->count()) cfg.seed = seed;
    if (cmd->get_option("--sessions")->count()) cfg.experiment.n_sessions = sessions;
    if (cmd->get_option("--trials")->count()) cfg.experiment.trials_per_session = trials;
    if (cmd->get_option("--threads")->count()) {
      cfg.fit.search.threads = threads;
      cfg.verify.scan.threads = threads;
    }
    if (quick) cfg.quick = true;
    if (!reference.empty()) cfg.fit.reference = reference;
    if (!eta_source.empty()) cfg.fit.eta_source = eta_source;
    if (gamma_range.size() == 2) {
      cfg.fit.search.lo = gamma_range[0];
      cfg.fit.search.hi = gamma_range[1];
    }
    cfg.Resolve();

    if (cmd == sim) return Simulate(cfg, std::cerr);
    if (cmd == fit) return Fit(cfg, std::cerr);
    if (cmd == ver) return Verify(cfg, std::cerr);
    std::vector<fs::path> paths(inputs.begin(), inputs.end());
    return Plot(cfg, paths, std::cerr);
  } catch (const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    const std::string kind = err ? err->kind() : "Error";
    std::cerr << "error: " << kind << ": " << e.what() << '\n';
    try {
      Json j;
      j["command"] = cmd->get_name();
      j["error"] = kind;
      j["message"] = e.what();
      WriteJson(out_dir / "error.json", j);
    } catch (const std::exception&) {
      // Nowhere to write the report; stderr already has it.
    }
    return kExitError;
  }
}

}  // namespace bomi::cli
