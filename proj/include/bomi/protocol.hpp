#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bomi/dynamics.hpp"
#include "bomi/synergy.hpp"

namespace bomi {

/// Sessions, trials, targets and the end-of-movement rule.
struct ExperimentConfig {
  int n_sessions = 8;
  int trials_per_session = 60;
  std::vector<VectorXd> targets = DefaultTargets();
  /// Cursor position at the start of every session.
  VectorXd start_position = (VectorXd(2) << 2.5, 2.5).finished();
  double stop_radius = 0.15;
  double trial_timeout = 2.0;
  int sim_rate = 100;
  int record_rate = 50;
  /// Proportional gain per session, in 1/model-time-unit.
  std::vector<double> k_p_schedule = GeometricSchedule(5e-3, 0.9, 8);
  /// Target-sequence seed.
  std::uint64_t seed = 1;
  /// Standard deviation of the i.i.d. normal entries of W_hat(0); 0 gives
  /// the naive learner W_hat(0) = 0.
  double w_hat_init_std = 0.0;

  static std::vector<VectorXd> DefaultTargets();
  static std::vector<double> GeometricSchedule(double first, double ratio,
                                               int sessions);

  double dt() const { return 1.0 / sim_rate; }
  int record_stride() const { return sim_rate / record_rate; }
  int max_steps() const;
  void Validate() const;
};

/// The model the experiment drives: mapping (C, W, Phi) and learning constants.
struct ModelSetup {
  MappingMatrix mapping;
  ModelParams params;
};

/// Synthetic posture data -> PCA basis with `synergies` rows -> mapping.
ModelSetup MakeSetup(const PostureModel& posture = {},
                     Eigen::Index synergies = 4,
                     const MappingOptions& mapping = {},
                     const ModelParams& params = {});

struct TrajectorySample {
  int step = 0;  // simulation step index within the trial
  double t = 0;  // step / sim_rate
  VectorXd x;
  VectorXd q;
};

struct TrialRecord {
  int session_idx = 0;  // 1-based
  int trial_idx = 0;    // 1-based, within session
  /// Target index the cursor starts from (previous target, or the target at
  /// the session start position); -1 when the start is not a target.
  int start_label = -1;
  int target_idx = 0;
  VectorXd start_pos;
  VectorXd target;
  std::vector<TrajectorySample> samples;
  MatrixXd w_hat_final;
  bool reached = false;
  /// Seconds from trial start to entering the stop radius; equals the
  /// timeout when the target was not reached.
  double reach_time = 0;
  double final_error = 0;
};

/// Exact (bitwise-value) equality of every numeric field.
bool SameRecord(const TrialRecord& a, const TrialRecord& b);

/// Called after every simulation step with the new state and the sampled
/// white noise value.
struct StepEvent {
  int session = 0;  // 0-based
  int trial = 0;    // 0-based
  double t_session = 0;
  const State* state = nullptr;
  const VectorXd* noise = nullptr;
};
using StepObserver = std::function<void(const StepEvent&)>;

struct TrialContext {
  int session = 0;  // 0-based
  int trial = 0;    // 0-based
  int target_idx = 0;
  int start_label = -1;
  double session_time = 0;
};

struct TrialOutcome {
  State state;
  TrialRecord record;
  double session_time = 0;
};

/// Resets u, delta_q to zero and chi to x/a (filters at rest), then steps
/// until the cursor is inside the stop radius or the timeout elapses.
/// Recording happens every record_stride steps plus the final state.
TrialOutcome RunTrial(const State& start, const TrialContext& ctx,
                      const ExperimentConfig& cfg, const ModelSetup& setup,
                      RandomStream& rng, const StepObserver& observer = {});

struct TrialPlan {
  int start_label = -1;
  int target_idx = 0;
};

/// One entry per trial (session-major). Targets are drawn uniformly from
/// those that differ from the trial's starting target, using a stream
/// derived from cfg.seed only, so the plan does not depend on model params.
std::vector<TrialPlan> TargetSequence(const ExperimentConfig& cfg);

struct ExperimentResult {
  std::vector<TrialRecord> records;
  bool diverged = false;
  std::string error;
};

/// Runs n_sessions x trials_per_session trials. Per-session k_p comes from
/// cfg.k_p_schedule and noise amplitude from setup.params.noise; each trial
/// draws noise from its own (noise seed, session, trial) stream.
ExperimentResult RunExperiment(const ExperimentConfig& cfg,
                               const ModelSetup& setup,
                               const StepObserver& observer = {});

inline constexpr const char* kRecordSchemaVersion = "bomi-records/1";

/// Writes `path` (CSV: session,trial,t,x1..xn,q1..qm) and a JSON sidecar at
/// path with extension ".json" holding per-trial outcomes, W_hat snapshots,
/// the schema version and `provenance` (config echo, seed).
void ExportRecords(const std::vector<TrialRecord>& records,
                   const std::filesystem::path& path,
                   const nlohmann::json& provenance, int sim_rate);

struct ImportedRecords {
  std::vector<TrialRecord> records;
  int sim_rate = 0;
  std::string provenance_json;
};

ImportedRecords ImportRecords(const std::filesystem::path& path);

std::filesystem::path SidecarPath(const std::filesystem::path& csv_path);

}  // namespace bomi
