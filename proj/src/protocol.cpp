#include "bomi/protocol.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bomi/csv.hpp"

namespace bomi {
namespace {

constexpr std::uint32_t kTargetStreamTag = 0x7a46;
constexpr std::uint32_t kInitStreamTag = 0x3b01;

int LabelOf(const std::vector<VectorXd>& targets, const VectorXd& p) {
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].size() == p.size() && (targets[i] - p).norm() < 1e-12) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

}  // namespace

std::vector<VectorXd> ExperimentConfig::DefaultTargets() {
  return {(VectorXd(2) << 0.5, 4.5).finished(),
          (VectorXd(2) << 2.5, 0.5).finished(),
          (VectorXd(2) << 2.5, 2.5).finished(),
          (VectorXd(2) << 4.5, 4.5).finished()};
}

std::vector<double> ExperimentConfig::GeometricSchedule(double first,
                                                        double ratio,
                                                        int sessions) {
  std::vector<double> out(static_cast<std::size_t>(std::max(sessions, 0)));
  for (int k = 0; k < sessions; ++k) out[k] = first * std::pow(ratio, k);
  return out;
}

int ExperimentConfig::max_steps() const {
  return static_cast<int>(std::lround(trial_timeout * sim_rate));
}

void ExperimentConfig::Validate() const {
  if (n_sessions < 1) throw InvalidConfig("n_sessions must be >= 1");
  if (trials_per_session < 1) throw InvalidConfig("trials_per_session must be >= 1");
  if (sim_rate < 1 || record_rate < 1 || sim_rate % record_rate != 0) {
    throw InvalidConfig("record_rate must divide sim_rate");
  }
  if (!(stop_radius > 0)) throw InvalidConfig("stop_radius must be > 0");
  if (!(trial_timeout > 0)) throw InvalidConfig("trial_timeout must be > 0");
  if (targets.size() < 2) throw InvalidConfig("at least 2 targets are required");
  const Eigen::Index n = start_position.size();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].size() != n || !targets[i].allFinite()) {
      throw InvalidConfig("target " + std::to_string(i) +
                          " has the wrong dimension");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if ((targets[i] - targets[j]).norm() == 0) {
        throw InvalidConfig("targets must be distinct");
      }
    }
  }
  if (k_p_schedule.size() < static_cast<std::size_t>(n_sessions)) {
    throw InvalidConfig("k_p_schedule needs one entry per session");
  }
  for (std::size_t k = 0; k < k_p_schedule.size(); ++k) {
    if (!(k_p_schedule[k] > 0)) throw InvalidConfig("k_p_schedule must be positive");
    if (k > 0 && k_p_schedule[k] > k_p_schedule[k - 1]) {
      throw InvalidConfig("k_p_schedule must be non-increasing");
    }
  }
  if (!(w_hat_init_std >= 0)) throw InvalidConfig("w_hat_init_std must be >= 0");
}

ModelSetup MakeSetup(const PostureModel& posture, Eigen::Index synergies,
                     const MappingOptions& mapping, const ModelParams& params) {
  const SynergyBasis basis =
      BuildSynergyBasis(SynthesizePostureData(posture), synergies);
  return {BuildMapping(basis, mapping), params};
}

bool SameRecord(const TrialRecord& a, const TrialRecord& b) {
  auto same = [](const auto& p, const auto& q) {
    return p.rows() == q.rows() && p.cols() == q.cols() && p == q;
  };
  if (a.session_idx != b.session_idx || a.trial_idx != b.trial_idx ||
      a.start_label != b.start_label || a.target_idx != b.target_idx ||
      a.reached != b.reached || a.reach_time != b.reach_time ||
      a.final_error != b.final_error || !same(a.start_pos, b.start_pos) ||
      !same(a.target, b.target) || !same(a.w_hat_final, b.w_hat_final) ||
      a.samples.size() != b.samples.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const auto& p = a.samples[i];
    const auto& q = b.samples[i];
    if (p.step != q.step || p.t != q.t || !same(p.x, q.x) || !same(p.q, q.q)) {
      return false;
    }
  }
  return true;
}

TrialOutcome RunTrial(const State& start, const TrialContext& ctx,
                      const ExperimentConfig& cfg, const ModelSetup& setup,
                      RandomStream& rng, const StepObserver& observer) {
  ModelParams params = setup.params;
  params.k_p = cfg.k_p_schedule.at(static_cast<std::size_t>(ctx.session));

  TrialOutcome out;
  out.session_time = ctx.session_time;
  State s = start;
  s.u.setZero();
  s.delta_q.setZero();
  s.chi = s.x / params.PerSecond(params.a);

  TrialRecord& rec = out.record;
  rec.session_idx = ctx.session + 1;
  rec.trial_idx = ctx.trial + 1;
  rec.start_label = ctx.start_label;
  rec.target_idx = ctx.target_idx;
  rec.target = cfg.targets.at(static_cast<std::size_t>(ctx.target_idx));
  rec.start_pos = s.x;

  StepInputs in;
  in.mapping = &setup.mapping;
  in.params = &params;
  in.x_des = rec.target;

  const double dt = cfg.dt();
  const int stride = cfg.record_stride();
  const int max_steps = cfg.max_steps();
  auto record = [&](int step) {
    rec.samples.push_back({step, static_cast<double>(step) / cfg.sim_rate, s.x, s.q});
  };

  VectorXd noise;
  int step = 0;
  for (;; ++step) {
    if (step % stride == 0) record(step);
    if ((rec.target - s.x).norm() < cfg.stop_radius) {
      rec.reached = true;
      break;
    }
    if (step >= max_steps) break;
    in.noise_variance = params.noise.Variance(ctx.session, out.session_time);
    s = Step(s, in, dt, rng, observer ? &noise : nullptr);
    out.session_time += dt;
    if (observer) {
      observer({ctx.session, ctx.trial, out.session_time, &s, &noise});
    }
  }
  if (rec.samples.back().step != step) record(step);

  rec.reach_time = rec.reached ? static_cast<double>(step) / cfg.sim_rate
                               : cfg.trial_timeout;
  rec.final_error = (rec.samples.back().x - rec.target).norm();
  rec.w_hat_final = s.w_hat;
  out.state = std::move(s);
  return out;
}

std::vector<TrialPlan> TargetSequence(const ExperimentConfig& cfg) {
  RandomStream rng = RandomStream::Derived(cfg.seed, kTargetStreamTag);
  const int n_targets = static_cast<int>(cfg.targets.size());
  std::vector<TrialPlan> plan;
  plan.reserve(static_cast<std::size_t>(cfg.n_sessions * cfg.trials_per_session));
  for (int session = 0; session < cfg.n_sessions; ++session) {
    int prev = LabelOf(cfg.targets, cfg.start_position);
    for (int trial = 0; trial < cfg.trials_per_session; ++trial) {
      int pick;
      if (prev < 0) {
        pick = rng.UniformIndex(n_targets);
      } else {
        pick = rng.UniformIndex(n_targets - 1);
        if (pick >= prev) ++pick;
      }
      plan.push_back({prev, pick});
      prev = pick;
    }
  }
  return plan;
}

ExperimentResult RunExperiment(const ExperimentConfig& cfg,
                               const ModelSetup& setup,
                               const StepObserver& observer) {
  cfg.Validate();
  setup.params.Validate();
  const MappingMatrix& map = setup.mapping;
  if (cfg.start_position.size() != map.outputs()) {
    throw DimensionMismatch("targets are " +
                            std::to_string(cfg.start_position.size()) +
                            "-D but the mapping has " +
                            std::to_string(map.outputs()) + " outputs");
  }

  const std::vector<TrialPlan> plan = TargetSequence(cfg);
  State state = State::Zero(map.outputs(), map.basis.joints(),
                            map.basis.synergies());
  if (cfg.w_hat_init_std > 0) {
    RandomStream init =
        RandomStream::Derived(setup.params.noise.seed, kInitStreamTag);
    for (Eigen::Index j = 0; j < state.w_hat.cols(); ++j) {
      state.w_hat.col(j) = cfg.w_hat_init_std * init.Normal(state.w_hat.rows());
    }
  }

  ExperimentResult result;
  result.records.reserve(plan.size());
  std::size_t k = 0;
  for (int session = 0; session < cfg.n_sessions; ++session) {
    state.x = cfg.start_position;
    double session_time = 0;
    for (int trial = 0; trial < cfg.trials_per_session; ++trial, ++k) {
      RandomStream rng = RandomStream::Derived(
          setup.params.noise.seed, static_cast<std::uint32_t>(session),
          static_cast<std::uint32_t>(trial));
      TrialContext ctx{session, trial, plan[k].target_idx, plan[k].start_label,
                       session_time};
      try {
        TrialOutcome outcome = RunTrial(state, ctx, cfg, setup, rng, observer);
        state = std::move(outcome.state);
        session_time = outcome.session_time;
        result.records.push_back(std::move(outcome.record));
      } catch (const Diverged& e) {
        result.diverged = true;
        result.error = "session " + std::to_string(session + 1) + " trial " +
                       std::to_string(trial + 1) + ": " + e.what();
        return result;
      }
    }
  }
  return result;
}

std::filesystem::path SidecarPath(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".json");
  return p;
}

namespace {

nlohmann::ordered_json VectorJson(const VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::ordered_json MatrixJson(const MatrixXd& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

VectorXd VectorFrom(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

MatrixXd MatrixFrom(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(j.size()) != rows) {
    throw SchemaVersionMismatch("W_hat snapshot has the wrong row count");
  }
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto row = j[static_cast<std::size_t>(i)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw SchemaVersionMismatch("W_hat snapshot has the wrong column count");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace

void ExportRecords(const std::vector<TrialRecord>& records,
                   const std::filesystem::path& path,
                   const nlohmann::json& provenance, int sim_rate) {
  const Eigen::Index n = records.empty() ? 0 : records.front().target.size();
  const Eigen::Index m =
      records.empty() || records.front().samples.empty()
          ? 0
          : records.front().samples.front().q.size();
  const Eigen::Index h = records.empty() ? 0 : records.front().w_hat_final.cols();

  {
    auto out = csv::OpenForWrite(path);
    out << "session,trial,t";
    for (Eigen::Index i = 1; i <= n; ++i) out << ",x" << i;
    for (Eigen::Index i = 1; i <= m; ++i) out << ",q" << i;
    out << '\n';
    std::vector<double> row(static_cast<std::size_t>(3 + n + m));
    for (const TrialRecord& rec : records) {
      for (const TrajectorySample& s : rec.samples) {
        row[0] = rec.session_idx;
        row[1] = rec.trial_idx;
        row[2] = s.t;
        for (Eigen::Index i = 0; i < n; ++i) row[3 + i] = s.x(i);
        for (Eigen::Index i = 0; i < m; ++i) row[3 + n + i] = s.q(i);
        csv::WriteRow(out, row);
      }
    }
  }

  nlohmann::ordered_json meta;
  meta["schema_version"] = kRecordSchemaVersion;
  meta["provenance"] = provenance;
  meta["sim_rate"] = sim_rate;
  meta["n"] = n;
  meta["m"] = m;
  meta["h"] = h;
  auto& trials = meta["trials"] = nlohmann::ordered_json::array();
  for (const TrialRecord& rec : records) {
    nlohmann::ordered_json t;
    t["session"] = rec.session_idx;
    t["trial"] = rec.trial_idx;
    t["start_label"] = rec.start_label;
    t["target_idx"] = rec.target_idx;
    t["start_pos"] = VectorJson(rec.start_pos);
    t["target"] = VectorJson(rec.target);
    t["reached"] = rec.reached;
    t["reach_time"] = rec.reach_time;
    t["final_error"] = rec.final_error;
    t["w_hat_final"] = MatrixJson(rec.w_hat_final);
    trials.push_back(std::move(t));
  }
  auto out = csv::OpenForWrite(SidecarPath(path));
  out << meta.dump(1) << '\n';
}

ImportedRecords ImportRecords(const std::filesystem::path& path) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(csv::ReadText(SidecarPath(path)));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaVersionMismatch(SidecarPath(path).string() + ": " + e.what());
  }
  if (meta.value("schema_version", std::string()) != kRecordSchemaVersion) {
    throw SchemaVersionMismatch("expected schema " +
                                std::string(kRecordSchemaVersion));
  }
  ImportedRecords out;
  try {
    out.sim_rate = meta.at("sim_rate").get<int>();
    out.provenance_json = meta.at("provenance").dump();
    const auto n = meta.at("n").get<Eigen::Index>();
    const auto m = meta.at("m").get<Eigen::Index>();
    const auto h = meta.at("h").get<Eigen::Index>();

    std::map<std::pair<int, int>, std::size_t> by_key;
    for (const auto& t : meta.at("trials")) {
      TrialRecord rec;
      rec.session_idx = t.at("session").get<int>();
      rec.trial_idx = t.at("trial").get<int>();
      rec.start_label = t.at("start_label").get<int>();
      rec.target_idx = t.at("target_idx").get<int>();
      rec.start_pos = VectorFrom(t.at("start_pos"));
      rec.target = VectorFrom(t.at("target"));
      rec.reached = t.at("reached").get<bool>();
      rec.reach_time = t.at("reach_time").get<double>();
      rec.final_error = t.at("final_error").get<double>();
      rec.w_hat_final = MatrixFrom(t.at("w_hat_final"), n, h);
      by_key[{rec.session_idx, rec.trial_idx}] = out.records.size();
      out.records.push_back(std::move(rec));
    }

    const csv::Table table = csv::Read(path);
    const auto width = static_cast<std::size_t>(3 + n + m);
    if (table.header.size() != width ||
        (!table.rows.empty() && table.rows.front().size() != width)) {
      throw SchemaVersionMismatch(path.string() + ": expected " +
                                  std::to_string(width) + " columns");
    }
    for (const auto& row : table.rows) {
      const auto it = by_key.find({static_cast<int>(row[0]), static_cast<int>(row[1])});
      if (it == by_key.end()) {
        throw SchemaVersionMismatch("sample for unknown trial in " + path.string());
      }
      TrajectorySample s;
      s.t = row[2];
      s.step = static_cast<int>(std::llround(row[2] * out.sim_rate));
      s.x = Eigen::Map<const VectorXd>(row.data() + 3, n);
      s.q = Eigen::Map<const VectorXd>(row.data() + 3 + n, m);
      out.records[it->second].samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaVersionMismatch(SidecarPath(path).string() + ": " + e.what());
  }
  return out;
}

}  // namespace bomi
