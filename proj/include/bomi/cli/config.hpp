#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bomi/fitting.hpp"
#include "bomi/protocol.hpp"
#include "bomi/synergy.hpp"
#include "bomi/verify.hpp"

namespace bomi::cli {

struct PostureSource {
  /// Empty: synthesize data from `model`.
  std::string csv;
  PostureModel model;
  Eigen::Index synergies = 4;
};

struct FitOptions {
  std::string reference;
  GammaSearch search;
  /// "fit": fit_eta on the reference RE drives the gamma search;
  /// "config": model.eta is used as given.
  std::string eta_source = "fit";
  Eigen::Index smoothing_window = 10;
};

struct VerifyOptions {
  int reduced_runs = 50;
  double reduced_horizon = 20;
  double reduced_step = 1e-3;
  double reduced_tolerance = 1e-4;
  double boundary_horizon = 400;
  double boundary_step = 1e-2;
  double boundary_amplitude = 0.02;
  double boundary_frequency = 0.1;
  double pe_window = 1.0;
  double pe_threshold = 1e-8;
  double scan_sigma = 2e-3;
  std::vector<double> sweep_gamma_factors = {1, 2, 4, 8};
  ScanOptions scan;
  double zero_noise_tolerance = 1e-4;
};

struct PlotOptions {
  std::vector<int> sessions = {1, 3, 5, 8};
};

/// Everything a command needs, fully resolved. `seed` drives the target
/// sequence and, unless noise_seed is set, the exploration noise.
struct RunConfig {
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> noise_seed;
  std::filesystem::path out = "out";
  bool quick = false;

  ExperimentConfig experiment;
  ModelParams model;
  /// Per-session schedules: explicit lists win, otherwise geometric from
  /// model.k_p and noise_first.
  double k_p_ratio = 0.9;
  std::optional<std::vector<double>> k_p_schedule;
  double noise_first = 0.012;
  double noise_ratio = 0.6;
  std::optional<std::vector<double>> noise_schedule;
  PostureSource posture;
  MappingOptions mapping;
  FitOptions fit;
  VerifyOptions verify;
  PlotOptions plot;

  /// Defaults: the reference parameter set.
  static RunConfig Defaults();

  /// Fills seeds and per-session schedules into `experiment` and `model`,
  /// then checks every invariant; throws InvalidConfig.
  void Resolve();

  /// Fully resolved configuration, echoed into every artifact.
  nlohmann::ordered_json ToJson() const;
  /// FNV-1a of ToJson().dump().
  std::string Hash() const;
};

/// Reads a TOML file over Defaults(); unknown keys throw InvalidConfig.
RunConfig LoadConfig(const std::filesystem::path& path);
RunConfig ParseConfig(const std::string& toml_text, const std::string& source = "config");

/// Mapping and basis for the configured posture source.
ModelSetup BuildSetup(const RunConfig& cfg);

}  // namespace bomi::cli
