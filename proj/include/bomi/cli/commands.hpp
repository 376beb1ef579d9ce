#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bomi/cli/config.hpp"

namespace bomi::cli {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitError = 2 };

/// Writes records.csv/.json, re.csv, re_smoothed.csv, fme.csv,
/// mode_angle.csv, synergy.csv/.json and summary.json under cfg.out.
int Simulate(const RunConfig& cfg, std::ostream& log);

/// Reads cfg.fit.reference, fits eta then gamma; writes fit.json and
/// gamma_curve.csv.
int Fit(const RunConfig& cfg, std::ostream& log);

struct VerificationResult {
  nlohmann::ordered_json report;
  bool passed = false;
};

/// The check suite behind `verify`. Quick mode runs the perturbation
/// identity, reduced-system and PE checks only.
VerificationResult RunVerification(const RunConfig& cfg, const ModelSetup& setup,
                                   std::ostream& log);

/// Writes verify.json (and scan.csv / sweep.csv unless quick); exit 1 when a
/// required check fails.
int Verify(const RunConfig& cfg, std::ostream& log);

/// One SVG per input: records files give cursor-trajectory panels for
/// cfg.plot.sessions, metric files a single curve.
int Plot(const RunConfig& cfg, const std::vector<std::filesystem::path>& inputs,
         std::ostream& log);

/// Command-line entry point. On failure writes <out>/error.json.
int Main(int argc, char** argv);

}  // namespace bomi::cli
