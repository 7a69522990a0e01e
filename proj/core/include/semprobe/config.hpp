#pragma once

#include <filesystem>
#include <string>

#include "semprobe/exclusion.hpp"
#include "semprobe/psychometric.hpp"

namespace semprobe {

/// Settings read from a small TOML-like file:
///
///   [fit]
///   beta_max = 7.62
///   lambda_mode = "free"
///   gof_critical = 11.07
///   [exclusion]
///   fast_ms = 150
///
/// Unknown sections or keys are errors so typos do not silently fall back
/// to defaults.
struct AnalysisConfig {
  FitConfig fit;
  ingest::ExclusionConfig exclusion;
};

AnalysisConfig parse_config(const std::string& text, const std::string& source = "<config>");
AnalysisConfig load_config(const std::filesystem::path& path);

}  // namespace semprobe
