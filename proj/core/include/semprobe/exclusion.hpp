#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "semprobe/types.hpp"

namespace semprobe::ingest {

inline constexpr const char* kReasonTooFast = "rt_fast";
inline constexpr const char* kReasonTooSlow = "rt_slow";
inline constexpr const char* kReasonDenied = "observer_denied";

struct ExclusionConfig {
  double fast_ms = 150.0;
  double slow_ms = 5000.0;
  double flag_fraction = 0.03;
};

struct ExclusionReport {
  std::string observer_id;
  std::size_t total_trials = 0;
  std::size_t excluded_fast = 0;
  std::size_t excluded_slow = 0;
  double excluded_fraction = 0.0;
  /// Advisory only: the operator decides through allow/deny lists.
  bool observer_flagged = false;
};

struct ExclusionResult {
  std::vector<TrialRecord> trials;
  std::vector<ExclusionReport> reports;  // one per observer, sorted by id
};

/// Marks human trials whose reaction time lies strictly outside
/// [fast_ms, slow_ms]. Machine trials pass through untouched. Throws
/// Error(schema) naming the trial when a human trial has no reaction time.
ExclusionResult apply_rt_exclusion(std::span<const TrialRecord> trials,
                                   const ExclusionConfig& config = {});

/// Operator decision on flagged observers. An empty allow list admits
/// everyone not denied.
struct ObserverFilter {
  std::set<std::string> allow;
  std::set<std::string> deny;

  bool admits(const std::string& observer_id) const;
};

/// Marks every trial of an inadmissible observer excluded (observer_denied).
std::vector<TrialRecord> apply_observer_filter(std::span<const TrialRecord> trials,
                                               const ObserverFilter& filter);

std::vector<TrialRecord> kept_trials(std::span<const TrialRecord> trials);

}  // namespace semprobe::ingest
