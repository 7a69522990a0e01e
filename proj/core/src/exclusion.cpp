#include "semprobe/exclusion.hpp"

#include <map>

#include "semprobe/error.hpp"
#include "semprobe/format.hpp"

namespace semprobe::ingest {

ExclusionResult apply_rt_exclusion(std::span<const TrialRecord> trials,
                                   const ExclusionConfig& config) {
  ExclusionResult result;
  result.trials.assign(trials.begin(), trials.end());
  std::map<std::string, ExclusionReport> reports;

  for (auto& trial : result.trials) {
    if (trial.observer_kind != ObserverKind::human) continue;
    if (!trial.reaction_time_ms) {
      throw Error(ErrorKind::schema, "human trial " + std::to_string(trial.trial_index) +
                                         " of observer '" + trial.observer_id +
                                         "' has no reaction time");
    }
    auto& report = reports[trial.observer_id];
    report.observer_id = trial.observer_id;
    ++report.total_trials;

    const double rt = *trial.reaction_time_ms;
    const char* reason = nullptr;
    if (rt < config.fast_ms) {
      ++report.excluded_fast;
      reason = kReasonTooFast;
    } else if (rt > config.slow_ms) {
      ++report.excluded_slow;
      reason = kReasonTooSlow;
    }
    // Earlier reasons (e.g. a denied observer) are kept.
    if (reason != nullptr && !trial.excluded) {
      trial.excluded = true;
      trial.exclusion_reason = reason;
    }
  }

  for (auto& [id, report] : reports) {
    report.excluded_fraction =
        static_cast<double>(report.excluded_fast + report.excluded_slow) /
        static_cast<double>(report.total_trials);
    report.observer_flagged = report.excluded_fraction >= config.flag_fraction;
    result.reports.push_back(report);
  }
  return result;
}

bool ObserverFilter::admits(const std::string& observer_id) const {
  if (deny.count(observer_id) != 0) return false;
  return allow.empty() || allow.count(observer_id) != 0;
}

std::vector<TrialRecord> apply_observer_filter(std::span<const TrialRecord> trials,
                                               const ObserverFilter& filter) {
  std::vector<TrialRecord> out(trials.begin(), trials.end());
  for (auto& trial : out) {
    if (!trial.excluded && !filter.admits(trial.observer_id)) {
      trial.excluded = true;
      trial.exclusion_reason = kReasonDenied;
    }
  }
  return out;
}

std::vector<TrialRecord> kept_trials(std::span<const TrialRecord> trials) {
  std::vector<TrialRecord> out;
  for (const auto& trial : trials) {
    if (!trial.excluded) out.push_back(trial);
  }
  return out;
}

}  // namespace semprobe::ingest
