#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semprobe/config.hpp"
#include "semprobe/exclusion.hpp"
#include "semprobe/fit_io.hpp"
#include "semprobe/machine_observer.hpp"
#include "semprobe/manifest.hpp"
#include "semprobe/trial_log.hpp"

namespace semprobe::analysis {

struct SimulateOptions {
  CategoryPair pair;
  machine::MachineTrialConfig trials;
  int threads = 1;
  /// Maps image refs to conditions; without it conditions are decoded from
  /// generated image names.
  std::optional<service::Manifest> manifest;
};

struct SimulateResult {
  ingest::TrialLog log;
  std::vector<std::string> warnings;
  std::size_t skipped_records = 0;  // undefined ratio
};

/// Softmax records -> per-image category probability -> Bernoulli trials.
/// Rows are ordered by (model, pair, guidance, alpha, seed, draw), so the
/// output does not depend on the thread count.
SimulateResult simulate(const std::vector<machine::SoftmaxRecord>& records,
                        const machine::LabelMap& labels, const SimulateOptions& options);

struct FitOptions {
  AnalysisConfig config;
  ingest::ObserverFilter observers;
  int threads = 1;
};

struct FitBatch {
  std::vector<FitRow> rows;  // sorted by (pair, observer, guidance)
  std::vector<ingest::ExclusionReport> exclusions;
  std::vector<std::string> warnings;
  int degenerate_cells = 0;
  int failed_cells = 0;
};

/// Exclusions for human trials, then one fit per (observer, guidance scale).
/// Degenerate or unfittable cells are reported in the rows, never thrown.
FitBatch fit_log(const ingest::TrialLog& log, const FitOptions& options);

/// Curves for every (observer, guidance) in the log after exclusions.
std::vector<ResponseCurve> curves_from_log(const ingest::TrialLog& log,
                                           const ingest::ExclusionConfig& exclusion,
                                           const ingest::ObserverFilter& observers = {});

}  // namespace semprobe::analysis
