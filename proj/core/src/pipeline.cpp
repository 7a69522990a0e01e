#include "semprobe/pipeline.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "parallel.hpp"
#include "semprobe/error.hpp"
#include "semprobe/format.hpp"
#include "semprobe/softmax_io.hpp"

namespace semprobe::analysis {

SimulateResult simulate(const std::vector<machine::SoftmaxRecord>& records,
                        const machine::LabelMap& labels, const SimulateOptions& options) {
  labels.validate_pair(options.pair);
  if (options.trials.trials_per_image < 1) {
    throw Error(ErrorKind::validation, "trials_per_image must be at least 1");
  }
  const std::string pair_id = options.pair.pair_id();

  std::map<std::string, StimulusCondition> by_ref;
  if (options.manifest) {
    for (const auto& condition : options.manifest->conditions) by_ref[condition.image_ref] = condition;
  }

  // Resolve conditions serially so errors name the first offending record.
  std::vector<StimulusCondition> conditions(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& record = records[i];
    std::optional<StimulusCondition> condition;
    if (options.manifest) {
      auto it = by_ref.find(record.image_ref);
      if (it != by_ref.end()) condition = it->second;
    } else {
      condition = machine::condition_from_image_ref(record.image_ref);
    }
    if (!condition) {
      throw Error(ErrorKind::schema, "cannot resolve stimulus condition of image '" +
                                         record.image_ref + "'");
    }
    validate(*condition);
    if (condition->pair_id != pair_id) {
      throw Error(ErrorKind::schema, "image '" + record.image_ref + "' belongs to pair '" +
                                         condition->pair_id + "', not '" + pair_id + "'");
    }
    conditions[i] = *condition;
  }

  struct Outcome {
    std::vector<TrialRecord> trials;
    std::string warning;
  };
  std::vector<Outcome> outcomes(records.size());
  detail::parallel_for(records.size(), options.threads, [&](std::size_t i) {
    try {
      double p = machine::category_probability(records[i], labels, options.pair);
      outcomes[i].trials =
          machine::bernoulli_trials(p, options.trials, conditions[i], records[i].model_id);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::undefined_ratio) throw;
      outcomes[i].warning = std::string(e.what()) + "; trial skipped";
    }
  });

  SimulateResult result;
  result.log.pair = options.pair;
  result.log.metadata.emplace_back("rng_seed", std::to_string(options.trials.rng_seed));
  result.log.metadata.emplace_back("trials_per_image",
                                   std::to_string(options.trials.trials_per_image));
  if (records.empty()) result.warnings.push_back("softmax input contains no records");
  for (auto& outcome : outcomes) {
    if (!outcome.warning.empty()) {
      result.warnings.push_back(outcome.warning);
      ++result.skipped_records;
    }
    for (auto& trial : outcome.trials) result.log.trials.push_back(std::move(trial));
  }
  std::stable_sort(result.log.trials.begin(), result.log.trials.end(),
                   [](const TrialRecord& a, const TrialRecord& b) {
                     return std::tie(a.observer_id, a.condition.pair_id,
                                     a.condition.guidance_scale, a.condition.alpha,
                                     a.condition.seed, a.trial_index) <
                            std::tie(b.observer_id, b.condition.pair_id,
                                     b.condition.guidance_scale, b.condition.alpha,
                                     b.condition.seed, b.trial_index);
                   });
  for (std::size_t i = 1; i < result.log.trials.size(); ++i) {
    const auto& a = result.log.trials[i - 1];
    const auto& b = result.log.trials[i];
    if (a.observer_id == b.observer_id && key_of(a.condition) == key_of(b.condition) &&
        a.trial_index == b.trial_index) {
      throw Error(ErrorKind::schema, "softmax input repeats image '" + b.condition.image_ref +
                                         "' for model '" + b.observer_id + "'");
    }
  }
  return result;
}

std::vector<ResponseCurve> curves_from_log(const ingest::TrialLog& log,
                                           const ingest::ExclusionConfig& exclusion,
                                           const ingest::ObserverFilter& observers) {
  auto filtered = ingest::apply_observer_filter(log.trials, observers);
  auto excluded = ingest::apply_rt_exclusion(filtered, exclusion);
  auto kept = ingest::kept_trials(excluded.trials);

  // Curves are per pair; a log may hold several.
  std::map<std::string, std::vector<TrialRecord>> by_pair;
  for (auto& trial : kept) by_pair[trial.condition.pair_id].push_back(std::move(trial));
  std::vector<ResponseCurve> curves;
  for (auto& [pair_id, trials] : by_pair) {
    auto built = machine::build_response_curves(trials);
    curves.insert(curves.end(), built.begin(), built.end());
  }
  return curves;
}

FitBatch fit_log(const ingest::TrialLog& log, const FitOptions& options) {
  options.config.fit.validate();
  FitBatch batch;
  auto filtered = ingest::apply_observer_filter(log.trials, options.observers);
  auto excluded = ingest::apply_rt_exclusion(filtered, options.config.exclusion);
  batch.exclusions = excluded.reports;
  for (const auto& report : batch.exclusions) {
    if (report.observer_flagged) {
      batch.warnings.push_back("observer '" + report.observer_id + "' has " +
                               format_fixed(100.0 * report.excluded_fraction, 1) +
                               "% of trials outside the reaction-time window");
    }
  }

  auto curves = curves_from_log(log, options.config.exclusion, options.observers);
  batch.rows.resize(curves.size());
  detail::parallel_for(curves.size(), options.threads, [&](std::size_t i) {
    const auto& curve = curves[i];
    try {
      auto fit = fit_psychometric(curve, options.config.fit);
      batch.rows[i] = make_fit_row(curve, fit, options.config.fit.gof_critical);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::insufficient_data && e.kind() != ErrorKind::domain) throw;
      batch.rows[i] = make_error_row(curve, e.what());
    }
  });

  for (const auto& row : batch.rows) {
    std::string cell = row.observer_id + " @ GS " + format_shortest(row.guidance_scale);
    if (!row.error.empty()) {
      ++batch.failed_cells;
      batch.warnings.push_back(cell + ": " + row.error);
    } else if (row.degenerate) {
      ++batch.degenerate_cells;
      batch.warnings.push_back(cell + ": degenerate curve (all responses in one category)");
    } else if (!row.converged) {
      batch.warnings.push_back(cell + ": optimizer hit the iteration limit");
    }
  }
  std::stable_sort(batch.rows.begin(), batch.rows.end(), [](const FitRow& a, const FitRow& b) {
    return std::tie(a.pair_id, a.observer_id, a.guidance_scale) <
           std::tie(b.pair_id, b.observer_id, b.guidance_scale);
  });
  return batch;
}

}  // namespace semprobe::analysis
