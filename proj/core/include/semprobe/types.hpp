#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace semprobe {

/// One cell of the factorial stimulus design.
struct StimulusCondition {
  std::string pair_id;
  double alpha = 0.0;           // semantic mixing ratio in [0, 1]
  double guidance_scale = 0.0;  // classifier-free guidance strength, > 0
  std::uint64_t seed = 0;
  std::string image_ref;

  friend bool operator==(const StimulusCondition&, const StimulusCondition&) = default;
};

/// Throws Error(validation) when alpha or guidance_scale is out of range.
void validate(const StimulusCondition& condition);

/// Identity of a condition within a manifest; image_ref is not part of it.
struct ConditionKey {
  std::string pair_id;
  double alpha = 0.0;
  double guidance_scale = 0.0;
  std::uint64_t seed = 0;

  friend auto operator<=>(const ConditionKey&, const ConditionKey&) = default;
};

ConditionKey key_of(const StimulusCondition& condition);

/// The two response categories of an experiment. P(category_b) is the
/// modeled quantity.
struct CategoryPair {
  std::string category_a;
  std::string category_b;

  /// "duck-rabbit" -> {duck, rabbit}.
  static CategoryPair parse(std::string_view pair_id);

  std::string pair_id() const { return category_a + "-" + category_b; }
  void validate() const;

  friend bool operator==(const CategoryPair&, const CategoryPair&) = default;
};

enum class ObserverKind { human, machine };

std::string_view to_string(ObserverKind kind);
std::optional<ObserverKind> parse_observer_kind(std::string_view text);

enum class Choice { category_a, category_b };

/// One observer response to one stimulus.
struct TrialRecord {
  std::string observer_id;
  ObserverKind observer_kind = ObserverKind::human;
  StimulusCondition condition;
  Choice response = Choice::category_a;
  std::optional<double> reaction_time_ms;  // absent for machine observers
  std::string presented_at;                // ISO-8601, empty when not applicable
  std::uint64_t trial_index = 0;
  bool excluded = false;
  std::string exclusion_reason;  // non-empty iff excluded

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct CurvePoint {
  double alpha = 0.0;
  std::uint64_t n_b = 0;
  std::uint64_t n_total = 0;

  double proportion() const {
    return n_total == 0 ? 0.0 : static_cast<double>(n_b) / static_cast<double>(n_total);
  }

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// Per observer x guidance scale: category-b counts at each alpha level.
struct ResponseCurve {
  std::string observer_id;
  ObserverKind observer_kind = ObserverKind::human;
  std::string pair_id;
  double guidance_scale = 0.0;
  std::vector<CurvePoint> points;  // strictly increasing alpha

  /// Checks n_b <= n_total and strictly increasing alphas.
  void validate() const;

  std::uint64_t total_trials() const;

  friend bool operator==(const ResponseCurve&, const ResponseCurve&) = default;
};

}  // namespace semprobe
