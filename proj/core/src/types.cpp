#include "semprobe/types.hpp"

#include <cmath>

#include "semprobe/error.hpp"
#include "semprobe/format.hpp"

namespace semprobe {

void validate(const StimulusCondition& condition) {
  if (!(condition.alpha >= 0.0 && condition.alpha <= 1.0)) {
    throw Error(ErrorKind::validation,
                "alpha " + format_shortest(condition.alpha) + " outside [0, 1]");
  }
  if (!(condition.guidance_scale > 0.0) || !std::isfinite(condition.guidance_scale)) {
    throw Error(ErrorKind::validation,
                "guidance scale " + format_shortest(condition.guidance_scale) + " must be positive");
  }
  if (condition.pair_id.empty()) throw Error(ErrorKind::validation, "empty pair id");
}

ConditionKey key_of(const StimulusCondition& condition) {
  return {condition.pair_id, condition.alpha, condition.guidance_scale, condition.seed};
}

CategoryPair CategoryPair::parse(std::string_view pair_id) {
  auto parts = split(pair_id, '-');
  if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) {
    throw Error(ErrorKind::validation,
                "pair id '" + std::string(pair_id) + "' is not of the form <a>-<b>");
  }
  CategoryPair pair{std::string(parts[0]), std::string(parts[1])};
  pair.validate();
  return pair;
}

void CategoryPair::validate() const {
  if (category_a.empty() || category_b.empty()) {
    throw Error(ErrorKind::validation, "category names must be non-empty");
  }
  if (category_a == category_b) {
    throw Error(ErrorKind::validation, "categories must differ: '" + category_a + "'");
  }
}

std::string_view to_string(ObserverKind kind) {
  return kind == ObserverKind::human ? "human" : "machine";
}

std::optional<ObserverKind> parse_observer_kind(std::string_view text) {
  if (text == "human") return ObserverKind::human;
  if (text == "machine") return ObserverKind::machine;
  return std::nullopt;
}

void ResponseCurve::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& point = points[i];
    if (point.n_b > point.n_total) {
      throw Error(ErrorKind::domain, "curve " + observer_id + ": n_b exceeds n_total at alpha " +
                                         format_shortest(point.alpha));
    }
    if (!std::isfinite(point.alpha)) {
      throw Error(ErrorKind::domain, "curve " + observer_id + ": non-finite alpha");
    }
    if (i > 0 && !(point.alpha > points[i - 1].alpha)) {
      throw Error(ErrorKind::domain,
                  "curve " + observer_id + ": alpha levels must be strictly increasing");
    }
  }
}

std::uint64_t ResponseCurve::total_trials() const {
  std::uint64_t total = 0;
  for (const auto& point : points) total += point.n_total;
  return total;
}

}  // namespace semprobe
