#include "semprobe/machine_observer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "semprobe/counter_rng.hpp"
#include "semprobe/error.hpp"
#include "semprobe/format.hpp"

namespace semprobe::machine {

LabelMap::LabelMap(std::map<std::string, std::vector<Label>> categories)
    : categories_(std::move(categories)) {}

LabelMap LabelMap::from_json_text(const std::string& text, const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::schema, source + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("categories") || !doc["categories"].is_object()) {
    throw Error(ErrorKind::schema, source + ": expected an object with a 'categories' object");
  }
  std::map<std::string, std::vector<Label>> categories;
  for (const auto& [name, labels] : doc["categories"].items()) {
    if (!labels.is_array()) {
      throw Error(ErrorKind::schema, source + ": category '" + name + "' must be an array");
    }
    auto& out = categories[name];
    for (const auto& label : labels) {
      if (!label.is_object() || !label.contains("id") || !label["id"].is_number_integer()) {
        throw Error(ErrorKind::schema,
                    source + ": labels of '" + name + "' need an integer 'id'");
      }
      out.push_back({label["id"].get<int>(), label.value("name", std::string{})});
    }
  }
  return LabelMap(std::move(categories));
}

LabelMap LabelMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open label map " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str(), path.string());
}

LabelMap LabelMap::imagenet_animals() {
  return LabelMap({
      {"duck", {{97, "drake"}, {98, "red-breasted merganser, Mergus serrator"}}},
      {"rabbit",
       {{330, "wood rabbit, cottontail, cottontail rabbit"}, {331, "hare"}, {332, "Angora, Angora rabbit"}}},
      {"elephant",
       {{385, "Indian elephant, Elephas maximus"}, {386, "African elephant, Loxodonta africana"}}},
  });
}

const std::vector<Label>& LabelMap::labels(const std::string& category) const {
  auto it = categories_.find(category);
  if (it == categories_.end()) {
    throw Error(ErrorKind::validation, "label map has no category '" + category + "'");
  }
  return it->second;
}

void LabelMap::validate_pair(const CategoryPair& pair) const {
  pair.validate();
  const auto& a = labels(pair.category_a);
  const auto& b = labels(pair.category_b);
  if (a.empty() || b.empty()) {
    throw Error(ErrorKind::validation, "label sets of a category pair must be non-empty");
  }
  std::set<int> seen;
  for (const auto& label : a) {
    if (!seen.insert(label.id).second) {
      throw Error(ErrorKind::validation, "label " + std::to_string(label.id) + " repeated");
    }
  }
  for (const auto& label : b) {
    if (!seen.insert(label.id).second) {
      throw Error(ErrorKind::validation, "label " + std::to_string(label.id) +
                                             " appears in both '" + pair.category_a +
                                             "' and '" + pair.category_b + "'");
    }
  }
}

std::vector<int> LabelMap::pair_label_ids(const CategoryPair& pair) const {
  std::vector<int> ids;
  for (const auto& label : labels(pair.category_a)) ids.push_back(label.id);
  for (const auto& label : labels(pair.category_b)) ids.push_back(label.id);
  return ids;
}

namespace {

double category_mean(const SoftmaxRecord& record, const std::vector<Label>& labels) {
  double sum = 0.0;
  for (const auto& label : labels) {
    auto it = std::find_if(record.entries.begin(), record.entries.end(),
                           [&](const SoftmaxEntry& e) { return e.label_id == label.id; });
    if (it == record.entries.end()) {
      throw Error(ErrorKind::schema, "softmax record " + record.image_ref + " / " +
                                         record.model_id + " lacks mapped label " +
                                         std::to_string(label.id));
    }
    if (!(it->probability >= 0.0 && it->probability <= 1.0)) {
      throw Error(ErrorKind::schema, "softmax record " + record.image_ref + " / " +
                                         record.model_id + ": probability of label " +
                                         std::to_string(label.id) + " outside [0, 1]");
    }
    sum += it->probability;
  }
  return sum / static_cast<double>(labels.size());
}

}  // namespace

double category_probability(const SoftmaxRecord& record, const LabelMap& labels,
                            const CategoryPair& pair) {
  labels.validate_pair(pair);
  double mean_a = category_mean(record, labels.labels(pair.category_a));
  double mean_b = category_mean(record, labels.labels(pair.category_b));
  double denominator = mean_a + mean_b;
  if (denominator == 0.0) {
    throw Error(ErrorKind::undefined_ratio, "softmax record " + record.image_ref + " / " +
                                                record.model_id +
                                                ": both category means are zero");
  }
  return mean_b / denominator;
}

std::uint64_t trial_stream_key(std::uint64_t rng_seed, const std::string& model_id,
                               const StimulusCondition& condition) {
  return KeyHasher{}
      .add(rng_seed)
      .add(model_id)
      .add(condition.pair_id)
      .add(condition.alpha)
      .add(condition.guidance_scale)
      .add(condition.seed)
      .finish();
}

std::vector<TrialRecord> bernoulli_trials(double p, const MachineTrialConfig& config,
                                          const StimulusCondition& condition,
                                          const std::string& model_id) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorKind::domain, "Bernoulli probability " + format_shortest(p) +
                                       " outside [0, 1]");
  }
  if (config.trials_per_image < 1) {
    throw Error(ErrorKind::validation, "trials_per_image must be at least 1");
  }
  const CounterRng rng(trial_stream_key(config.rng_seed, model_id, condition));
  std::vector<TrialRecord> trials;
  trials.reserve(static_cast<std::size_t>(config.trials_per_image));
  for (int i = 0; i < config.trials_per_image; ++i) {
    TrialRecord trial;
    trial.observer_id = model_id;
    trial.observer_kind = ObserverKind::machine;
    trial.condition = condition;
    trial.response = rng.uniform(static_cast<std::uint64_t>(i)) < p ? Choice::category_b
                                                                    : Choice::category_a;
    trial.trial_index = static_cast<std::uint64_t>(i);
    trials.push_back(std::move(trial));
  }
  return trials;
}

std::vector<ResponseCurve> build_response_curves(std::span<const TrialRecord> trials) {
  if (trials.empty()) return {};
  const std::string& pair_id = trials.front().condition.pair_id;

  using CurveKey = std::tuple<std::string, double>;
  struct Accumulator {
    ObserverKind kind = ObserverKind::human;
    std::map<double, CurvePoint> points;
  };
  std::map<CurveKey, Accumulator> grouped;

  for (const auto& trial : trials) {
    if (trial.condition.pair_id != pair_id) {
      throw Error(ErrorKind::domain, "trials mix pair ids '" + pair_id + "' and '" +
                                         trial.condition.pair_id + "'");
    }
    if (trial.excluded) {
      throw Error(ErrorKind::domain, "excluded trial of " + trial.observer_id +
                                         " passed to curve construction");
    }
    auto& acc = grouped[{trial.observer_id, trial.condition.guidance_scale}];
    acc.kind = trial.observer_kind;
    auto& point = acc.points[trial.condition.alpha];
    point.alpha = trial.condition.alpha;
    ++point.n_total;
    if (trial.response == Choice::category_b) ++point.n_b;
  }

  std::vector<ResponseCurve> curves;
  curves.reserve(grouped.size());
  for (auto& [key, acc] : grouped) {
    ResponseCurve curve;
    curve.observer_id = std::get<0>(key);
    curve.observer_kind = acc.kind;
    curve.pair_id = pair_id;
    curve.guidance_scale = std::get<1>(key);
    for (auto& [alpha, point] : acc.points) curve.points.push_back(point);
    curves.push_back(std::move(curve));
  }
  return curves;
}

}  // namespace semprobe::machine
