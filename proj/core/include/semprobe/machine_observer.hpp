#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "semprobe/types.hpp"

namespace semprobe::machine {

struct Label {
  int id = 0;
  std::string name;
};

/// Category name -> classifier labels pooled into that category.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(std::map<std::string, std::vector<Label>> categories);

  /// JSON: {"categories": {"duck": [{"id": 97, "name": "drake"}, ...], ...}}
  static LabelMap load(const std::filesystem::path& path);
  static LabelMap from_json_text(const std::string& text, const std::string& source = "<text>");

  /// ImageNet-1k labels for duck, rabbit and elephant.
  static LabelMap imagenet_animals();

  const std::vector<Label>& labels(const std::string& category) const;
  bool contains(const std::string& category) const { return categories_.count(category) != 0; }
  const std::map<std::string, std::vector<Label>>& categories() const { return categories_; }

  /// Both categories present, non-empty and disjoint; throws Error(validation).
  void validate_pair(const CategoryPair& pair) const;

  /// Label ids of category_a then category_b, each in map order.
  std::vector<int> pair_label_ids(const CategoryPair& pair) const;

 private:
  std::map<std::string, std::vector<Label>> categories_;
};

struct SoftmaxEntry {
  int label_id = 0;
  double probability = 0.0;

  friend bool operator==(const SoftmaxEntry&, const SoftmaxEntry&) = default;
};

/// Classifier output for one image, restricted to the labels of interest.
struct SoftmaxRecord {
  std::string image_ref;
  std::string model_id;
  std::vector<SoftmaxEntry> entries;

  friend bool operator==(const SoftmaxRecord&, const SoftmaxRecord&) = default;
};

struct MachineTrialConfig {
  std::uint64_t rng_seed = 0;
  int trials_per_image = 1;
};

/// Ratio of per-category mean softmax probabilities:
///   mean_b / (mean_a + mean_b), mean_c = (1/|L_c|) sum_{i in L_c} p_i.
///
/// Throws Error(schema) when a mapped label is missing or a probability is
/// outside [0, 1], and Error(undefined_ratio) when both means are zero.
double category_probability(const SoftmaxRecord& record, const LabelMap& labels,
                            const CategoryPair& pair);

/// Key of the per-image random stream.
std::uint64_t trial_stream_key(std::uint64_t rng_seed, const std::string& model_id,
                               const StimulusCondition& condition);

/// trials_per_image simulated 2AFC responses, category_b with probability p.
/// trial_index runs 0..trials_per_image-1.
std::vector<TrialRecord> bernoulli_trials(double p, const MachineTrialConfig& config,
                                          const StimulusCondition& condition,
                                          const std::string& model_id);

/// Groups non-excluded trials by (observer, guidance scale) and counts
/// category_b responses per alpha. Output is sorted by (observer, guidance
/// scale). Throws Error(domain) for mixed pair ids or excluded input trials.
std::vector<ResponseCurve> build_response_curves(std::span<const TrialRecord> trials);

}  // namespace semprobe::machine
