#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semprobe/types.hpp"

namespace semprobe::service {

/// The stimulus set of one experiment.
///
///   {"manifest_id": "duck-rabbit-v1",
///    "category_a": "duck", "category_b": "rabbit",
///    "conditions": [{"pair_id": "duck-rabbit", "alpha": 0.3,
///                    "guidance_scale": 2.5, "seed": 0,
///                    "image_ref": "duck-rabbit_2.5_0.3_0.png"}, ...]}
struct Manifest {
  std::string manifest_id;
  CategoryPair pair;
  std::vector<StimulusCondition> conditions;
};

/// Schema and invariant check: valid ranges, unique condition keys, every
/// condition on the manifest's pair, non-empty image refs. Throws
/// Error(validation).
void validate_manifest(const Manifest& manifest);

Manifest manifest_from_json_text(const std::string& text, const std::string& source = "<text>");
std::string manifest_to_json_text(const Manifest& manifest);
Manifest load_manifest(const std::filesystem::path& path);

/// Full factorial grid in guidance-major, then alpha, then seed order.
Manifest factorial_manifest(const std::string& manifest_id, const CategoryPair& pair,
                            const std::vector<double>& guidance_scales,
                            const std::vector<double>& alphas, int n_seeds);

}  // namespace semprobe::service
