#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "semprobe/machine_observer.hpp"
#include "semprobe/types.hpp"

namespace semprobe::machine {

/// Reads a softmax file in either layout (see docs/formats.md):
///   long:     image_ref,model_id,label_id,probability   (one label per line)
///   columnar: image_ref,model_id,<label_id>,<label_id>,... (one image per line)
/// The layout is detected from the header. Records come back in first-seen
/// (image_ref, model_id) order with entries in file order.
std::vector<SoftmaxRecord> read_softmax(std::istream& in, const std::string& source);
std::vector<SoftmaxRecord> load_softmax(const std::filesystem::path& path);

/// Writes the long layout.
void write_softmax(std::ostream& out, const std::vector<SoftmaxRecord>& records);

/// Recovers the condition from a generated image name
/// "{pair}_{guidance}_{alpha}_{seed}.png" (directories are ignored).
std::optional<StimulusCondition> condition_from_image_ref(const std::string& image_ref);

/// Inverse of condition_from_image_ref.
std::string image_ref_for(const std::string& pair_id, double guidance_scale, double alpha,
                          std::uint64_t seed);

}  // namespace semprobe::machine
