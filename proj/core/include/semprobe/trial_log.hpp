#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "semprobe/types.hpp"

namespace semprobe::ingest {

inline constexpr int kTrialLogVersion = 1;

/// A trial log: the category pair that names the responses, free-form
/// key=value metadata from the header (e.g. rng_seed) and the rows.
struct TrialLog {
  CategoryPair pair;
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<TrialRecord> trials;
};

/// Column order of the delimited body.
inline constexpr const char* kTrialLogColumns =
    "observer_id,observer_kind,pair_id,alpha,guidance_scale,seed,response,"
    "reaction_time_ms,presented_at_iso8601,trial_index";

/// Every row becomes a TrialRecord or a ParseError naming its line. Rejects
/// unsupported versions, unknown category labels, malformed rows and
/// duplicate (observer, condition, trial_index) keys.
TrialLog read_trial_log(std::istream& in, const std::string& source);
TrialLog parse_trial_log(const std::filesystem::path& path);

/// Byte-stable writer; read_trial_log(write_trial_log(x)) == x.
void write_trial_log(std::ostream& out, const TrialLog& log);
void save_trial_log(const std::filesystem::path& path, const TrialLog& log);

}  // namespace semprobe::ingest
