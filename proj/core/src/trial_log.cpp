#include "semprobe/trial_log.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "semprobe/error.hpp"
#include "semprobe/format.hpp"

namespace semprobe::ingest {

namespace {

constexpr std::string_view kMagic = "#semprobe-trials";

bool safe_field(std::string_view text) {
  return text.find_first_of(",\n\r") == std::string_view::npos;
}

bool safe_token(std::string_view text) {
  return !text.empty() && text.find_first_of(" \t\n\r=") == std::string_view::npos;
}

}  // namespace

TrialLog read_trial_log(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  TrialLog log;

  if (!std::getline(in, line)) {
    throw ParseError(ErrorKind::schema, source, 1, "missing '#semprobe-trials' header");
  }
  ++line_no;
  {
    std::istringstream header{std::string(trim(line))};
    std::string magic, version;
    header >> magic >> version;
    if (magic != kMagic) {
      throw ParseError(ErrorKind::schema, source, line_no, "missing '#semprobe-trials' header");
    }
    if (version != "v" + std::to_string(kTrialLogVersion)) {
      throw ParseError(ErrorKind::schema, source, line_no,
                       "unsupported trial log version '" + version + "'");
    }
    std::string token;
    while (header >> token) {
      auto eq = token.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ParseError(ErrorKind::schema, source, line_no,
                         "header token '" + token + "' is not key=value");
      }
      std::string key = token.substr(0, eq);
      std::string value = token.substr(eq + 1);
      if (key == "category_a") {
        log.pair.category_a = value;
      } else if (key == "category_b") {
        log.pair.category_b = value;
      } else {
        log.metadata.emplace_back(key, value);
      }
    }
    try {
      log.pair.validate();
    } catch (const Error& e) {
      throw ParseError(ErrorKind::schema, source, line_no, e.what());
    }
  }

  if (!std::getline(in, line)) {
    throw ParseError(ErrorKind::schema, source, line_no + 1, "missing column header");
  }
  ++line_no;
  if (trim(line) != kTrialLogColumns) {
    throw ParseError(ErrorKind::schema, source, line_no,
                     "column header must be '" + std::string(kTrialLogColumns) + "'");
  }

  using Key = std::tuple<std::string, ConditionKey, std::uint64_t>;
  std::set<Key> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fail = [&](const std::string& detail) {
      throw ParseError(ErrorKind::schema, source, line_no, detail);
    };
    auto fields = split(line, ',');
    if (fields.size() != 10) {
      fail("expected 10 fields, got " + std::to_string(fields.size()));
    }

    TrialRecord trial;
    trial.observer_id = std::string(fields[0]);
    if (trial.observer_id.empty()) fail("empty observer_id");
    auto kind = parse_observer_kind(fields[1]);
    if (!kind) {
      throw ParseError(ErrorKind::validation, source, line_no,
                       "unknown observer_kind '" + std::string(fields[1]) + "'");
    }
    trial.observer_kind = *kind;

    trial.condition.pair_id = std::string(fields[2]);
    if (trial.condition.pair_id != log.pair.pair_id()) {
      fail("pair_id '" + trial.condition.pair_id + "' does not match header pair '" +
           log.pair.pair_id() + "'");
    }
    auto alpha = parse_double(fields[3]);
    auto guidance = parse_double(fields[4]);
    auto seed = parse_uint(fields[5]);
    if (!alpha) fail("malformed alpha '" + std::string(fields[3]) + "'");
    if (!guidance) fail("malformed guidance_scale '" + std::string(fields[4]) + "'");
    if (!seed) fail("malformed seed '" + std::string(fields[5]) + "'");
    trial.condition.alpha = *alpha;
    trial.condition.guidance_scale = *guidance;
    trial.condition.seed = *seed;
    try {
      validate(trial.condition);
    } catch (const Error& e) {
      fail(e.what());
    }

    if (fields[6] == log.pair.category_a) {
      trial.response = Choice::category_a;
    } else if (fields[6] == log.pair.category_b) {
      trial.response = Choice::category_b;
    } else {
      fail("unknown category label '" + std::string(fields[6]) + "' (expected '" +
           log.pair.category_a + "' or '" + log.pair.category_b + "')");
    }

    if (!fields[7].empty()) {
      auto rt = parse_double(fields[7]);
      if (!rt || *rt < 0.0) fail("malformed reaction_time_ms '" + std::string(fields[7]) + "'");
      trial.reaction_time_ms = *rt;
    }
    trial.presented_at = std::string(fields[8]);
    auto index = parse_uint(fields[9]);
    if (!index) fail("malformed trial_index '" + std::string(fields[9]) + "'");
    trial.trial_index = *index;

    if (!seen.insert({trial.observer_id, key_of(trial.condition), trial.trial_index}).second) {
      fail("duplicate (observer, condition, trial_index) for observer '" + trial.observer_id + "'");
    }
    log.trials.push_back(std::move(trial));
  }
  return log;
}

TrialLog parse_trial_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open trial log " + path.string());
  return read_trial_log(in, path.string());
}

void write_trial_log(std::ostream& out, const TrialLog& log) {
  log.pair.validate();
  if (!safe_token(log.pair.category_a) || !safe_token(log.pair.category_b)) {
    throw Error(ErrorKind::validation, "category names may not contain whitespace or '='");
  }
  out << kMagic << " v" << kTrialLogVersion << " category_a=" << log.pair.category_a
      << " category_b=" << log.pair.category_b;
  for (const auto& [key, value] : log.metadata) {
    if (!safe_token(key) || !safe_token(value)) {
      throw Error(ErrorKind::validation, "metadata '" + key + "' is not a plain token");
    }
    out << ' ' << key << '=' << value;
  }
  out << '\n' << kTrialLogColumns << '\n';

  for (const auto& trial : log.trials) {
    if (!safe_field(trial.observer_id) || !safe_field(trial.condition.pair_id) ||
        !safe_field(trial.presented_at)) {
      throw Error(ErrorKind::validation,
                  "trial of '" + trial.observer_id + "' has a field containing a delimiter");
    }
    const std::string& label =
        trial.response == Choice::category_a ? log.pair.category_a : log.pair.category_b;
    out << trial.observer_id << ',' << to_string(trial.observer_kind) << ','
        << trial.condition.pair_id << ',' << format_shortest(trial.condition.alpha) << ','
        << format_shortest(trial.condition.guidance_scale) << ',' << trial.condition.seed << ','
        << label << ','
        << (trial.reaction_time_ms ? format_shortest(*trial.reaction_time_ms) : std::string{})
        << ',' << trial.presented_at << ',' << trial.trial_index << '\n';
  }
}

void save_trial_log(const std::filesystem::path& path, const TrialLog& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write trial log " + path.string());
  write_trial_log(out, log);
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

}  // namespace semprobe::ingest
