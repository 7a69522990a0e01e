#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "semprobe/manifest.hpp"
#include "semprobe/trial_log.hpp"
#include "semprobe/types.hpp"

namespace semprobe::service {

struct PresentationConfig {
  int stimulus_duration_ms = 500;
  bool inter_trial_auto_advance = true;
  /// Placeholders resolved against the session pair when empty.
  std::string response_key_a;
  std::string response_key_b;

  void validate() const;
};

enum class SessionState { active, complete, abandoned };

std::string_view to_string(SessionState state);

struct Session {
  std::string session_id;
  std::string observer_id;
  std::string manifest_id;
  CategoryPair pair;
  std::uint64_t rng_seed = 0;
  std::vector<std::size_t> trial_order;  // permutation of manifest indices
  std::size_t cursor = 0;
  SessionState state = SessionState::active;
  std::string created_at;
};

struct ClientTimestamps {
  std::string presented_at;  // ISO-8601 from the client, may be empty
  std::string responded_at;
};

struct Ack {
  std::string session_id;
  std::size_t trial_index = 0;
  std::size_t cursor = 0;  // cursor right after this response was recorded
  std::string received_at;

  friend bool operator==(const Ack&, const Ack&) = default;
};

struct TrialPrompt {
  std::size_t trial_index = 0;
  std::size_t total_trials = 0;
  StimulusCondition condition;
  PresentationConfig presentation;
};

struct SessionComplete {};

using NextTrial = std::variant<TrialPrompt, SessionComplete>;

struct ExportFilter {
  std::string manifest_id;
  std::optional<std::string> observer_id;
  std::set<SessionState> states;  // empty = any state
};

/// Uniform random permutation of [0, n) from a seeded Fisher-Yates shuffle
/// driven by the counter generator.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

struct StoreOptions {
  bool allow_concurrent_sessions = false;  // per observer
  std::chrono::seconds idle_ttl{std::chrono::hours(2)};
  PresentationConfig presentation;
  /// Wall clock used for server receipt times; injectable for tests.
  std::function<std::chrono::system_clock::time_point()> clock =
      [] { return std::chrono::system_clock::now(); };
};

/// Durable 2AFC session state.
///
/// Layout under the data directory:
///   manifests/<id>.json       stimulus manifests (read at open)
///   sessions/<id>.journal     append-only JSON lines, fsync'd before ack
///   index.json                compacted session index, rebuilt on open
///
/// Journals are the source of truth; a torn trailing line (crash while
/// writing) is ignored on replay because it was never acknowledged.
class SessionStore {
 public:
  SessionStore(std::filesystem::path data_dir, StoreOptions options = {});
  ~SessionStore();

  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  /// Validates and persists a manifest under manifests/.
  void add_manifest(const Manifest& manifest);
  std::optional<Manifest> manifest(const std::string& manifest_id) const;
  std::vector<std::string> manifest_ids() const;

  Session create_session(const std::string& observer_id, const std::string& manifest_id,
                         std::uint64_t rng_seed);
  std::optional<Session> session(const std::string& session_id) const;
  std::vector<Session> sessions() const;

  /// Does not advance the cursor. Throws Error(not_found) for unknown
  /// sessions and Error(validation) for abandoned ones.
  NextTrial next_trial(const std::string& session_id);

  /// Durable before return. Resubmitting an acknowledged index returns the
  /// original ack unchanged. Throws SequencingError for indices past the
  /// cursor and Error(validation) for labels outside the pair or a negative
  /// reaction time.
  Ack submit_response(const std::string& session_id, std::size_t trial_index,
                      const std::string& response, double reaction_time_ms,
                      const ClientTimestamps& timestamps = {});

  /// Marks active sessions idle for longer than the TTL as abandoned.
  /// Returns the affected session ids.
  std::vector<std::string> sweep_idle();

  ingest::TrialLog export_trials(const ExportFilter& filter) const;

  const std::filesystem::path& data_dir() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string format_iso8601(std::chrono::system_clock::time_point time);

}  // namespace semprobe::service
