#include "semprobe/session_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "semprobe/counter_rng.hpp"
#include "semprobe/error.hpp"
#include "semprobe/format.hpp"

namespace semprobe::service {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::system_clock;

void PresentationConfig::validate() const {
  if (stimulus_duration_ms <= 0) {
    throw Error(ErrorKind::validation, "stimulus_duration_ms must be positive");
  }
}

std::string_view to_string(SessionState state) {
  switch (state) {
    case SessionState::active: return "active";
    case SessionState::complete: return "complete";
    case SessionState::abandoned: return "abandoned";
  }
  return "unknown";
}

std::string format_iso8601(Clock::time_point time) {
  auto millis = std::chrono::duration_cast<std::chrono::milliseconds>(time.time_since_epoch());
  std::time_t seconds = static_cast<std::time_t>(millis.count() / 1000);
  int remainder = static_cast<int>(millis.count() % 1000);
  if (remainder < 0) {
    remainder += 1000;
    --seconds;
  }
  std::tm utc{};
  gmtime_r(&seconds, &utc);
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                utc.tm_year + 1900, utc.tm_mon + 1, utc.tm_mday, utc.tm_hour, utc.tm_min,
                utc.tm_sec, remainder);
  return buffer;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const CounterRng rng(KeyHasher{}.add(std::string_view("trial-order")).add(seed).finish());
  // Fisher-Yates; the bounded draw uses rejection to stay exactly uniform.
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t counter = static_cast<std::uint64_t>(i) << 8;
    std::uint64_t draw = rng.bits(counter);
    while (draw >= limit) draw = rng.bits(++counter);
    std::swap(order[i - 1], order[draw % bound]);
  }
  return order;
}

namespace {

std::int64_t epoch_ms(Clock::time_point time) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(time.time_since_epoch()).count();
}

[[noreturn]] void io_failure(const std::string& what, const fs::path& path) {
  throw Error(ErrorKind::io, what + " " + path.string() + ": " + std::strerror(errno));
}

void write_all(int fd, const std::string& data, const fs::path& path) {
  const char* cursor = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    ssize_t written = ::write(fd, cursor, left);
    if (written < 0) {
      if (errno == EINTR) continue;
      io_failure("write to", path);
    }
    cursor += written;
    left -= static_cast<std::size_t>(written);
  }
}

void sync_directory(const fs::path& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

// Write-then-rename so readers never see a half-written file.
void atomic_write(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) io_failure("cannot create", tmp);
  write_all(fd, content, tmp);
  if (::fsync(fd) != 0) io_failure("fsync failed for", tmp);
  ::close(fd);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::io, "rename to " + path.string() + ": " + ec.message());
  sync_directory(path.parent_path());
}

struct ResponseEntry {
  std::size_t trial_index = 0;
  Choice response = Choice::category_a;
  double reaction_time_ms = 0.0;
  std::string client_presented_at;
  std::string client_responded_at;
  Ack ack;
};

struct SessionEntry {
  Session session;
  std::vector<ResponseEntry> responses;
  std::int64_t last_activity_ms = 0;
  fs::path journal;
  int fd = -1;
  std::mutex write_mutex;

  ~SessionEntry() {
    if (fd >= 0) ::close(fd);
  }

  void append(const json& record) {
    write_all(fd, record.dump() + "\n", journal);
    if (::fdatasync(fd) != 0) io_failure("fdatasync failed for", journal);
  }
};

std::string session_id_for(std::size_t number) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "s%06zu", number);
  return buffer;
}

}  // namespace

struct SessionStore::Impl {
  fs::path data_dir;
  StoreOptions options;
  mutable std::shared_mutex mutex;  // guards the maps below
  std::map<std::string, Manifest> manifests;
  std::map<std::string, std::unique_ptr<SessionEntry>> sessions;  // ordered by id
  std::size_t next_number = 1;

  fs::path manifest_dir() const { return data_dir / "manifests"; }
  fs::path session_dir() const { return data_dir / "sessions"; }

  std::int64_t now_ms() const { return epoch_ms(options.clock()); }

  void load_manifests() {
    for (const auto& entry : fs::directory_iterator(manifest_dir())) {
      if (entry.path().extension() != ".json") continue;
      auto manifest = load_manifest(entry.path());
      manifests[manifest.manifest_id] = std::move(manifest);
    }
  }

  void replay_sessions();
  void replay_one(const fs::path& journal);
  void write_index() const;

  SessionEntry& entry(const std::string& session_id) const {
    auto it = sessions.find(session_id);
    if (it == sessions.end()) {
      throw Error(ErrorKind::not_found, "unknown session '" + session_id + "'");
    }
    return *it->second;
  }
};

void SessionStore::Impl::replay_one(const fs::path& journal) {
  std::ifstream in(journal, std::ios::binary);
  if (!in) io_failure("cannot open", journal);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  auto holder = std::make_unique<SessionEntry>();
  SessionEntry& state = *holder;
  state.journal = journal;
  const Manifest* manifest = nullptr;

  std::size_t offset = 0;
  std::size_t good_end = 0;
  std::size_t line_no = 0;
  while (offset < content.size()) {
    auto newline = content.find('\n', offset);
    if (newline == std::string::npos) break;  // torn tail: never acknowledged
    ++line_no;
    std::string line = content.substr(offset, newline - offset);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error&) {
      throw ParseError(ErrorKind::schema, journal.string(), line_no, "corrupt journal record");
    }
    const std::string type = record.value("type", "");
    if (line_no == 1) {
      if (type != "create") {
        throw ParseError(ErrorKind::schema, journal.string(), 1, "journal must start with create");
      }
      auto& s = state.session;
      s.session_id = record.at("session_id").get<std::string>();
      s.observer_id = record.at("observer_id").get<std::string>();
      s.manifest_id = record.at("manifest_id").get<std::string>();
      s.pair = {record.at("category_a").get<std::string>(),
                record.at("category_b").get<std::string>()};
      s.rng_seed = record.at("rng_seed").get<std::uint64_t>();
      s.trial_order = record.at("trial_order").get<std::vector<std::size_t>>();
      s.created_at = record.at("created_at").get<std::string>();
      state.last_activity_ms = record.at("t_ms").get<std::int64_t>();
      auto it = manifests.find(s.manifest_id);
      if (it == manifests.end()) {
        throw Error(ErrorKind::not_found,
                    journal.string() + ": manifest '" + s.manifest_id + "' is missing");
      }
      manifest = &it->second;
    } else if (type == "response") {
      ResponseEntry response;
      response.trial_index = record.at("trial_index").get<std::size_t>();
      const auto label = record.at("response").get<std::string>();
      response.response =
          label == state.session.pair.category_b ? Choice::category_b : Choice::category_a;
      response.reaction_time_ms = record.at("reaction_time_ms").get<double>();
      response.client_presented_at = record.value("client_presented_at", "");
      response.client_responded_at = record.value("client_responded_at", "");
      response.ack = {state.session.session_id, response.trial_index, response.trial_index + 1,
                      record.at("received_at").get<std::string>()};
      if (response.trial_index != state.session.cursor) {
        throw ParseError(ErrorKind::schema, journal.string(), line_no,
                         "journal response out of sequence");
      }
      state.session.cursor = response.trial_index + 1;
      state.last_activity_ms = record.at("t_ms").get<std::int64_t>();
      state.responses.push_back(std::move(response));
    } else if (type == "abandon") {
      state.session.state = SessionState::abandoned;
      state.last_activity_ms = record.at("t_ms").get<std::int64_t>();
    } else {
      throw ParseError(ErrorKind::schema, journal.string(), line_no,
                       "unknown journal record '" + type + "'");
    }
    offset = newline + 1;
    good_end = offset;
  }
  if (manifest == nullptr) {
    // Crashed before the create record was durable: the id was never returned.
    fs::remove(journal);
    return;
  }
  if (state.session.state != SessionState::abandoned &&
      state.session.cursor >= state.session.trial_order.size()) {
    state.session.state = SessionState::complete;
  }

  state.fd = ::open(journal.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
  if (state.fd < 0) io_failure("cannot reopen", journal);
  if (good_end < content.size() && ::ftruncate(state.fd, static_cast<off_t>(good_end)) != 0) {
    io_failure("cannot truncate torn tail of", journal);
  }

  const auto id = state.session.session_id;
  if (id.size() > 1 && id[0] == 's') {
    if (auto number = parse_uint(std::string_view(id).substr(1))) {
      next_number = std::max<std::size_t>(next_number, *number + 1);
    }
  }
  sessions[id] = std::move(holder);
}

void SessionStore::Impl::replay_sessions() {
  std::vector<fs::path> journals;
  for (const auto& entry : fs::directory_iterator(session_dir())) {
    if (entry.path().extension() == ".journal") journals.push_back(entry.path());
  }
  std::sort(journals.begin(), journals.end());
  for (const auto& journal : journals) replay_one(journal);
}

void SessionStore::Impl::write_index() const {
  json doc;
  auto list = json::array();
  for (const auto& [id, entry] : sessions) {
    const auto& s = entry->session;
    list.push_back({{"session_id", id},
                    {"observer_id", s.observer_id},
                    {"manifest_id", s.manifest_id},
                    {"state", std::string(to_string(s.state))},
                    {"cursor", s.cursor},
                    {"total_trials", s.trial_order.size()},
                    {"created_at", s.created_at}});
  }
  doc["sessions"] = std::move(list);
  atomic_write(data_dir / "index.json", doc.dump(2) + "\n");
}

SessionStore::SessionStore(fs::path data_dir, StoreOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->data_dir = std::move(data_dir);
  impl_->options = std::move(options);
  impl_->options.presentation.validate();
  fs::create_directories(impl_->manifest_dir());
  fs::create_directories(impl_->session_dir());
  impl_->load_manifests();
  impl_->replay_sessions();
  impl_->write_index();
}

SessionStore::~SessionStore() {
  try {
    std::unique_lock lock(impl_->mutex);
    impl_->write_index();
  } catch (...) {
    // Index is a cache; journals remain authoritative.
  }
}

const fs::path& SessionStore::data_dir() const noexcept { return impl_->data_dir; }

void SessionStore::add_manifest(const Manifest& manifest) {
  validate_manifest(manifest);
  std::unique_lock lock(impl_->mutex);
  auto existing = impl_->manifests.find(manifest.manifest_id);
  const std::string text = manifest_to_json_text(manifest);
  if (existing != impl_->manifests.end()) {
    if (manifest_to_json_text(existing->second) != text) {
      throw Error(ErrorKind::conflict,
                  "manifest '" + manifest.manifest_id + "' already exists with other content");
    }
    return;
  }
  atomic_write(impl_->manifest_dir() / (manifest.manifest_id + ".json"), text);
  impl_->manifests[manifest.manifest_id] = manifest;
}

std::optional<Manifest> SessionStore::manifest(const std::string& manifest_id) const {
  std::shared_lock lock(impl_->mutex);
  auto it = impl_->manifests.find(manifest_id);
  if (it == impl_->manifests.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> SessionStore::manifest_ids() const {
  std::shared_lock lock(impl_->mutex);
  std::vector<std::string> ids;
  for (const auto& [id, manifest] : impl_->manifests) ids.push_back(id);
  return ids;
}

Session SessionStore::create_session(const std::string& observer_id,
                                     const std::string& manifest_id, std::uint64_t rng_seed) {
  if (observer_id.empty() || observer_id.find_first_of(",\n\r") != std::string::npos) {
    throw Error(ErrorKind::validation, "observer_id must be non-empty without ',' or newlines");
  }
  std::unique_lock lock(impl_->mutex);
  auto manifest = impl_->manifests.find(manifest_id);
  if (manifest == impl_->manifests.end()) {
    throw Error(ErrorKind::not_found, "unknown manifest '" + manifest_id + "'");
  }
  if (!impl_->options.allow_concurrent_sessions) {
    for (const auto& [id, entry] : impl_->sessions) {
      if (entry->session.observer_id == observer_id &&
          entry->session.state == SessionState::active) {
        throw Error(ErrorKind::conflict,
                    "observer '" + observer_id + "' already has active session " + id);
      }
    }
  }

  auto holder = std::make_unique<SessionEntry>();
  auto& s = holder->session;
  s.session_id = session_id_for(impl_->next_number);
  s.observer_id = observer_id;
  s.manifest_id = manifest_id;
  s.pair = manifest->second.pair;
  s.rng_seed = rng_seed;
  s.trial_order = seeded_permutation(manifest->second.conditions.size(), rng_seed);
  const auto now = impl_->options.clock();
  s.created_at = format_iso8601(now);
  holder->last_activity_ms = epoch_ms(now);
  holder->journal = impl_->session_dir() / (s.session_id + ".journal");

  holder->fd = ::open(holder->journal.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_APPEND | O_CLOEXEC,
                      0644);
  if (holder->fd < 0) io_failure("cannot create", holder->journal);
  json record;
  record["type"] = "create";
  record["session_id"] = s.session_id;
  record["observer_id"] = s.observer_id;
  record["manifest_id"] = s.manifest_id;
  record["category_a"] = s.pair.category_a;
  record["category_b"] = s.pair.category_b;
  record["rng_seed"] = s.rng_seed;
  record["created_at"] = s.created_at;
  record["t_ms"] = holder->last_activity_ms;
  record["trial_order"] = s.trial_order;
  holder->append(record);
  sync_directory(impl_->session_dir());

  ++impl_->next_number;
  Session copy = s;
  impl_->sessions[s.session_id] = std::move(holder);
  impl_->write_index();
  return copy;
}

std::optional<Session> SessionStore::session(const std::string& session_id) const {
  std::shared_lock lock(impl_->mutex);
  auto it = impl_->sessions.find(session_id);
  if (it == impl_->sessions.end()) return std::nullopt;
  std::lock_guard guard(it->second->write_mutex);
  return it->second->session;
}

std::vector<Session> SessionStore::sessions() const {
  std::shared_lock lock(impl_->mutex);
  std::vector<Session> out;
  for (const auto& [id, entry] : impl_->sessions) {
    std::lock_guard guard(entry->write_mutex);
    out.push_back(entry->session);
  }
  return out;
}

NextTrial SessionStore::next_trial(const std::string& session_id) {
  std::shared_lock lock(impl_->mutex);
  auto& state = impl_->entry(session_id);
  std::lock_guard guard(state.write_mutex);
  const auto& s = state.session;
  if (s.state == SessionState::abandoned) {
    throw Error(ErrorKind::validation, "session '" + session_id + "' was abandoned");
  }
  if (s.cursor >= s.trial_order.size()) return SessionComplete{};

  const auto& manifest = impl_->manifests.at(s.manifest_id);
  TrialPrompt prompt;
  prompt.trial_index = s.cursor;
  prompt.total_trials = s.trial_order.size();
  prompt.condition = manifest.conditions.at(s.trial_order[s.cursor]);
  prompt.presentation = impl_->options.presentation;
  if (prompt.presentation.response_key_a.empty()) prompt.presentation.response_key_a = s.pair.category_a;
  if (prompt.presentation.response_key_b.empty()) prompt.presentation.response_key_b = s.pair.category_b;
  return prompt;
}

Ack SessionStore::submit_response(const std::string& session_id, std::size_t trial_index,
                                  const std::string& response, double reaction_time_ms,
                                  const ClientTimestamps& timestamps) {
  bool finished = false;
  Ack ack;
  {
    std::shared_lock lock(impl_->mutex);
    auto& state = impl_->entry(session_id);
    std::lock_guard guard(state.write_mutex);
    auto& s = state.session;

    if (trial_index < s.cursor) return state.responses.at(trial_index).ack;
    if (s.state == SessionState::abandoned) {
      throw Error(ErrorKind::validation, "session '" + session_id + "' was abandoned");
    }
    if (s.cursor >= s.trial_order.size()) {
      throw Error(ErrorKind::validation, "session '" + session_id + "' is complete");
    }
    if (trial_index != s.cursor) throw SequencingError(s.cursor, trial_index);

    Choice choice;
    if (response == s.pair.category_a) {
      choice = Choice::category_a;
    } else if (response == s.pair.category_b) {
      choice = Choice::category_b;
    } else {
      throw Error(ErrorKind::validation, "response '" + response + "' is neither '" +
                                             s.pair.category_a + "' nor '" + s.pair.category_b +
                                             "'");
    }
    if (!std::isfinite(reaction_time_ms) || reaction_time_ms < 0.0) {
      throw Error(ErrorKind::validation, "reaction_time_ms must be a non-negative number");
    }
    for (const auto* stamp : {&timestamps.presented_at, &timestamps.responded_at}) {
      if (stamp->find_first_of(",\n\r") != std::string::npos) {
        throw Error(ErrorKind::validation, "client timestamps may not contain ',' or newlines");
      }
    }

    const auto now = impl_->options.clock();
    ResponseEntry entry;
    entry.trial_index = trial_index;
    entry.response = choice;
    entry.reaction_time_ms = reaction_time_ms;
    entry.client_presented_at = timestamps.presented_at;
    entry.client_responded_at = timestamps.responded_at;
    entry.ack = {session_id, trial_index, trial_index + 1, format_iso8601(now)};

    json record;
    record["type"] = "response";
    record["trial_index"] = trial_index;
    record["response"] = response;
    record["reaction_time_ms"] = reaction_time_ms;
    record["client_presented_at"] = entry.client_presented_at;
    record["client_responded_at"] = entry.client_responded_at;
    record["received_at"] = entry.ack.received_at;
    record["t_ms"] = epoch_ms(now);
    state.append(record);  // durable before the cursor moves or the ack returns

    s.cursor = trial_index + 1;
    state.last_activity_ms = epoch_ms(now);
    if (s.cursor == s.trial_order.size()) {
      s.state = SessionState::complete;
      finished = true;
    }
    ack = entry.ack;
    state.responses.push_back(std::move(entry));
  }
  if (finished) {
    std::unique_lock lock(impl_->mutex);
    impl_->write_index();
  }
  return ack;
}

std::vector<std::string> SessionStore::sweep_idle() {
  std::unique_lock lock(impl_->mutex);
  const auto now = impl_->now_ms();
  const auto ttl =
      std::chrono::duration_cast<std::chrono::milliseconds>(impl_->options.idle_ttl).count();
  std::vector<std::string> abandoned;
  for (auto& [id, entry] : impl_->sessions) {
    std::lock_guard guard(entry->write_mutex);
    if (entry->session.state != SessionState::active) continue;
    if (now - entry->last_activity_ms <= ttl) continue;
    json record;
    record["type"] = "abandon";
    record["t_ms"] = now;
    entry->append(record);
    entry->session.state = SessionState::abandoned;
    abandoned.push_back(id);
  }
  if (!abandoned.empty()) impl_->write_index();
  return abandoned;
}

ingest::TrialLog SessionStore::export_trials(const ExportFilter& filter) const {
  std::shared_lock lock(impl_->mutex);
  auto manifest_it = impl_->manifests.find(filter.manifest_id);
  if (manifest_it == impl_->manifests.end()) {
    throw Error(ErrorKind::not_found, "unknown manifest '" + filter.manifest_id + "'");
  }
  const Manifest& manifest = manifest_it->second;

  ingest::TrialLog log;
  log.pair = manifest.pair;
  log.metadata.emplace_back("manifest", manifest.manifest_id);

  // trial_index numbers an observer's exported trials across sessions, so the
  // (observer, condition, trial_index) key stays unique.
  std::map<std::string, std::uint64_t> next_index;
  for (const auto& [id, entry] : impl_->sessions) {
    std::lock_guard guard(entry->write_mutex);
    const auto& s = entry->session;
    if (s.manifest_id != filter.manifest_id) continue;
    if (filter.observer_id && s.observer_id != *filter.observer_id) continue;
    if (!filter.states.empty() && filter.states.count(s.state) == 0) continue;
    auto& index = next_index[s.observer_id];
    for (const auto& response : entry->responses) {
      TrialRecord trial;
      trial.observer_id = s.observer_id;
      trial.observer_kind = ObserverKind::human;
      trial.condition = manifest.conditions.at(s.trial_order.at(response.trial_index));
      trial.response = response.response;
      trial.reaction_time_ms = response.reaction_time_ms;
      trial.presented_at = response.client_presented_at.empty() ? response.ack.received_at
                                                                : response.client_presented_at;
      trial.trial_index = index++;
      log.trials.push_back(std::move(trial));
    }
  }
  return log;
}

}  // namespace semprobe::service
