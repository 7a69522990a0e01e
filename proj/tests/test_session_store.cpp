#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "semprobe/error.hpp"
#include "semprobe/manifest.hpp"
#include "semprobe/session_store.hpp"
#include "semprobe/trial_log.hpp"
#include "temp_dir.hpp"

using namespace semprobe;
using namespace semprobe::service;
using namespace std::chrono_literals;

namespace {

const CategoryPair kPair{"duck", "rabbit"};

Manifest standard_manifest() {
  return factorial_manifest("dr", kPair, {2.5, 5, 7.5, 10, 12.5, 15}, {0.3, 0.4, 0.5, 0.6, 0.7}, 10);
}

class SessionStoreTest : public ::testing::Test {
 protected:
  void SetUp() override { reopen(); }

  void reopen() {
    store.reset();
    StoreOptions options;
    options.clock = [this] { return now; };
    options.idle_ttl = 30min;
    store = std::make_unique<SessionStore>(dir.path(), options);
    if (!store->manifest("dr")) store->add_manifest(standard_manifest());
  }

  const TrialPrompt& prompt(const NextTrial& next) { return std::get<TrialPrompt>(next); }

  void answer_all(const std::string& id, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      auto next = store->next_trial(id);
      ASSERT_TRUE(std::holds_alternative<TrialPrompt>(next));
      auto idx = std::get<TrialPrompt>(next).trial_index;
      store->submit_response(id, idx, idx % 3 == 0 ? "rabbit" : "duck", 400.0 + idx);
      now += 1s;
    }
  }

  std::string journal_of(const std::string& id) {
    return (dir.path() / "sessions" / (id + ".journal")).string();
  }

  TempDir dir;
  std::chrono::system_clock::time_point now{std::chrono::sys_days{std::chrono::year{2025} / 3 / 1}};
  std::unique_ptr<SessionStore> store;
};

std::string to_text(const ingest::TrialLog& log) {
  std::ostringstream out;
  ingest::write_trial_log(out, log);
  return out.str();
}

}  // namespace

TEST(Manifest, FixtureLoadsAndRoundTrips) {
  auto m = load_manifest(SEMPROBE_FIXTURE_DIR "/manifest_duck_rabbit.json");
  EXPECT_EQ(m.conditions.size(), 300u);
  EXPECT_EQ(m.pair, kPair);
  auto again = manifest_from_json_text(manifest_to_json_text(m));
  EXPECT_EQ(again.conditions, m.conditions);
  EXPECT_EQ(manifest_to_json_text(again), manifest_to_json_text(m));
}

TEST(Manifest, ValidationRejectsDuplicatesAndForeignPairs) {
  auto m = standard_manifest();
  auto dup = m;
  dup.conditions.push_back(dup.conditions.front());
  EXPECT_THROW(validate_manifest(dup), Error);
  auto foreign = m;
  foreign.conditions[3].pair_id = "elephant-rabbit";
  EXPECT_THROW(validate_manifest(foreign), Error);
  auto bad_alpha = m;
  bad_alpha.conditions[0].alpha = 1.2;
  EXPECT_THROW(validate_manifest(bad_alpha), Error);
  EXPECT_THROW(manifest_from_json_text("{\"manifest_id\":1}"), Error);
}

TEST(SeededPermutation, IsAPermutationAndDeterministic) {
  for (std::size_t n : {0u, 1u, 2u, 17u, 300u}) {
    auto p = seeded_permutation(n, 99);
    std::vector<std::size_t> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(sorted[i], i);
    EXPECT_EQ(seeded_permutation(n, 99), p);
  }
  EXPECT_NE(seeded_permutation(300, 1), seeded_permutation(300, 2));
}

TEST(SeededPermutation, FirstPositionIsUniform) {
  // Chi-square over 10 cells with 9 degrees of freedom; 27.88 is the 0.999
  // quantile. Seeds are fixed so this cannot flake.
  const int n = 10;
  const int draws = 20000;
  std::vector<int> counts(n, 0);
  for (int seed = 0; seed < draws; ++seed) ++counts[seeded_permutation(n, seed)[0]];
  double chi2 = 0.0;
  const double expected = static_cast<double>(draws) / n;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 27.88);
}

TEST_F(SessionStoreTest, CreateUsesEveryConditionOnce) {
  auto s = store->create_session("p01", "dr", 7);
  ASSERT_EQ(s.trial_order.size(), 300u);
  std::set<std::size_t> seen(s.trial_order.begin(), s.trial_order.end());
  EXPECT_EQ(seen.size(), 300u);
  EXPECT_EQ(s.cursor, 0u);
  EXPECT_EQ(s.state, SessionState::active);
}

TEST_F(SessionStoreTest, SameSeedSamePermutation) {
  StoreOptions options;
  options.allow_concurrent_sessions = true;
  options.clock = [this] { return now; };
  store.reset();
  store = std::make_unique<SessionStore>(dir.path(), options);
  auto a = store->create_session("p01", "dr", 7);
  auto b = store->create_session("p01", "dr", 7);
  EXPECT_NE(a.session_id, b.session_id);
  EXPECT_EQ(a.trial_order, b.trial_order);
}

TEST_F(SessionStoreTest, SingleConditionManifest) {
  store->add_manifest(factorial_manifest("one", kPair, {7.5}, {0.5}, 1));
  auto s = store->create_session("p01", "one", 3);
  EXPECT_EQ(s.trial_order, std::vector<std::size_t>{0});
}

TEST_F(SessionStoreTest, ErrorsOnCreate) {
  EXPECT_THROW(store->create_session("p01", "missing", 1), Error);
  store->create_session("p01", "dr", 1);
  try {
    store->create_session("p01", "dr", 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::conflict);
  }
}

TEST_F(SessionStoreTest, NextIsIdempotentAndFollowsOrder) {
  auto s = store->create_session("p01", "dr", 7);
  auto manifest = *store->manifest("dr");
  auto first = prompt(store->next_trial(s.session_id));
  EXPECT_EQ(first.trial_index, 0u);
  EXPECT_EQ(first.total_trials, 300u);
  EXPECT_EQ(first.condition, manifest.conditions[s.trial_order[0]]);
  EXPECT_EQ(first.presentation.stimulus_duration_ms, 500);
  EXPECT_EQ(first.presentation.response_key_a, "duck");
  EXPECT_EQ(prompt(store->next_trial(s.session_id)).condition, first.condition);
  EXPECT_THROW(store->next_trial("nope"), Error);
}

TEST_F(SessionStoreTest, SubmitAckIdempotencyAndSequencing) {
  auto s = store->create_session("p01", "dr", 7);
  auto ack = store->submit_response(s.session_id, 0, "rabbit", 512.5);
  EXPECT_EQ(ack.cursor, 1u);
  now += 5s;
  EXPECT_EQ(store->submit_response(s.session_id, 0, "duck", 100.0), ack);
  EXPECT_EQ(store->session(s.session_id)->cursor, 1u);
  try {
    store->submit_response(s.session_id, 5, "duck", 300.0);
    FAIL();
  } catch (const SequencingError& e) {
    EXPECT_EQ(e.cursor(), 1u);
  }
  try {
    store->submit_response(s.session_id, 1, "duk", 300.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
  }
  EXPECT_THROW(store->submit_response(s.session_id, 1, "duck", -1.0), Error);
  EXPECT_EQ(store->session(s.session_id)->cursor, 1u);
}

TEST_F(SessionStoreTest, CompletesAfterAllTrials) {
  auto s = store->create_session("p01", "dr", 7);
  answer_all(s.session_id, 300);
  EXPECT_TRUE(std::holds_alternative<SessionComplete>(store->next_trial(s.session_id)));
  EXPECT_EQ(store->session(s.session_id)->state, SessionState::complete);
  ExportFilter filter{"dr", std::nullopt, {SessionState::complete}};
  auto log = store->export_trials(filter);
  EXPECT_EQ(log.trials.size(), 300u);
  EXPECT_EQ(log.pair, kPair);
}

TEST_F(SessionStoreTest, EmptyExportIsHeaderOnly) {
  auto log = store->export_trials({"dr", std::string("nobody"), {}});
  EXPECT_TRUE(log.trials.empty());
  auto text = to_text(log);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

TEST_F(SessionStoreTest, ExportParseExportIsByteIdentical) {
  auto s = store->create_session("p01", "dr", 7);
  answer_all(s.session_id, 120);
  auto text = to_text(store->export_trials({"dr", std::nullopt, {}}));
  std::istringstream in(text);
  auto parsed = ingest::read_trial_log(in, "export.csv");
  EXPECT_EQ(parsed.trials.size(), 120u);
  EXPECT_EQ(to_text(parsed), text);
}

TEST_F(SessionStoreTest, ReplayRestoresState) {
  auto s = store->create_session("p01", "dr", 7);
  answer_all(s.session_id, 40);
  auto before = to_text(store->export_trials({"dr", std::nullopt, {}}));
  reopen();
  auto restored = store->session(s.session_id);
  ASSERT_TRUE(restored.has_value());
  EXPECT_EQ(restored->cursor, 40u);
  EXPECT_EQ(restored->trial_order, s.trial_order);
  EXPECT_EQ(to_text(store->export_trials({"dr", std::nullopt, {}})), before);
  EXPECT_EQ(prompt(store->next_trial(s.session_id)).trial_index, 40u);
}

TEST_F(SessionStoreTest, TornTailIsDiscarded) {
  auto s = store->create_session("p01", "dr", 7);
  answer_all(s.session_id, 10);
  store.reset();
  {
    std::ofstream out(journal_of(s.session_id), std::ios::app | std::ios::binary);
    out << "{\"type\":\"response\",\"trial_ind";
  }
  reopen();
  EXPECT_EQ(store->session(s.session_id)->cursor, 10u);
  answer_all(s.session_id, 5);
  reopen();
  EXPECT_EQ(store->session(s.session_id)->cursor, 15u);
  EXPECT_EQ(store->export_trials({"dr", std::nullopt, {}}).trials.size(), 15u);
}

TEST_F(SessionStoreTest, IdleSessionsAreAbandonedButKept) {
  auto s = store->create_session("p01", "dr", 7);
  answer_all(s.session_id, 3);
  now += 29min;
  EXPECT_TRUE(store->sweep_idle().empty());
  now += 2min;
  EXPECT_EQ(store->sweep_idle(), std::vector<std::string>{s.session_id});
  EXPECT_EQ(store->session(s.session_id)->state, SessionState::abandoned);
  EXPECT_THROW(store->next_trial(s.session_id), Error);
  EXPECT_EQ(store->export_trials({"dr", std::nullopt, {SessionState::abandoned}}).trials.size(), 3u);
  EXPECT_TRUE(store->export_trials({"dr", std::nullopt, {SessionState::complete}}).trials.empty());
  reopen();
  EXPECT_EQ(store->session(s.session_id)->state, SessionState::abandoned);
  // The observer may start over once the old session is abandoned.
  EXPECT_NO_THROW(store->create_session("p01", "dr", 8));
}

TEST_F(SessionStoreTest, ExportNumbersTrialsPerObserverAcrossSessions) {
  auto first = store->create_session("p01", "dr", 7);
  answer_all(first.session_id, 4);
  now += 3h;
  store->sweep_idle();
  auto second = store->create_session("p01", "dr", 8);
  answer_all(second.session_id, 3);
  auto log = store->export_trials({"dr", std::string("p01"), {}});
  ASSERT_EQ(log.trials.size(), 7u);
  for (std::size_t i = 0; i < log.trials.size(); ++i) EXPECT_EQ(log.trials[i].trial_index, i);
  std::istringstream in(to_text(log));
  EXPECT_NO_THROW(ingest::read_trial_log(in, "x"));
}
