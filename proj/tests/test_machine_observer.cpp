#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "oracles/oracles.hpp"
#include "semprobe/counter_rng.hpp"
#include "semprobe/error.hpp"
#include "semprobe/machine_observer.hpp"
#include "semprobe/softmax_io.hpp"

using namespace semprobe;
using namespace semprobe::machine;

namespace {

const CategoryPair kDuckRabbit{"duck", "rabbit"};

SoftmaxRecord record_from(const std::map<int, double>& probs) {
  SoftmaxRecord r{"duck-rabbit_7.5_0.5_0.png", "m", {}};
  for (auto [id, p] : probs) r.entries.push_back({id, p});
  return r;
}

StimulusCondition condition(double gs, double alpha, std::uint64_t seed) {
  return {"duck-rabbit", alpha, gs, seed, image_ref_for("duck-rabbit", gs, alpha, seed)};
}

}  // namespace

TEST(LabelMap, ImagenetSelection) {
  auto labels = LabelMap::imagenet_animals();
  EXPECT_EQ(labels.labels("duck").size(), 2u);
  EXPECT_EQ(labels.labels("rabbit").size(), 3u);
  EXPECT_EQ(labels.labels("elephant").size(), 2u);
  EXPECT_EQ(labels.pair_label_ids(kDuckRabbit), std::vector<int>({97, 98, 330, 331, 332}));
  EXPECT_NO_THROW(labels.validate_pair(kDuckRabbit));
  EXPECT_THROW(labels.validate_pair({"duck", "giraffe"}), Error);
}

TEST(LabelMap, LoadsFixtureAndRejectsOverlap) {
  auto labels = LabelMap::load(SEMPROBE_FIXTURE_DIR "/imagenet_labels.json");
  EXPECT_EQ(labels.pair_label_ids(kDuckRabbit),
            LabelMap::imagenet_animals().pair_label_ids(kDuckRabbit));
  auto overlapping = LabelMap::from_json_text(
      R"({"categories":{"a":[{"id":1,"name":"x"}],"b":[{"id":1,"name":"x"}]}})");
  EXPECT_THROW(overlapping.validate_pair({"a", "b"}), Error);
  auto empty = LabelMap::from_json_text(R"({"categories":{"a":[],"b":[{"id":1,"name":"x"}]}})");
  EXPECT_THROW(empty.validate_pair({"a", "b"}), Error);
}

TEST(CategoryProbability, HandExample) {
  auto r = record_from({{97, 0.05}, {98, 0.15}, {330, 0.30}, {331, 0.20}, {332, 0.10}});
  EXPECT_NEAR(category_probability(r, LabelMap::imagenet_animals(), kDuckRabbit), 2.0 / 3.0, 1e-15);
}

TEST(CategoryProbability, EqualMeansGiveHalf) {
  auto r = record_from({{97, 0.1}, {98, 0.1}, {330, 0.1}, {331, 0.05}, {332, 0.15}});
  EXPECT_NEAR(category_probability(r, LabelMap::imagenet_animals(), kDuckRabbit), 0.5, 1e-15);
}

TEST(CategoryProbability, ZeroDuckGivesOne) {
  auto r = record_from({{97, 0.0}, {98, 0.0}, {330, 0.3}, {331, 0.0}, {332, 0.0}});
  EXPECT_EQ(category_probability(r, LabelMap::imagenet_animals(), kDuckRabbit), 1.0);
}

TEST(CategoryProbability, Errors) {
  auto labels = LabelMap::imagenet_animals();
  auto zero = record_from({{97, 0}, {98, 0}, {330, 0}, {331, 0}, {332, 0}});
  try {
    category_probability(zero, labels, kDuckRabbit);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::undefined_ratio);
  }
  auto missing = record_from({{97, 0.1}, {330, 0.1}, {331, 0.1}, {332, 0.1}});
  try {
    category_probability(missing, labels, kDuckRabbit);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::schema);
  }
  auto bad = record_from({{97, 1.5}, {98, 0.1}, {330, 0.1}, {331, 0.1}, {332, 0.1}});
  EXPECT_THROW(category_probability(bad, labels, kDuckRabbit), Error);
}

TEST(CategoryProbability, MatchesOracleAndInvariances) {
  auto labels = LabelMap::imagenet_animals();
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::map<int, double> probs;
    double total = 0.0;
    for (int id : {97, 98, 330, 331, 332}) total += probs[id] = unit(rng);
    for (auto& [id, p] : probs) p /= total * (1.0 + unit(rng));
    auto r = record_from(probs);
    double p = category_probability(r, labels, kDuckRabbit);
    ASSERT_NEAR(p, oracle::category_ratio(probs, {97, 98}, {330, 331, 332}), 1e-12);
    ASSERT_GE(p, 0.0);
    ASSERT_LE(p, 1.0);

    // Uniform rescaling of all probabilities leaves the ratio unchanged.
    auto scaled = r;
    for (auto& e : scaled.entries) e.probability *= 0.5;
    ASSERT_NEAR(category_probability(scaled, labels, kDuckRabbit), p, 1e-12);

    // Entry order does not matter.
    auto shuffled = r;
    std::shuffle(shuffled.entries.begin(), shuffled.entries.end(), rng);
    ASSERT_NEAR(category_probability(shuffled, labels, kDuckRabbit), p, 1e-15);

    // Swapping the categories gives the complement.
    ASSERT_NEAR(category_probability(r, labels, {"rabbit", "duck"}), 1.0 - p, 1e-12);
  }
}

TEST(BernoulliTrials, DegenerateProbabilities) {
  MachineTrialConfig config{42, 200};
  for (const auto& t : bernoulli_trials(0.0, config, condition(7.5, 0.5, 1), "m")) {
    ASSERT_EQ(t.response, Choice::category_a);
  }
  for (const auto& t : bernoulli_trials(1.0, config, condition(7.5, 0.5, 1), "m")) {
    ASSERT_EQ(t.response, Choice::category_b);
  }
}

TEST(BernoulliTrials, FairCoinWithinThreeSigmaAndReproducible) {
  MachineTrialConfig config{42, 10000};
  auto first = bernoulli_trials(0.5, config, condition(7.5, 0.5, 1), "m");
  ASSERT_EQ(first.size(), 10000u);
  auto n_b = std::count_if(first.begin(), first.end(),
                           [](const TrialRecord& t) { return t.response == Choice::category_b; });
  EXPECT_NEAR(n_b / 10000.0, 0.5, 0.015);
  EXPECT_EQ(bernoulli_trials(0.5, config, condition(7.5, 0.5, 1), "m"), first);
  for (std::size_t i = 0; i < first.size(); ++i) {
    ASSERT_EQ(first[i].trial_index, i);
    ASSERT_EQ(first[i].observer_id, "m");
    ASSERT_EQ(first[i].observer_kind, ObserverKind::machine);
    ASSERT_FALSE(first[i].reaction_time_ms.has_value());
  }
}

TEST(BernoulliTrials, StreamsDifferBySeedModelAndCondition) {
  auto base = trial_stream_key(1, "m", condition(7.5, 0.5, 1));
  EXPECT_NE(base, trial_stream_key(2, "m", condition(7.5, 0.5, 1)));
  EXPECT_NE(base, trial_stream_key(1, "n", condition(7.5, 0.5, 1)));
  EXPECT_NE(base, trial_stream_key(1, "m", condition(7.5, 0.6, 1)));
  EXPECT_NE(base, trial_stream_key(1, "m", condition(10.0, 0.5, 1)));
  EXPECT_NE(base, trial_stream_key(1, "m", condition(7.5, 0.5, 2)));
}

TEST(BernoulliTrials, ConvergesToProbability) {
  for (double p : {0.1, 0.37, 0.8}) {
    const int n = 40000;
    auto trials = bernoulli_trials(p, {7, n}, condition(5.0, 0.4, 3), "m");
    auto n_b = std::count_if(trials.begin(), trials.end(),
                             [](const TrialRecord& t) { return t.response == Choice::category_b; });
    EXPECT_NEAR(static_cast<double>(n_b) / n, p, 3.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST(CounterRng, UniformRangeAndPurity) {
  CounterRng rng(123);
  for (std::uint64_t i = 0; i < 10000; ++i) {
    double u = rng.uniform(i);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  EXPECT_EQ(rng.bits(5), CounterRng(123).bits(5));
  EXPECT_NE(KeyHasher().add("ab").add("c").finish(), KeyHasher().add("a").add("bc").finish());
}

TEST(BuildResponseCurves, FullFactorialGrid) {
  std::vector<TrialRecord> trials;
  for (double gs : {2.5, 5.0, 7.5, 10.0, 12.5, 15.0}) {
    for (double alpha : {0.3, 0.4, 0.5, 0.6, 0.7}) {
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto t = bernoulli_trials(alpha, {1, 1}, condition(gs, alpha, seed), "m");
        trials.insert(trials.end(), t.begin(), t.end());
      }
    }
  }
  ASSERT_EQ(trials.size(), 300u);
  std::shuffle(trials.begin(), trials.end(), std::mt19937_64(4));
  auto curves = build_response_curves(trials);
  ASSERT_EQ(curves.size(), 6u);
  std::uint64_t n_b_total = 0;
  for (const auto& c : curves) {
    ASSERT_EQ(c.points.size(), 5u);
    for (const auto& p : c.points) {
      EXPECT_EQ(p.n_total, 10u);
      n_b_total += p.n_b;
    }
  }
  EXPECT_EQ(n_b_total, static_cast<std::uint64_t>(std::count_if(
                           trials.begin(), trials.end(),
                           [](const TrialRecord& t) { return t.response == Choice::category_b; })));
  EXPECT_TRUE(std::is_sorted(curves.begin(), curves.end(), [](const auto& a, const auto& b) {
    return a.guidance_scale < b.guidance_scale;
  }));
}

TEST(BuildResponseCurves, EmptyAndSingleCell) {
  EXPECT_TRUE(build_response_curves({}).empty());
  auto trials = bernoulli_trials(0.5, {3, 10}, condition(7.5, 0.5, 0), "m");
  auto curves = build_response_curves(trials);
  ASSERT_EQ(curves.size(), 1u);
  ASSERT_EQ(curves[0].points.size(), 1u);
  EXPECT_EQ(curves[0].points[0].n_total, 10u);
}

TEST(BuildResponseCurves, RejectsMixedPairs) {
  auto trials = bernoulli_trials(0.5, {3, 2}, condition(7.5, 0.5, 0), "m");
  trials[1].condition.pair_id = "elephant-rabbit";
  try {
    build_response_curves(trials);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
}

TEST(SoftmaxIo, LongFixture) {
  auto records = load_softmax(SEMPROBE_FIXTURE_DIR "/softmax_duck_rabbit.csv");
  EXPECT_EQ(records.size(), 600u);
  for (const auto& r : records) ASSERT_EQ(r.entries.size(), 5u);
  std::ostringstream out;
  write_softmax(out, records);
  std::istringstream in(out.str());
  EXPECT_EQ(read_softmax(in, "roundtrip"), records);
}

TEST(SoftmaxIo, ColumnarMatchesLong) {
  auto columnar = load_softmax(SEMPROBE_FIXTURE_DIR "/softmax_columnar.csv");
  ASSERT_EQ(columnar.size(), 3u);
  std::ostringstream out;
  write_softmax(out, columnar);
  std::istringstream in(out.str());
  EXPECT_EQ(read_softmax(in, "long"), columnar);
}

TEST(SoftmaxIo, EmptyAndMalformed) {
  std::istringstream empty("image_ref,model_id,label_id,probability\n");
  EXPECT_TRUE(read_softmax(empty, "e").empty());
  std::istringstream bad("image_ref,model_id,label_id,probability\nx.png,m,97,abc\n");
  try {
    read_softmax(bad, "bad.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(SoftmaxIo, ImageRefRoundTrip) {
  auto ref = image_ref_for("duck-rabbit", 7.5, 0.3, 4);
  auto c = condition_from_image_ref("stimuli/" + ref);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->pair_id, "duck-rabbit");
  EXPECT_EQ(c->guidance_scale, 7.5);
  EXPECT_EQ(c->alpha, 0.3);
  EXPECT_EQ(c->seed, 4u);
  EXPECT_FALSE(condition_from_image_ref("cat.png").has_value());
}
