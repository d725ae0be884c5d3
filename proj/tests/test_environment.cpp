#include <doctest.h>

#include <cmath>

#include "dualmc/environment.hpp"
#include "dualmc/error.hpp"
#include "fixtures.hpp"

using namespace dualmc;
using fixtures::absent;
using fixtures::present;
using fixtures::record;

namespace {

// d0 lives on symptoms 0/1, d1 on 1/2, d2 on 2/3.
KnowledgeBase fixture_kb() {
  return fixtures::kb_from_rows({{0.9, 0.6, 0.0, 0.0}, {0.0, 0.5, 0.8, 0.0}, {0.0, 0.0, 0.3, 0.7}});
}

// Confidences recomputed straight from the scorer definition.
std::vector<double> by_hand(const KnowledgeBase& kb, const std::vector<SymptomEntry>& ev, double tau = 1.0) {
  std::vector<double> c;
  for (std::size_t d = 0; d < kb.disease_count(); ++d) {
    double z = 0.0;
    for (const auto& e : ev) {
      double bg = 0.0;
      for (std::size_t o = 0; o < kb.disease_count(); ++o) bg += kb.freq(DiseaseId{o}, e.symptom);
      bg /= static_cast<double>(kb.disease_count());
      z += sign(e.status) * std::log((kb.freq(DiseaseId{d}, e.symptom) + 0.01) / (bg + 0.01));
    }
    c.push_back(1.0 / (1.0 + std::exp(-z / tau)));
  }
  return c;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

}  // namespace

TEST_CASE("reset encodes the self-report") {
  const auto kb = fixture_kb();
  const ReferenceScorer scorer(kb);
  const ConsultationEnv env(kb, scorer, EnvironmentConfig{});
  const auto st = env.reset(record(0, {present(0), present(1)}, {absent(3)}));
  CHECK(st.obs.symptoms == std::vector<std::int8_t>{1, 1, 0, 0});
  CHECK(st.turn == 0);
  CHECK_FALSE(st.done);
  check_close(st.obs.confidence, by_hand(kb, {present(0), present(1)}));
  CHECK(st.was_asked(SymptomId{0}));
  CHECK_FALSE(st.was_asked(SymptomId{3}));
  CHECK_THROWS_AS(env.reset(record(0, {})), InvalidRecord);
}

TEST_CASE("build_mask") {
  SUBCASE("hand-enumerated case") {
    const auto kb = fixtures::kb_from_rows({{0.5, 0.5, 0.0}, {0.0, 0.0, 1.0}});
    EpisodeState st;
    st.obs.confidence = {0.8, 0.3};
    st.asked = {true, false, false};
    CHECK(build_mask(st, kb, 1).bits == std::vector<std::uint8_t>{0, 1, 0, 1});
    CHECK(build_mask(st, kb, 2).bits == std::vector<std::uint8_t>{0, 1, 1, 1});
    CHECK(build_mask(st, kb, 1, false).bits == std::vector<std::uint8_t>{0, 1, 1, 1});
  }
  SUBCASE("exhausted window leaves only termination") {
    const auto kb = fixture_kb();
    EpisodeState st;
    st.obs.confidence = {0.9, 0.1, 0.1};
    st.asked = {true, true, false, false};
    CHECK(build_mask(st, kb, 1).bits == std::vector<std::uint8_t>{0, 0, 0, 0, 1});
  }
}

TEST_CASE("short_reward") {
  const auto kb = fixtures::kb_from_rows({{0.8, 0.0, 0.3}, {0.1, 0.4, 0.0}});
  EpisodeState before, after;
  before.record = record(0, {present(2)}, {present(0)});
  after.record = before.record;

  SUBCASE("relevant, recorded, rank improved") {
    before.obs.confidence = {0.4, 0.6};
    after.obs.confidence = {0.7, 0.6};
    const auto r = short_reward(before, 0, after, kb, {});
    CHECK(r.freq_term == 0.8);
    CHECK(r.hit_term == 0.5);
    CHECK(r.rank_term == 0.5);
    CHECK(r.total == doctest::Approx(1.8));
  }
  SUBCASE("irrelevant, unrecorded, rank unchanged") {
    before.obs.confidence = {0.4, 0.6};
    after.obs.confidence = {0.3, 0.6};
    const auto r = short_reward(before, 1, after, kb, {});
    CHECK(r.freq_term == -0.2);
    CHECK(r.hit_term == -0.5);
    CHECK(r.rank_term == 0.0);
    CHECK(r.total == doctest::Approx(-0.7));
  }
  SUBCASE("rank worsened") {
    before.obs.confidence = {0.6, 0.6};  // tie: the earlier index ranks first
    after.obs.confidence = {0.5, 0.6};
    CHECK(short_reward(before, 0, after, kb, {}).rank_term == -0.5);
  }
  SUBCASE("total is the exact sum of parts") {
    before.obs.confidence = {0.1, 0.6};
    after.obs.confidence = {0.9, 0.6};
    const auto r = short_reward(before, 2, after, kb, {});
    CHECK(r.total == r.freq_term + r.hit_term + r.rank_term);
  }
  CHECK_THROWS_AS(short_reward(before, 3, after, kb, {}), TerminationNotScoredHere);
}

TEST_CASE("long_reward") {
  CHECK(long_reward(DiseaseId{2}, DiseaseId{2}) == 1.0);
  CHECK(long_reward(DiseaseId{0}, DiseaseId{2}) == -1.0);
  CHECK(long_reward(DiseaseId{5}, DiseaseId{5}) == long_reward(DiseaseId{1}, DiseaseId{1}));
}

TEST_CASE("respond") {
  const auto kb = fixture_kb();
  const auto r = record(0, {present(0)}, {absent(1)});
  Evidence answered;
  CHECK(respond(r, kb, SymptomId{1}, 5, answered) == SymptomStatus::Absent);  // recorded beats typicality
  CHECK(respond(r, kb, SymptomId{3}, 5, answered) == SymptomStatus::Absent);  // freq 0 under d0
  const auto unrecorded = record(1, {present(1)});
  CHECK(respond(unrecorded, kb, SymptomId{2}, 5, answered) == SymptomStatus::Present);  // rank-1 symptom of d1
  CHECK(respond(unrecorded, kb, SymptomId{2}, 0, answered) == SymptomStatus::Absent);
  answered.append(present(2));
  CHECK_THROWS_AS(respond(unrecorded, kb, SymptomId{2}, 5, answered), DuplicateQuery);
}

TEST_CASE("step") {
  const auto kb = fixture_kb();
  const ReferenceScorer scorer(kb);

  SUBCASE("termination at turn 0 with a correct initial guess") {
    const ConsultationEnv env(kb, scorer, EnvironmentConfig{});
    auto st = env.reset(record(0, {present(0)}));
    const auto out = env.step(st, env.termination_action());
    CHECK(out.done);
    CHECK(out.terminated);
    CHECK(out.reward() == 1.0);
    CHECK(st.turn == 0);
    CHECK_THROWS_AS(env.step(st, 1), EpisodeDone);
  }
  SUBCASE("disabled action") {
    const ConsultationEnv env(kb, scorer, EnvironmentConfig{});
    auto st = env.reset(record(0, {present(0)}));
    CHECK_THROWS_AS(env.step(st, 0), DisabledAction);  // already asked
  }
  SUBCASE("L forces the end") {
    EnvironmentConfig cfg;
    cfg.max_turns = 2;
    cfg.use_masking = false;
    const ConsultationEnv env(kb, scorer, cfg);
    auto st = env.reset(record(2, {present(3)}));
    CHECK_FALSE(env.step(st, 0).done);
    const auto out = env.step(st, 1);
    CHECK(out.done);
    CHECK(st.turn == 2);
    CHECK(out.outcome == 1.0);
  }
  SUBCASE("L = 0 is done at reset") {
    EnvironmentConfig cfg;
    cfg.max_turns = 0;
    const ConsultationEnv env(kb, scorer, cfg);
    CHECK(env.reset(record(0, {present(0)})).done);
  }
}

TEST_CASE("three-turn scripted episode matches a hand simulation") {
  const auto kb = fixture_kb();
  const ReferenceScorer scorer(kb);
  EnvironmentConfig cfg;
  cfg.max_turns = 3;
  cfg.mask_window = 3;
  const ConsultationEnv env(kb, scorer, cfg);
  // True disease d1; self-reports symptom 1, symptom 3 recorded Absent.
  const auto rec = record(1, {present(1)}, {absent(3)});
  auto st = env.reset(rec);
  check_close(st.obs.confidence, by_hand(kb, {present(1)}));
  // Every disease is in the window, so every unasked relevant symptom is open.
  CHECK(env.mask(st).bits == std::vector<std::uint8_t>{1, 0, 1, 1, 1});

  // Turn 1: ask 2. Unrecorded, top relevant of d1 -> Present.
  auto out = env.step(st, 2);
  REQUIRE(out.response);
  CHECK(*out.response == SymptomStatus::Present);
  const std::vector<SymptomEntry> e1 = {present(1), present(2)};
  check_close(st.obs.confidence, by_hand(kb, e1));
  CHECK(out.shaped.freq_term == 0.8);
  CHECK(out.shaped.hit_term == -0.5);
  CHECK(out.shaped.rank_term == 0.5);  // d1 moves from second to first
  CHECK_FALSE(out.done);

  // Turn 2: ask 3. Recorded Absent.
  out = env.step(st, 3);
  CHECK(*out.response == SymptomStatus::Absent);
  const std::vector<SymptomEntry> e2 = {present(1), present(2), absent(3)};
  check_close(st.obs.confidence, by_hand(kb, e2));
  CHECK(out.shaped.freq_term == -0.2);
  CHECK(out.shaped.hit_term == 0.5);
  CHECK(out.shaped.rank_term == 0.0);

  // Turn 3: ask 0. Not relevant to d1 -> Absent; the turn limit closes the episode.
  out = env.step(st, 0);
  CHECK(*out.response == SymptomStatus::Absent);
  const std::vector<SymptomEntry> e3 = {present(1), present(2), absent(3), absent(0)};
  check_close(st.obs.confidence, by_hand(kb, e3));
  CHECK(out.done);
  CHECK(out.outcome == 1.0);
  CHECK(st.obs.symptoms == std::vector<std::int8_t>{-1, 1, 1, -1});
  CHECK(st.turn == 3);
  CHECK(st.evidence.entries() == e3);
}
