#include <doctest.h>

#include "dualmc/error.hpp"
#include "dualmc/inquiry.hpp"
#include "fixtures.hpp"

using namespace dualmc;
using fixtures::absent;
using fixtures::present;
using fixtures::record;

namespace {

KnowledgeBase fixture_kb() {
  return fixtures::kb_from_rows({{0.9, 0.1, 0.1, 0.0, 0.4}, {0.2, 0.7, 0.0, 0.5, 0.0}, {0.0, 0.0, 0.6, 0.6, 0.1}});
}

}  // namespace

TEST_CASE("cooccurrence") {
  SUBCASE("definition cases") {
    const std::vector<PatientRecord> rs = {record(0, {present(0), present(1)}, {absent(2)}),
                                           record(0, {present(0)}, {present(1)}), record(1, {present(2)})};
    const auto c = cooccurrence(rs, 4);
    CHECK(c(0, 1) == 1.0);
    CHECK(c(0, 2) == 0.0);
    CHECK(c(2, 2) == 1.0);
    CHECK(c(3, 3) == 0.0);  // never observed
  }
  SUBCASE("10 records against exhaustive pair counting") {
    std::mt19937_64 rng(21);
    std::vector<PatientRecord> rs;
    for (int i = 0; i < 10; ++i) rs.push_back(fixtures::random_record(6, 2, rng));
    const auto c = cooccurrence(rs, 6);
    for (std::size_t a = 0; a < 6; ++a)
      for (std::size_t b = 0; b < 6; ++b) {
        int both = 0, either = 0;
        for (const auto& r : rs) {
          const bool pa = r.recorded_status(SymptomId{a}) == SymptomStatus::Present;
          const bool pb = r.recorded_status(SymptomId{b}) == SymptomStatus::Present;
          both += pa && pb;
          either += pa || pb;
        }
        CHECK(c(a, b) == doctest::Approx(either ? static_cast<double>(both) / either : 0.0));
        CHECK(c(a, b) == c(b, a));
      }
  }
}

TEST_CASE("select_inquiry") {
  const auto kb = fixture_kb();
  const Eigen::MatrixXd no_cooc = Eigen::MatrixXd::Zero(5, 5);
  const InquiryConfig cfg;
  Evidence ev;
  ev.append(present(4));

  SUBCASE("termination wins") {
    const std::vector<double> c = {0.9, 0.1, 0.1};
    CHECK(select_inquiry({5}, c, kb, no_cooc, ev, cfg).kind == DecisionKind::Terminate);
    CHECK(select_inquiry({0, 1, 5}, c, kb, no_cooc, ev, cfg).kind == DecisionKind::Terminate);
  }
  SUBCASE("a clear leader is confirmed with its most typical candidate") {
    const std::vector<double> c = {0.8, 0.3, 0.2};
    const auto d = select_inquiry({1, 0, 2}, c, kb, no_cooc, ev, cfg);
    CHECK(d.kind == DecisionKind::Ask);
    CHECK(d.symptom == SymptomId{0});
    CHECK(d.strategy == Strategy::ConfirmTop);
    CHECK(d.scores.size() == 3);
  }
  SUBCASE("close race falls back to evidence relevance") {
    const std::vector<double> c = {0.55, 0.5, 0.2};
    Eigen::MatrixXd cooc = no_cooc;
    cooc(3, 4) = cooc(4, 3) = 0.4;
    cooc(1, 4) = cooc(4, 1) = 0.2;
    const auto d = select_inquiry({0, 1, 3}, c, kb, cooc, ev, cfg);
    CHECK(d.kind == DecisionKind::Ask);
    CHECK(d.symptom == SymptomId{3});
    CHECK(d.strategy == Strategy::EvidenceRelevance);
  }
  SUBCASE("nothing qualifies: retry, then fallback") {
    const std::vector<double> c = {0.55, 0.5, 0.2};
    const auto d = select_inquiry({1, 3}, c, kb, no_cooc, ev, cfg, 0);
    CHECK(d.kind == DecisionKind::Retry);
    CHECK(select_inquiry({1, 3}, c, kb, no_cooc, ev, cfg, 2).kind == DecisionKind::Retry);
    const auto last = select_inquiry({1, 3}, c, kb, no_cooc, ev, cfg, 3);
    CHECK(last.kind == DecisionKind::Ask);
    CHECK(last.strategy == Strategy::Fallback);
    CHECK(last.symptom == SymptomId{1});  // freq[d0] 0.1 beats 0.0
  }
  SUBCASE("leader without a relevant candidate uses strategy 2") {
    const std::vector<double> c = {0.9, 0.2, 0.1};
    Eigen::MatrixXd cooc = no_cooc;
    cooc(3, 4) = cooc(4, 3) = 0.3;
    const auto d = select_inquiry({3}, c, kb, cooc, ev, cfg);
    CHECK(d.symptom == SymptomId{3});
    CHECK(d.strategy == Strategy::EvidenceRelevance);
  }
  SUBCASE("errors") {
    const std::vector<double> c = {0.9, 0.2, 0.1};
    CHECK_THROWS_AS(select_inquiry({}, c, kb, no_cooc, ev, cfg), EmptyCandidates);
    const std::vector<double> short_c = {0.9};
    CHECK_THROWS_AS(select_inquiry({1}, short_c, kb, no_cooc, ev, cfg), LengthMismatch);
  }
}

TEST_CASE("select_inquiry properties on random inputs") {
  const auto kb = fixture_kb();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd cooc(5, 5);
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b <= a; ++b) cooc(a, b) = cooc(b, a) = u(rng) < 0.5 ? 0.0 : u(rng);
  for (int trial = 0; trial < 2000; ++trial) {
    std::set<std::size_t> cand;
    while (cand.empty())
      for (std::size_t a = 0; a <= 5; ++a)
        if (u(rng) < 0.3) cand.insert(a);
    const std::vector<double> c = {u(rng), u(rng), u(rng)};
    Evidence ev;
    if (u(rng) < 0.7) ev.append(present(std::uniform_int_distribution<std::size_t>(0, 4)(rng)));
    const std::size_t retries = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
    const auto d = select_inquiry(cand, c, kb, cooc, ev, InquiryConfig{}, retries);
    if (cand.count(5)) CHECK(d.kind == DecisionKind::Terminate);
    if (d.kind == DecisionKind::Ask) CHECK(cand.count(d.symptom.index) == 1);
    if (d.kind == DecisionKind::Retry) CHECK(retries < 3);
    const auto again = select_inquiry(cand, c, kb, cooc, ev, InquiryConfig{}, retries);
    CHECK(again.kind == d.kind);
    CHECK(again.symptom == d.symptom);
  }
}
