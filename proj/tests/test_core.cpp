#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "dualmc/error.hpp"
#include "dualmc/knowledge_base.hpp"
#include "dualmc/record_io.hpp"
#include "dualmc/synthetic.hpp"
#include "fixtures.hpp"

using namespace dualmc;
using fixtures::absent;
using fixtures::present;
using fixtures::record;

TEST_CASE("build_kb counts Present symptoms per disease") {
  std::vector<PatientRecord> rs = {
      record(0, {present(3)}), record(0, {present(1)}, {present(3)}),
      record(1, {present(5)}), record(1, {present(0)}, {absent(5)}),
      record(1, {present(0)}), record(1, {present(2)}),
  };
  const auto kb = KnowledgeBase::build(rs, 6, 2);
  CHECK(kb.freq(DiseaseId{0}, SymptomId{3}) == 1.0);
  CHECK(kb.freq(DiseaseId{1}, SymptomId{5}) == 0.25);
  CHECK(kb.freq(DiseaseId{1}, SymptomId{0}) == 0.5);
  CHECK(kb.prior()[0] == doctest::Approx(1.0 / 3));
  CHECK(kb.prior()[1] == doctest::Approx(2.0 / 3));

  SUBCASE("relevant lists are complete and sorted descending") {
    for (std::size_t d = 0; d < 2; ++d) {
      const auto& rel = kb.relevant(DiseaseId{d});
      std::size_t positive = 0;
      for (std::size_t s = 0; s < 6; ++s) positive += kb.freq(DiseaseId{d}, SymptomId{s}) > 0;
      CHECK(rel.size() == positive);
      for (std::size_t i = 1; i < rel.size(); ++i) CHECK(rel[i - 1].frequency >= rel[i].frequency);
    }
    CHECK(kb.relevant(DiseaseId{1}).front().symptom == SymptomId{0});
  }

  SUBCASE("record order does not matter") {
    auto shuffled = rs;
    std::mt19937_64 rng(3);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(KnowledgeBase::build(shuffled, 6, 2) == kb);
  }
}

TEST_CASE("build_kb errors") {
  std::vector<PatientRecord> none;
  CHECK_THROWS_AS(KnowledgeBase::build(none, 3, 2), EmptyDataset);
  std::vector<PatientRecord> one = {record(0, {present(1)})};
  CHECK_THROWS_AS(KnowledgeBase::build(one, 3, 2), EmptyDataset);  // disease 1 unseen
  std::vector<PatientRecord> bad = {record(0, {present(7)}), record(1, {present(0)})};
  CHECK_THROWS_AS(KnowledgeBase::build(bad, 3, 2), IdOutOfRange);
  std::vector<PatientRecord> bad_label = {record(0, {present(1)}), record(4, {present(0)})};
  CHECK_THROWS_AS(KnowledgeBase::build(bad_label, 3, 2), IdOutOfRange);
}

TEST_CASE("similar_diseases") {
  SUBCASE("identical row first, orthogonal row last") {
    const auto kb = fixtures::kb_from_rows({{1, 0.5, 0, 0}, {0, 0, 1, 1}, {1, 0.5, 0, 0}, {0.9, 0.6, 0.1, 0}});
    CHECK(cosine_similarity(kb.freq_matrix().row(0).transpose(), kb.freq_matrix().row(2).transpose()) ==
          doctest::Approx(1.0));
    const auto sim = similar_diseases(kb, DiseaseId{0}, 3);
    REQUIRE(sim.size() == 3);
    CHECK(sim.front() == DiseaseId{2});
    CHECK(sim.back() == DiseaseId{1});
  }
  SUBCASE("matches exhaustive cosine ranking on a synthetic world") {
    const auto world = gen_world({});
    const auto kb = KnowledgeBase::build(world.records, 20, 6);
    const auto& f = kb.freq_matrix();
    for (std::size_t d = 0; d < 6; ++d) {
      std::vector<std::pair<double, std::size_t>> brute;
      for (std::size_t o = 0; o < 6; ++o) {
        if (o == d) continue;
        const double c = f.row(d).dot(f.row(o)) / (f.row(d).norm() * f.row(o).norm());
        brute.emplace_back(-c, o);
      }
      std::sort(brute.begin(), brute.end());
      const auto sim = similar_diseases(kb, DiseaseId{d}, 4);
      REQUIRE(sim.size() == 4);
      for (std::size_t i = 0; i < 4; ++i) CHECK(sim[i].index == brute[i].second);
      CHECK(std::find(sim.begin(), sim.end(), DiseaseId{d}) == sim.end());
    }
  }
  SUBCASE("k must be below n") {
    const auto kb = fixtures::kb_from_rows({{1, 0}, {0, 1}});
    CHECK_THROWS_AS(similar_diseases(kb, DiseaseId{0}, 2), KTooLarge);
  }
}

TEST_CASE("top_w_diseases and rank_of") {
  const std::vector<double> c = {0.9, 0.1, 0.5};
  const auto top = top_w_diseases(c, 2);
  CHECK(top == std::vector<DiseaseId>{DiseaseId{0}, DiseaseId{2}});
  CHECK(top_w_diseases(c, 3).size() == 3);
  const std::vector<double> tied = {0.3, 0.7, 0.7, 0.1};
  CHECK(top_w_diseases(tied, 1) == std::vector<DiseaseId>{DiseaseId{1}});
  CHECK(rank_of(tied, 1) == 1);
  CHECK(rank_of(tied, 2) == 2);
  CHECK(rank_of(tied, 3) == 4);
}

TEST_CASE("records and evidence") {
  CHECK_THROWS_AS(validate_record(record(0, {}), 4, 2), InvalidRecord);
  CHECK_THROWS_AS(validate_record(record(0, {present(1)}, {absent(1)}), 4, 2), InvalidRecord);
  CHECK_THROWS_AS(validate_record(record(0, {{SymptomId{1}, SymptomStatus::Unknown}}), 4, 2), InvalidRecord);
  CHECK_THROWS_AS(validate_record(record(3, {present(1)}), 4, 2), IdOutOfRange);
  CHECK_NOTHROW(validate_record(record(1, {present(1)}, {absent(2)}), 4, 2));

  Evidence e;
  e.append(present(2));
  CHECK(e.contains(SymptomId{2}));
  CHECK_THROWS_AS(e.append(absent(2)), DuplicateSymptom);
  CHECK(e.size() == 1);
}

TEST_CASE("canonical record files round-trip and report line numbers") {
  std::mt19937_64 rng(11);
  std::vector<PatientRecord> rs;
  for (int i = 0; i < 20; ++i) rs.push_back(fixtures::random_record(9, 4, rng));
  std::stringstream ss;
  write_records(ss, rs);
  CHECK(read_records(ss) == rs);

  std::stringstream broken("{\"explicit\":[[1,1]],\"implicit\":[],\"label\":0}\n\n{\"explicit\":[[1,3]],\"label\":0}\n");
  try {
    read_records(broken, "mem");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}
