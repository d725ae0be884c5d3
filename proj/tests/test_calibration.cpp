#include <doctest.h>

#include <numeric>

#include "dualmc/calibration.hpp"
#include "dualmc/error.hpp"
#include "dualmc/synthetic.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"

using namespace dualmc;
using fixtures::absent;
using fixtures::present;
using fixtures::record;

TEST_CASE("build_calibration_set emits one prefix per turn after self-report") {
  const auto r = record(1, {present(0), present(4)}, {absent(2), present(3), present(1)});
  const std::vector<PatientRecord> rs = {r};
  const auto items = build_calibration_set(rs);
  REQUIRE(items.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(items[i].evidence_prefix.size() == i + 2);
    CHECK(items[i].label == DiseaseId{1});
  }
  CHECK(items[3].evidence_prefix.entries() == r.all_symptoms());

  const std::vector<PatientRecord> bare = {record(0, {present(1)})};
  CHECK(build_calibration_set(bare).size() == 1);

  std::mt19937_64 rng(2);
  std::vector<PatientRecord> many;
  std::size_t expected = 0;
  for (int i = 0; i < 10; ++i) {
    many.push_back(fixtures::random_record(12, 3, rng));
    expected += many.back().total_symptoms() - many.back().self_reported() + 1;
  }
  CHECK(build_calibration_set(many).size() == expected);
}

TEST_CASE("target_distribution") {
  CHECK(target_distribution(2, 1, 0.0) == std::vector<double>{0.0, 1.0});
  const auto t = target_distribution(5, 2, 0.01);
  REQUIRE(t.size() == 5);
  CHECK(t[2] == doctest::Approx(0.99 / 1.03));
  CHECK(t[0] == doctest::Approx(0.01 / 1.03));
  CHECK(std::accumulate(t.begin(), t.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(target_distribution(5, 0, 0.2), InvalidEpsilon);
  CHECK_THROWS_AS(target_distribution(5, 0, -0.1), InvalidEpsilon);
}

TEST_CASE("kl_loss") {
  const std::vector<double> p = {0.2, 0.3, 0.5};
  CHECK(kl_loss(p, p) == doctest::Approx(0.0));
  CHECK(kl_loss(std::vector<double>{0, 1}, std::vector<double>{0.5, 0.5}) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(kl_loss(p, std::vector<double>{0.5, 0.5}), LengthMismatch);
  CHECK_THROWS_AS(kl_loss(p, std::vector<double>{0.5, 0.5, 0.0}), ZeroPrediction);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(6), b(6);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    const double sa = std::accumulate(a.begin(), a.end(), 0.0), sb = std::accumulate(b.begin(), b.end(), 0.0);
    double by_hand = 0.0;
    for (int i = 0; i < 6; ++i) {
      a[i] /= sa;
      b[i] /= sb;
    }
    for (int i = 0; i < 6; ++i) by_hand += a[i] * std::log(a[i] / b[i]);
    CHECK(kl_loss(a, b) == doctest::Approx(by_hand).epsilon(1e-12));
  }
}

namespace {

struct Toy {
  KnowledgeBase kb;
  std::vector<SubTrajectory> items;
};

Toy toy(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<PatientRecord> rs;
  for (std::size_t d = 0; d < 3; ++d)
    for (int i = 0; i < 4; ++i) {
      auto r = fixtures::random_record(5, 3, rng);
      r.label = DiseaseId{d};
      rs.push_back(r);
    }
  auto kb = KnowledgeBase::build(rs, 5, 3);
  return {std::move(kb), build_calibration_set(rs)};
}

}  // namespace

TEST_CASE("calibration gradient matches finite differences") {
  auto t = toy(8);
  ReferenceScorer base(t.kb);
  base.set_offset(Eigen::Vector3d(0.4, -0.3, 0.1));
  Adapter a = Adapter::initialized(3, 5, 4, 1);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.5);
  for (Eigen::Index i = 0; i < a.u.size(); ++i) a.u.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < a.bias.size(); ++i) a.bias(i) = g(rng);
  CalibrationConfig cfg;
  cfg.group_size = 3;
  cfg.tau = 0.7;
  std::vector<std::vector<DiseaseId>> groups;
  for (const auto& it : t.items) groups.push_back(contrast_group(t.kb, it.label, 3));
  const auto report = gradcheck::check_calibration(t.items, groups, base, a, cfg);
  CHECK(report.checked == 3 + 3 * 4 + 5 * 4);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("contrast_group puts the label first") {
  const auto kb = fixtures::kb_from_rows({{1, 0, 0}, {0.9, 0.1, 0}, {0, 1, 0}, {0, 0, 1}});
  const auto g = contrast_group(kb, DiseaseId{2}, 3);
  REQUIRE(g.size() == 3);
  CHECK(g[0] == DiseaseId{2});
  CHECK(contrast_group(kb, DiseaseId{0}, 9).size() == 4);
}

TEST_CASE("calibrate") {
  const auto world = gen_world({});
  const auto kb = KnowledgeBase::build(world.records, 20, 6);
  ReferenceScorer base(kb);
  base.set_offset((Eigen::VectorXd(6) << 2.0, -1.5, 1.0, -0.5, 1.5, -2.0).finished());
  const auto items = build_calibration_set(std::span(world.records).first(120));

  SUBCASE("zero learning rate leaves the adapter alone") {
    CalibrationConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 3;
    const auto start = Adapter::initialized(6, 20, 4, 2);
    const auto res = calibrate(start, items, kb, base, cfg);
    CHECK(res.adapter == start);
    REQUIRE(res.loss_trace.size() == 3);
    CHECK(res.loss_trace[0] == doctest::Approx(res.loss_trace[2]));
  }
  SUBCASE("training lowers the loss and is reproducible") {
    CalibrationConfig cfg;
    cfg.learning_rate = 0.02;
    cfg.epochs = 4;
    const auto start = Adapter::initialized(6, 20, 4, 2);
    const auto res = calibrate(start, items, kb, base, cfg);
    CHECK(res.loss_trace.back() < res.loss_trace.front());
    const auto again = calibrate(start, items, kb, base, cfg);
    CHECK(again.adapter == res.adapter);
    CHECK(evaluate_calibration(items, kb, base, res.adapter, cfg).mean_kl <
          evaluate_calibration(items, kb, base, start, cfg).mean_kl);
  }
  SUBCASE("defaults") {
    const CalibrationConfig cfg;
    CHECK(cfg.learning_rate == 5e-5);
    CHECK(cfg.batch_size == 8);
    CHECK(cfg.group_size == 5);
    CHECK(Adapter::kDefaultRank == 16);
  }
}

TEST_CASE("calibration fits a separable toy") {
  const auto kb = fixtures::kb_from_rows({{0.9, 0.1, 0.1}, {0.1, 0.9, 0.1}, {0.1, 0.1, 0.9}});
  const ReferenceScorer base(kb);
  std::vector<PatientRecord> recs;
  for (std::size_t d = 0; d < 3; ++d) recs.push_back(record(d, {present(d)}, {absent((d + 1) % 3)}));
  const auto items = build_calibration_set(recs);
  CalibrationConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 200;
  cfg.group_size = 3;
  cfg.batch_size = 2;
  const auto res = calibrate(Adapter::initialized(3, 3, 4, 1), items, kb, base, cfg);
  CHECK(res.loss_trace.back() < 0.05);
}
