#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dualmc/diagnosis.hpp"
#include "dualmc/error.hpp"
#include "dualmc/synthetic.hpp"
#include "fixtures.hpp"

using namespace dualmc;
using fixtures::absent;
using fixtures::present;

TEST_CASE("confidence") {
  CHECK(confidence({0.0, 0.0}, 1.0) == 0.5);
  CHECK(confidence({3.0, 3.0}, 0.2) == doctest::Approx(0.5));
  CHECK(confidence({2.0 * std::log(3.0), 0.0}, 2.0) == doctest::Approx(0.75));
  CHECK(confidence({10.0, 0.0}, 0.1) > 0.999);
  CHECK(confidence({1e6, 0.0}, 1.0) == 1.0);
  CHECK(confidence({-1e6, 0.0}, 1.0) == 0.0);
  CHECK_THROWS_AS(confidence({1.0, 0.0}, 0.0), NonPositiveTemperature);
  CHECK_THROWS_AS(confidence({1.0, 0.0}, -1.0), NonPositiveTemperature);
}

TEST_CASE("reference scorer") {
  const auto kb = fixtures::kb_from_rows({{0.8, 0.2, 0.0}, {0.2, 0.2, 0.6}});
  const ReferenceScorer scorer(kb);

  SUBCASE("empty evidence gives logit 0 and confidence 0.5") {
    const auto l = scorer.score(Evidence{}, DiseaseId{0}, kb);
    CHECK(l.logit_true == 0.0);
    CHECK(l.logit_false == 0.0);
    CHECK(diagnose(Evidence{}, kb, scorer, 1.0) == std::vector<double>{0.5, 0.5});
  }
  SUBCASE("frequency equal to background contributes nothing") {
    Evidence e;
    e.append(present(1));
    CHECK(scorer.score(e, DiseaseId{0}, kb).logit_true == doctest::Approx(0.0));
  }
  SUBCASE("matches the log-ratio formula by hand") {
    Evidence e;
    e.append(present(0));
    e.append(absent(2));
    const double a = 0.01;
    const double lam00 = std::log((0.8 + a) / (0.5 + a)), lam02 = std::log((0.0 + a) / (0.3 + a));
    const double lam10 = std::log((0.2 + a) / (0.5 + a)), lam12 = std::log((0.6 + a) / (0.3 + a));
    CHECK(scorer.score(e, DiseaseId{0}, kb).logit_true == doctest::Approx(lam00 - lam02));
    CHECK(scorer.score(e, DiseaseId{1}, kb).logit_true == doctest::Approx(lam10 - lam12));
    const auto c = diagnose(e, kb, scorer, 0.5);
    CHECK(c[0] == doctest::Approx(1.0 / (1.0 + std::exp(-(lam00 - lam02) / 0.5))));
    CHECK(c[1] == doctest::Approx(1.0 / (1.0 + std::exp(-(lam10 - lam12) / 0.5))));
  }
  SUBCASE("identical rows score identically") {
    const auto twin = fixtures::kb_from_rows({{0.3, 0.9}, {0.3, 0.9}});
    const ReferenceScorer s(twin);
    Evidence e;
    e.append(present(1));
    e.append(absent(0));
    const auto c = diagnose(e, twin, s, 1.0);
    CHECK(c[0] == c[1]);
  }
  SUBCASE("adapter and offset shift the margin") {
    Adapter ad = Adapter::zeros(2, 3, 2);
    ad.bias << 0.5, -0.25;
    ad.u(0, 0) = 1.0;
    ad.v(2, 0) = 2.0;  // delta[0][2] = 2
    ReferenceScorer with = scorer.with_adapter(ad);
    with.set_offset(Eigen::Vector2d(0.1, 0.0));
    Evidence e;
    e.append(absent(2));
    const double base = scorer.score(e, DiseaseId{0}, kb).logit_true;
    CHECK(with.score(e, DiseaseId{0}, kb).logit_true == doctest::Approx(base + 0.5 + 0.1 - 2.0));
    CHECK(with.without_adapter().score(e, DiseaseId{0}, kb).logit_true == doctest::Approx(base + 0.1));
  }
}

TEST_CASE("final_diagnosis") {
  const std::vector<double> c = {0.2, 0.9, 0.9};
  CHECK(final_diagnosis(c) == DiseaseId{1});
  const std::vector<double> one = {0.5};
  CHECK(final_diagnosis(one) == DiseaseId{0});
  const std::vector<double> permuted = {0.9, 0.2, 0.1};
  CHECK(final_diagnosis(permuted) == DiseaseId{0});
  CHECK_THROWS_AS(final_diagnosis(std::vector<double>{}), EmptyVector);
}

TEST_CASE("reference scorer tracks the exact posterior on a synthetic world") {
  const auto world = gen_world({});
  const auto kb = KnowledgeBase::build(world.records, 20, 6);
  const ReferenceScorer scorer(kb);
  std::mt19937_64 rng(5);
  int agree = 0;
  for (int i = 0; i < 200; ++i) {
    const auto e = sample_evidence(world, 3, 10, rng);
    const auto post = exact_posterior(world, e);
    const auto c = diagnose(e, kb, scorer, 1.0);
    const double best = *std::max_element(post.begin(), post.end());
    agree += post[final_diagnosis(c).index] >= best * (1 - 1e-9);
  }
  CHECK(agree >= 190);
}

TEST_CASE("adapter checkpoint round-trip") {
  const auto a = Adapter::initialized(4, 7, 3, 9);
  CHECK(a.u.isZero());
  CHECK(a.v.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(3.0));
  auto b = a;
  b.u.setRandom();
  b.bias.setRandom();
  const auto path = std::filesystem::temp_directory_path() / "dualmc_adapter_test.txt";
  save_adapter(path, b);
  CHECK(load_adapter(path) == b);
  std::filesystem::remove(path);
}
