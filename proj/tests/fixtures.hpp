#pragma once

#include <cmath>
#include <algorithm>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dualmc/core.hpp"
#include "dualmc/knowledge_base.hpp"

namespace fixtures {

using dualmc::DiseaseId;
using dualmc::PatientRecord;
using dualmc::SymptomEntry;
using dualmc::SymptomId;
using dualmc::SymptomStatus;

inline SymptomEntry present(std::size_t s) { return {SymptomId{s}, SymptomStatus::Present}; }
inline SymptomEntry absent(std::size_t s) { return {SymptomId{s}, SymptomStatus::Absent}; }

inline PatientRecord record(std::size_t label, std::vector<SymptomEntry> ex, std::vector<SymptomEntry> im = {}) {
  PatientRecord r;
  r.label = DiseaseId{label};
  r.explicit_symptoms = std::move(ex);
  r.implicit_symptoms = std::move(im);
  return r;
}

inline dualmc::KnowledgeBase kb_from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = static_cast<Eigen::Index>(rows.begin()->size());
  Eigen::MatrixXd f(n, m);
  Eigen::Index d = 0;
  for (const auto& row : rows) {
    Eigen::Index s = 0;
    for (double v : row) f(d, s++) = v;
    ++d;
  }
  return dualmc::KnowledgeBase(f, std::vector<double>(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n)));
}

// Random record over m symptoms and n diseases, at least one explicit entry.
inline PatientRecord random_record(std::size_t m, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> ids(m);
  for (std::size_t i = 0; i < m; ++i) ids[i] = i;
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::size_t k = std::uniform_int_distribution<std::size_t>(1, m)(rng);
  const std::size_t ex = std::uniform_int_distribution<std::size_t>(1, k)(rng);
  PatientRecord r;
  r.label = DiseaseId{std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)};
  for (std::size_t i = 0; i < k; ++i) {
    const auto st = std::bernoulli_distribution(0.7)(rng) ? SymptomStatus::Present : SymptomStatus::Absent;
    (i < ex ? r.explicit_symptoms : r.implicit_symptoms).push_back({SymptomId{ids[i]}, st});
  }
  return r;
}

inline double rel_error(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

}  // namespace fixtures
