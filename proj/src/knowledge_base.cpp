#include "dualmc/knowledge_base.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dualmc/error.hpp"

namespace dualmc {

KnowledgeBase KnowledgeBase::build(std::span<const PatientRecord> records, std::size_t m,
                                   std::size_t n) {
  if (records.empty()) throw EmptyDataset("no records to build a knowledge base from");
  if (m == 0 || n == 0) throw EmptyDataset("empty symptom or disease vocabulary");

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                 static_cast<Eigen::Index>(m));
  std::vector<double> per_disease(n, 0.0);
  for (const auto& r : records) {
    if (r.label.index >= n)
      throw IdOutOfRange("disease id " + std::to_string(r.label.index) + " >= " + std::to_string(n));
    per_disease[r.label.index] += 1.0;
    for (const auto& e : r.all_symptoms()) {
      if (e.symptom.index >= m)
        throw IdOutOfRange("symptom id " + std::to_string(e.symptom.index) + " >= " +
                           std::to_string(m));
      if (e.status == SymptomStatus::Present)
        counts(static_cast<Eigen::Index>(r.label.index), static_cast<Eigen::Index>(e.symptom.index)) +=
            1.0;
    }
  }
  for (std::size_t d = 0; d < n; ++d) {
    if (per_disease[d] == 0.0)
      throw EmptyDataset("disease " + std::to_string(d) + " has no training record");
    counts.row(static_cast<Eigen::Index>(d)) /= per_disease[d];
  }
  std::vector<double> prior(n);
  for (std::size_t d = 0; d < n; ++d) prior[d] = per_disease[d] / static_cast<double>(records.size());
  return KnowledgeBase(std::move(counts), std::move(prior));
}

KnowledgeBase::KnowledgeBase(Eigen::MatrixXd freq, std::vector<double> prior)
    : freq_(std::move(freq)), prior_(std::move(prior)) {
  const auto n = disease_count();
  const auto m = symptom_count();
  if (prior_.size() != n) throw LengthMismatch("prior length does not match disease count");
  if ((freq_.array() < 0.0).any() || (freq_.array() > 1.0).any())
    throw InvalidRecord("frequency outside [0, 1]");
  const double total = std::accumulate(prior_.begin(), prior_.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw InvalidRecord("prior does not sum to 1");

  relevant_.resize(n);
  for (std::size_t d = 0; d < n; ++d) {
    auto& rel = relevant_[d];
    for (std::size_t s = 0; s < m; ++s) {
      const double f = freq_(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(s));
      if (f > 0.0) rel.push_back({SymptomId{s}, f});
    }
    std::stable_sort(rel.begin(), rel.end(), [](const RelevantSymptom& a, const RelevantSymptom& b) {
      return a.frequency > b.frequency;
    });
  }
  background_.resize(m);
  for (std::size_t s = 0; s < m; ++s) background_[s] = freq_.col(static_cast<Eigen::Index>(s)).mean();
}

void KnowledgeBase::set_names(std::vector<std::string> symptoms, std::vector<std::string> diseases) {
  if (!symptoms.empty() && symptoms.size() != symptom_count())
    throw LengthMismatch("symptom name table size does not match vocabulary");
  if (!diseases.empty() && diseases.size() != disease_count())
    throw LengthMismatch("disease name table size does not match vocabulary");
  symptom_names_ = std::move(symptoms);
  disease_names_ = std::move(diseases);
}

std::string KnowledgeBase::symptom_name(SymptomId s) const {
  if (s.index < symptom_names_.size()) return symptom_names_[s.index];
  return "s" + std::to_string(s.index);
}

std::string KnowledgeBase::disease_name(DiseaseId d) const {
  if (d.index < disease_names_.size()) return disease_names_[d.index];
  return "d" + std::to_string(d.index);
}

void KnowledgeBase::check_symptom(SymptomId s) const {
  if (s.index >= symptom_count())
    throw IdOutOfRange("symptom id " + std::to_string(s.index) + " >= " +
                       std::to_string(symptom_count()));
}

void KnowledgeBase::check_disease(DiseaseId d) const {
  if (d.index >= disease_count())
    throw IdOutOfRange("disease id " + std::to_string(d.index) + " >= " +
                       std::to_string(disease_count()));
}

bool KnowledgeBase::operator==(const KnowledgeBase& o) const {
  return freq_ == o.freq_ && prior_ == o.prior_ && symptom_names_ == o.symptom_names_ &&
         disease_names_ == o.disease_names_;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

std::vector<DiseaseId> similar_diseases(const KnowledgeBase& kb, DiseaseId d, std::size_t k) {
  const auto n = kb.disease_count();
  kb.check_disease(d);
  if (k >= n)
    throw KTooLarge("asked for " + std::to_string(k) + " similar diseases out of " + std::to_string(n));

  const Eigen::VectorXd row = kb.freq_matrix().row(static_cast<Eigen::Index>(d.index));
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == d.index) continue;
    const Eigen::VectorXd other = kb.freq_matrix().row(static_cast<Eigen::Index>(j));
    scored.emplace_back(cosine_similarity(row, other), j);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<DiseaseId> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(DiseaseId{scored[i].second});
  return out;
}

}  // namespace dualmc
