#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dualmc/core.hpp"

namespace dualmc {

struct RelevantSymptom {
  SymptomId symptom;
  double frequency = 0.0;
};

// Disease-symptom frequency statistics estimated from training records.
// Immutable once built; share it freely between threads.
class KnowledgeBase {
 public:
  // Counts, per disease, how often each symptom is recorded Present (explicit
  // and implicit alike). Throws EmptyDataset when records is empty or some
  // disease has no record, IdOutOfRange on bad ids.
  static KnowledgeBase build(std::span<const PatientRecord> records, std::size_t m, std::size_t n);

  // Direct construction from a frequency matrix (n x m) and prior; used when
  // loading a saved knowledge base and by fixtures.
  KnowledgeBase(Eigen::MatrixXd freq, std::vector<double> prior);

  std::size_t symptom_count() const noexcept { return static_cast<std::size_t>(freq_.cols()); }
  std::size_t disease_count() const noexcept { return static_cast<std::size_t>(freq_.rows()); }

  double freq(DiseaseId d, SymptomId s) const { return freq_(d.index, s.index); }
  const Eigen::MatrixXd& freq_matrix() const noexcept { return freq_; }
  const std::vector<double>& prior() const noexcept { return prior_; }
  // Symptoms with positive frequency under d, most frequent first (ties by id).
  const std::vector<RelevantSymptom>& relevant(DiseaseId d) const { return relevant_.at(d.index); }
  bool is_relevant(DiseaseId d, SymptomId s) const { return freq(d, s) > 0.0; }
  // Mean frequency of s across diseases.
  double background(SymptomId s) const { return background_.at(s.index); }

  const std::vector<std::string>& symptom_names() const noexcept { return symptom_names_; }
  const std::vector<std::string>& disease_names() const noexcept { return disease_names_; }
  void set_names(std::vector<std::string> symptoms, std::vector<std::string> diseases);
  std::string symptom_name(SymptomId s) const;
  std::string disease_name(DiseaseId d) const;

  void check_symptom(SymptomId s) const;
  void check_disease(DiseaseId d) const;

  bool operator==(const KnowledgeBase& o) const;

 private:
  Eigen::MatrixXd freq_;
  std::vector<double> prior_;
  std::vector<std::vector<RelevantSymptom>> relevant_;
  std::vector<double> background_;
  std::vector<std::string> symptom_names_;
  std::vector<std::string> disease_names_;
};

// The k diseases (excluding d) whose frequency rows have the highest cosine
// similarity with d's row; ties by ascending index. Throws KTooLarge unless
// k < n.
std::vector<DiseaseId> similar_diseases(const KnowledgeBase& kb, DiseaseId d, std::size_t k);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace dualmc
