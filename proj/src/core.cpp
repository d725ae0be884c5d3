#include "dualmc/core.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "dualmc/error.hpp"

namespace dualmc {

std::optional<SymptomStatus> status_from_int(int v) noexcept {
  switch (v) {
    case -1: return SymptomStatus::Absent;
    case 0: return SymptomStatus::Unknown;
    case 1: return SymptomStatus::Present;
    default: return std::nullopt;
  }
}

const char* to_string(SymptomStatus s) noexcept {
  switch (s) {
    case SymptomStatus::Absent: return "absent";
    case SymptomStatus::Present: return "present";
    case SymptomStatus::Unknown: break;
  }
  return "unknown";
}

std::vector<SymptomEntry> PatientRecord::all_symptoms() const {
  std::vector<SymptomEntry> out;
  out.reserve(total_symptoms());
  out.insert(out.end(), explicit_symptoms.begin(), explicit_symptoms.end());
  out.insert(out.end(), implicit_symptoms.begin(), implicit_symptoms.end());
  return out;
}

std::optional<SymptomStatus> PatientRecord::recorded_status(SymptomId s) const noexcept {
  for (const auto& e : explicit_symptoms)
    if (e.symptom == s) return e.status;
  for (const auto& e : implicit_symptoms)
    if (e.symptom == s) return e.status;
  return std::nullopt;
}

void validate_record(const PatientRecord& r, std::size_t m, std::size_t n) {
  if (r.explicit_symptoms.empty()) throw InvalidRecord("record has no explicit symptoms");
  if (r.label.index >= n)
    throw IdOutOfRange("disease id " + std::to_string(r.label.index) + " >= " + std::to_string(n));
  std::unordered_set<std::size_t> seen;
  for (const auto& e : r.all_symptoms()) {
    if (e.symptom.index >= m)
      throw IdOutOfRange("symptom id " + std::to_string(e.symptom.index) + " >= " + std::to_string(m));
    if (e.status == SymptomStatus::Unknown) throw InvalidRecord("record entry with unknown status");
    if (!seen.insert(e.symptom.index).second)
      throw InvalidRecord("symptom " + std::to_string(e.symptom.index) + " recorded twice");
  }
}

Evidence::Evidence(std::span<const SymptomEntry> entries) {
  for (const auto& e : entries) append(e);
}

void Evidence::append(SymptomEntry e) {
  if (e.status == SymptomStatus::Unknown) throw InvalidRecord("evidence entry with unknown status");
  if (contains(e.symptom))
    throw DuplicateSymptom("symptom " + std::to_string(e.symptom.index) + " already in evidence");
  entries_.push_back(e);
}

bool Evidence::contains(SymptomId s) const noexcept {
  return std::any_of(entries_.begin(), entries_.end(),
                     [s](const SymptomEntry& e) { return e.symptom == s; });
}

std::vector<DiseaseId> top_w_diseases(std::span<const double> confidence, std::size_t w) {
  std::vector<std::size_t> idx(confidence.size());
  std::iota(idx.begin(), idx.end(), 0);
  w = std::min(w, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(w), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (confidence[a] != confidence[b]) return confidence[a] > confidence[b];
                      return a < b;
                    });
  std::vector<DiseaseId> out;
  out.reserve(w);
  for (std::size_t i = 0; i < w; ++i) out.push_back(DiseaseId{idx[i]});
  return out;
}

std::size_t rank_of(std::span<const double> values, std::size_t i) {
  std::size_t rank = 1;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (j == i) continue;
    if (values[j] > values[i] || (values[j] == values[i] && j < i)) ++rank;
  }
  return rank;
}

}  // namespace dualmc
