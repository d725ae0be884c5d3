#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dualmc {

struct SymptomId {
  std::size_t index = 0;
  auto operator<=>(const SymptomId&) const = default;
};

struct DiseaseId {
  std::size_t index = 0;
  auto operator<=>(const DiseaseId&) const = default;
};

// Ternary symptom coding used in the observation vector.
enum class SymptomStatus : std::int8_t { Absent = -1, Unknown = 0, Present = 1 };

inline int sign(SymptomStatus s) noexcept { return static_cast<int>(s); }
std::optional<SymptomStatus> status_from_int(int v) noexcept;
const char* to_string(SymptomStatus s) noexcept;

struct SymptomEntry {
  SymptomId symptom;
  SymptomStatus status = SymptomStatus::Unknown;
  bool operator==(const SymptomEntry&) const = default;
};

// One consultation record: self-reported symptoms, symptoms elicited by the
// doctor, and the ground-truth disease.
struct PatientRecord {
  std::vector<SymptomEntry> explicit_symptoms;
  std::vector<SymptomEntry> implicit_symptoms;
  DiseaseId label;

  std::size_t self_reported() const noexcept { return explicit_symptoms.size(); }
  std::size_t total_symptoms() const noexcept {
    return explicit_symptoms.size() + implicit_symptoms.size();
  }
  // Explicit entries first, then implicit, each in record order.
  std::vector<SymptomEntry> all_symptoms() const;
  std::optional<SymptomStatus> recorded_status(SymptomId s) const noexcept;

  bool operator==(const PatientRecord&) const = default;
};

// Throws InvalidRecord / IdOutOfRange when the record breaks its invariants:
// explicit non-empty, no repeated symptom, no Unknown status, ids in range.
void validate_record(const PatientRecord& r, std::size_t m, std::size_t n);

// Ordered, append-only collection of answered symptoms.
class Evidence {
 public:
  Evidence() = default;
  explicit Evidence(std::span<const SymptomEntry> entries);

  // Throws DuplicateSymptom if the symptom is already present, InvalidRecord
  // for an Unknown status.
  void append(SymptomEntry e);
  bool contains(SymptomId s) const noexcept;

  const std::vector<SymptomEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  bool operator==(const Evidence&) const = default;

 private:
  std::vector<SymptomEntry> entries_;
};

// Indices of the w largest values, ties broken by ascending index. The result
// is ordered by rank (largest first).
std::vector<DiseaseId> top_w_diseases(std::span<const double> confidence, std::size_t w);

// 1 + number of entries strictly greater than values[i]; equal values that sit
// at an earlier index also count as ranking higher.
std::size_t rank_of(std::span<const double> values, std::size_t i);

}  // namespace dualmc
